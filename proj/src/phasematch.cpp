#include "twpac/phasematch.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "twpac/constants.hpp"
#include "twpac/errors.hpp"

namespace twpac::phasematch {

using constants::two_pi;

namespace {

double beta(const Context& ctx, double omega) {
    for (const auto& sb : ctx.table.stopbands) {
        if (omega >= sb.omega_lo && omega <= sb.omega_hi) {
            throw DomainError("evanescent mode at " + std::to_string(omega / two_pi / 1e9) + " GHz");
        }
    }
    return ctx.table.complex_wavenumber(omega).real();
}

double gamma(const Context& ctx, double omega) {
    if (!ctx.include_reflections) return 0.0;
    const auto z = ctx.table.impedance(omega);
    const double z0 = ctx.device.environment_impedance;
    return std::abs(z - z0) / std::abs(z + z0);
}

double mismatch(const Context& ctx, Process p, double pump, double target, double amplitude) {
    switch (p) {
        case Process::pa:
            return pa_mismatch(ctx, 0.5 * (pump + target), pump, amplitude);
        case Process::fc_down:
            return fc_mismatch(ctx, target, pump, amplitude);
        case Process::fc_up:
            return up_conversion_mismatch(ctx, target, pump);
    }
    return 0.0;
}

}  // namespace

double kerr_factor(const Context& ctx, double omega_pump, double amplitude) {
    const auto c = device::dressed_coefficients(ctx.device.junction, ctx.device.bias, omega_pump);
    return c.second_order * amplitude * amplitude / 8.0;
}

double pa_mismatch(const Context& ctx, double omega_s, double omega_a, double amplitude) {
    if (!(omega_s < omega_a)) throw DomainError("signal must lie below the PA pump");
    const double ka = beta(ctx, omega_a);
    const double ks = beta(ctx, omega_s);
    const double ki = beta(ctx, omega_a - omega_s);
    const double g = gamma(ctx, omega_a);
    const double chi = amplitude == 0.0 ? 0.0 : kerr_factor(ctx, omega_a, amplitude);
    return ka - ks - ki + chi * (1.0 + g * g) * (ka - 2.0 * ks - 2.0 * ki);
}

double fc_mismatch(const Context& ctx, double omega_s, double omega_c, double amplitude) {
    if (!(omega_s > omega_c)) throw DomainError("signal must lie above the FC pump");
    const double kc = beta(ctx, omega_c);
    const double kd = beta(ctx, omega_s - omega_c);
    const double ks = beta(ctx, omega_s);
    const double g = gamma(ctx, omega_c);
    const double chi = amplitude == 0.0 ? 0.0 : kerr_factor(ctx, omega_c, amplitude);
    return kc + kd - ks + chi * (1.0 + g * g) * (kc + 2.0 * kd - 2.0 * ks);
}

double up_conversion_mismatch(const Context& ctx, double omega_s, double omega_c) {
    return beta(ctx, omega_s) + beta(ctx, omega_c) - beta(ctx, omega_s + omega_c);
}

MismatchCurve mismatch_curve(const Context& ctx, Process process, double pump_omega, double amplitude,
                             const std::vector<double>& signal_omegas) {
    MismatchCurve c;
    c.process = process;
    c.pump_omega = pump_omega;
    c.pump_amplitude = amplitude;
    for (double ws : signal_omegas) {
        double v = 0.0;
        try {
            switch (process) {
                case Process::pa: v = pa_mismatch(ctx, ws, pump_omega, amplitude); break;
                case Process::fc_down: v = fc_mismatch(ctx, ws, pump_omega, amplitude); break;
                case Process::fc_up: v = up_conversion_mismatch(ctx, ws, pump_omega); break;
            }
        } catch (const DomainError&) {
            v = std::nan("");
        }
        c.signal_omega.push_back(ws);
        c.delta_beta.push_back(v);
    }
    return c;
}

PumpPlacement solve_pump_placement(const Context& ctx, Process process, double target, double amplitude,
                                   const PlacementOptions& options) {
    const double ghz = two_pi * 1e9;
    double lo = options.scan_min;
    double hi = options.scan_max;
    if (lo == 0.0 && hi == 0.0) {
        if (process == Process::pa) {
            lo = 12.0 * ghz;
            hi = 16.5 * ghz;
        } else {
            lo = 2.0 * ghz;
            hi = std::min(6.0 * ghz, target - 0.5 * ghz);
        }
    }
    const double step = options.scan_step > 0.0 ? options.scan_step : 0.01 * ghz;
    const double tol = options.tolerance > 0.0 ? options.tolerance : 0.001 * ghz;

    auto eval = [&](double w) -> std::optional<double> {
        try {
            return mismatch(ctx, process, w, target, amplitude);
        } catch (const DomainError&) {
            return std::nullopt;
        }
    };

    PumpPlacement out;
    out.process = process;
    std::optional<double> prev;
    double prev_w = lo;
    double scale = 0.0;
    bool all_zero = true;
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= n; ++k) {
        const double w = lo + static_cast<double>(k) * step;
        const auto v = eval(w);
        if (v) {
            scale = std::max(scale, std::abs(ctx.table.complex_wavenumber(w).real()));
            if (std::abs(*v) > 1e-12 * std::max(scale, 1e-30)) all_zero = false;
        }
        if (v && prev && ((*v) * (*prev) < 0.0 || *v == 0.0)) {
            double a = prev_w;
            double b = w;
            double fa = *prev;
            while (b - a > tol) {
                const double m = 0.5 * (a + b);
                const auto fm = eval(m);
                if (!fm) break;
                if ((*fm) * fa <= 0.0) {
                    b = m;
                } else {
                    a = m;
                    fa = *fm;
                }
            }
            out.roots.push_back(0.5 * (a + b));
        }
        prev = v;
        prev_w = w;
    }
    if (all_zero && scale > 0.0) {
        out.degenerate = true;
        out.pump_omega = 0.5 * (lo + hi);
    } else if (out.roots.empty()) {
        throw NumericalError("no phase-matching root in the scanned pump range");
    } else {
        out.pump_omega = out.roots.front();
        if (process == Process::fc_down) {
            // At zero amplitude the condition is symmetric under c <-> d, so roots come in mirror
            // pairs about omega_s / 2. The pump is the member above omega_s / 2.
            for (double r : out.roots) {
                if (r > 0.5 * target) {
                    out.pump_omega = r;
                    break;
                }
            }
        }
        if (options.hint > 0.0) {
            for (double r : out.roots)
                if (std::abs(r - options.hint) < std::abs(out.pump_omega - options.hint)) out.pump_omega = r;
        }
    }
    const double wp = out.pump_omega;
    switch (process) {
        case Process::pa:
            out.signal_omega = 0.5 * (wp + target);
            out.partner_omega = 0.5 * (wp - target);
            break;
        case Process::fc_down:
            out.signal_omega = target;
            out.partner_omega = target - wp;
            break;
        case Process::fc_up:
            out.signal_omega = target;
            out.partner_omega = target + wp;
            break;
    }
    const auto r = eval(wp);
    out.residual = r ? *r : std::nan("");
    return out;
}

}  // namespace twpac::phasematch
