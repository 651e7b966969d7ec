#include "twpac/cme.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "twpac/constants.hpp"
#include "twpac/errors.hpp"
#include "twpac/parallel.hpp"

namespace twpac::cme {

using constants::two_pi;
namespace {

const cplx I{0.0, 1.0};

std::vector<Term> make_terms() {
    using M = Mode;
    std::vector<Term> t;
    auto add = [&](M p, int order, double w, std::initializer_list<Factor> f) {
        Term term{p, order, w, {}};
        std::size_t k = 0;
        for (const auto& x : f) term.factors[k++] = x;
        t.push_back(term);
    };
    auto F = [](M m) { return Factor{m, false}; };
    auto C = [](M m) { return Factor{m, true}; };

    // Three-wave mixing.
    add(M::a, 3, 1.0, {F(M::s), F(M::i)});
    add(M::s, 3, 1.0, {F(M::a), C(M::i)});
    add(M::s, 3, 1.0, {F(M::c), F(M::d)});
    add(M::s, 3, 1.0, {F(M::u), C(M::c)});
    add(M::i, 3, 1.0, {F(M::a), C(M::s)});
    add(M::c, 3, 1.0, {F(M::s), C(M::d)});
    add(M::c, 3, 1.0, {F(M::u), C(M::s)});
    add(M::c, 3, 1.0, {F(M::c2), C(M::c)});
    add(M::d, 3, 1.0, {F(M::s), C(M::c)});
    add(M::d, 3, 1.0, {F(M::u), C(M::c2)});
    add(M::u, 3, 1.0, {F(M::s), F(M::c)});
    add(M::u, 3, 1.0, {F(M::c2), F(M::d)});
    add(M::c2, 3, 0.5, {F(M::c), F(M::c)});
    add(M::c2, 3, 1.0, {F(M::u), C(M::d)});

    // Four-wave mixing: self and cross phase modulation.
    for (int p = 0; p < kModes; ++p) {
        for (int m = 0; m < kModes; ++m) {
            add(static_cast<M>(p), 4, m == p ? 1.0 : 2.0,
                {F(static_cast<M>(p)), F(static_cast<M>(m)), C(static_cast<M>(m))});
        }
    }
    // Four-wave mixing between distinct modes.
    add(M::a, 4, 2.0, {F(M::u), C(M::c), F(M::i)});
    add(M::a, 4, 2.0, {F(M::d), F(M::i), F(M::c)});
    add(M::s, 4, 2.0, {F(M::c2), C(M::c), F(M::d)});
    add(M::s, 4, 2.0, {F(M::u), C(M::c2), F(M::c)});
    add(M::i, 4, 2.0, {F(M::a), C(M::u), F(M::c)});
    add(M::i, 4, 2.0, {F(M::a), C(M::d), C(M::c)});
    add(M::c, 4, 2.0, {F(M::u), C(M::d), C(M::c)});
    add(M::c, 4, 2.0, {F(M::c2), C(M::s), F(M::d)});
    add(M::c, 4, 2.0, {F(M::c2), C(M::u), F(M::s)});
    add(M::c, 4, 2.0, {F(M::u), C(M::a), F(M::i)});
    add(M::c, 4, 2.0, {F(M::a), C(M::d), C(M::i)});
    add(M::d, 4, 1.0, {F(M::u), C(M::c), C(M::c)});
    add(M::d, 4, 2.0, {F(M::c), F(M::s), C(M::c2)});
    add(M::d, 4, 2.0, {F(M::a), C(M::i), C(M::c)});
    add(M::u, 4, 1.0, {F(M::d), F(M::c), F(M::c)});
    add(M::u, 4, 2.0, {F(M::c2), C(M::c), F(M::s)});
    add(M::u, 4, 2.0, {F(M::a), C(M::i), F(M::c)});
    add(M::c2, 4, 2.0, {F(M::c), F(M::s), C(M::d)});
    add(M::c2, 4, 2.0, {F(M::u), C(M::s), F(M::c)});
    return t;
}

const std::vector<Term>& terms() {
    static const std::vector<Term> t = make_terms();
    return t;
}

}  // namespace

std::string_view mode_name(Mode m) {
    static constexpr std::array<std::string_view, kModes> names{"a", "s", "i", "c", "d", "u", "c2"};
    return names[static_cast<std::size_t>(idx(m))];
}

std::array<double, kModes> mode_frequencies(double omega_a, double omega_c, double omega_s) {
    if (!(omega_s > omega_c)) {
        throw DomainError("down-converted frequency omega_s - omega_c is not positive");
    }
    if (!(omega_c > 0.0) || !(omega_a > omega_s)) {
        throw DomainError("mode frequencies require omega_a > omega_s > omega_c > 0");
    }
    std::array<double, kModes> f{};
    f[idx(Mode::a)] = omega_a;
    f[idx(Mode::s)] = omega_s;
    f[idx(Mode::i)] = omega_a - omega_s;
    f[idx(Mode::c)] = omega_c;
    f[idx(Mode::d)] = omega_s - omega_c;
    f[idx(Mode::u)] = omega_s + omega_c;
    f[idx(Mode::c2)] = 2.0 * omega_c;
    return f;
}

ReflectionFactors reflection_factors(cplx z, double z0, cplx k, int cells, bool complex_gamma) {
    ReflectionFactors r;
    cplx g = complex_gamma ? (z - z0) / (z + z0) : cplx(std::abs(z - z0) / std::abs(z + z0));
    r.gamma = complex_gamma ? std::abs(g) : g.real();
    r.gamma_complex = g;
    const cplx e1 = std::exp(I * k * static_cast<double>(cells));
    const cplx den = 1.0 - g * e1 * e1;
    if (std::abs(den) < 1e-15) throw NumericalError("resonant divergence of the round-trip factor");
    r.t = 1.0 / den;
    r.gamma_tilde = g * e1;
    return r;
}

double power_to_current(double p_dbm, double z0) {
    if (!(z0 > 0.0)) throw DomainError("Z0 must be > 0");
    if (!std::isfinite(p_dbm)) return 0.0;
    return std::sqrt(2.0 * std::pow(10.0, (p_dbm - 30.0) / 10.0) / z0);
}

double current_to_power_dbm(double amplitude, double z0) {
    const double p = 0.5 * amplitude * amplitude * z0;
    return 10.0 * std::log10(p) + 30.0;
}

std::vector<std::string> drive_warnings(const DriveConfig& drive) {
    std::vector<std::string> w;
    auto check = [&](bool on, const Tone& pump, std::string_view name) {
        if (on && drive.signal.power_dbm > pump.power_dbm - 20.0) {
            w.push_back("signal power within 20 dB of the " + std::string(name) + " pump");
        }
    };
    check(drive.pa_enabled, drive.pa, "PA");
    check(drive.fc_enabled, drive.fc, "FC");
    return w;
}

std::span<const Term> term_table() { return terms(); }

std::array<int, kModes> propagation_signs(Direction direction) {
    std::array<int, kModes> s{};
    s.fill(1);
    if (direction == Direction::forward) {
        s[idx(Mode::c)] = -1;
    } else {
        s[idx(Mode::a)] = -1;
    }
    return s;
}

cplx mode_wave(const ModeData& m, bool conj, double x) {
    const cplx e = std::exp(I * (m.sign * m.beta * x));
    const cplx w = e + m.refl.gamma_tilde * std::conj(e);
    return conj ? std::conj(w) : w;
}

cplx mode_denominator(const ModeData& m, double x) {
    const cplx e = std::exp(I * (m.sign * m.beta * x));
    return e - m.refl.gamma_tilde * std::conj(e);
}

cplx phase_factor_3wm(Factor m, Factor n, Mode p, const ModeEnvironment& env, double x) {
    const cplx den = mode_denominator(env[p], x);
    if (std::abs(den) < 1e-14) throw NumericalError("vanishing phase-factor denominator");
    return mode_wave(env[m.mode], m.conj, x) * mode_wave(env[n.mode], n.conj, x) / den;
}

cplx phase_factor_4wm(Factor m, Factor n, Factor q, Mode p, const ModeEnvironment& env, double x) {
    const cplx den = mode_denominator(env[p], x);
    if (std::abs(den) < 1e-14) throw NumericalError("vanishing phase-factor denominator");
    return mode_wave(env[m.mode], m.conj, x) * mode_wave(env[n.mode], n.conj, x) *
           mode_wave(env[q.mode], q.conj, x) / den;
}

void cme_rhs(double x, const State& y, State& dy, const ModeEnvironment& env,
             const CmeOptions& options) {
    // w_m = t_m I_m (e^{i s k x} + G~ e^{-i s k x}); the generic product term is
    // weight * prod(w or w*) / (t_p (e^{i s k x} - G~ e^{-i s k x})).
    State w{};
    State w_conj{};
    State den{};
    for (int n = 0; n < kModes; ++n) {
        const auto& m = env.modes[static_cast<std::size_t>(n)];
        const cplx e = std::exp(I * (m.sign * m.beta * x));
        const cplx ec = std::conj(e);
        w[n] = m.refl.t * y[n] * (e + m.refl.gamma_tilde * ec);
        w_conj[n] = std::conj(w[n]);
        den[n] = m.refl.t * (e - m.refl.gamma_tilde * ec);
    }
    State s3{};
    State s4{};
    for (const auto& term : terms()) {
        if (term.order == 4 && !options.include_4wm) continue;
        cplx prod = term.weight;
        for (int k = 0; k < term.order - 1; ++k) {
            const auto& f = term.factors[static_cast<std::size_t>(k)];
            prod *= f.conj ? w_conj[idx(f.mode)] : w[idx(f.mode)];
        }
        (term.order == 3 ? s3 : s4)[idx(term.target)] += prod;
    }
    for (int p = 0; p < kModes; ++p) {
        const auto& m = env.modes[static_cast<std::size_t>(p)];
        cplx nl = 0.25 * m.eps * s3[p];
        if (options.include_4wm) nl += 0.125 * m.xi * s4[p];
        dy[p] = static_cast<double>(m.sign) * I * m.beta * nl / den[p] -
                static_cast<double>(m.sign) * m.alpha * y[p];
        if (!std::isfinite(dy[p].real()) || !std::isfinite(dy[p].imag())) {
            throw NumericalError("non-finite derivative for mode " + std::string(mode_name(static_cast<Mode>(p))) +
                                 " at x = " + std::to_string(x));
        }
    }
}

ModeEnvironment build_environment(const device::DeviceSpec& device,
                                  const dispersion::DispersionTable& table, const DriveConfig& drive,
                                  const CmeOptions& options) {
    const auto f = mode_frequencies(drive.pa.omega, drive.fc.omega, drive.signal.omega);
    const auto signs = propagation_signs(drive.direction);
    ModeEnvironment env;
    env.cells = device.total_cells();
    for (int n = 0; n < kModes; ++n) {
        auto& m = env.modes[static_cast<std::size_t>(n)];
        m.omega = f[static_cast<std::size_t>(n)];
        const cplx k = table.complex_wavenumber(m.omega);
        m.beta = k.real();
        m.alpha = k.imag();
        m.impedance = table.impedance(m.omega);
        if (options.include_reflections) {
            m.refl = reflection_factors(m.impedance, device.environment_impedance, k, env.cells,
                                        options.complex_gamma);
        }
        const auto c = device::dressed_coefficients(device.junction, device.bias, m.omega);
        m.eps = c.first_order;
        m.xi = c.second_order;
        m.sign = signs[static_cast<std::size_t>(n)];
    }
    return env;
}

State initial_conditions(const ModeEnvironment& env, const DriveConfig& drive, double z0,
                         const CmeOptions& options) {
    State y{};
    if (drive.pa_enabled) y[idx(Mode::a)] = power_to_current(drive.pa.power_dbm, z0);
    if (drive.fc_enabled) y[idx(Mode::c)] = power_to_current(drive.fc.power_dbm, z0);
    y[idx(Mode::s)] = power_to_current(drive.signal.power_dbm, z0) * std::exp(I * drive.signal_phase);
    if (options.backward_pump_loss_compensation) {
        for (Mode p : {Mode::a, Mode::c}) {
            const auto& m = env[p];
            if (m.sign < 0) y[idx(p)] *= std::exp(-m.alpha * env.cells);
        }
    }
    return y;
}

namespace {

using RealState = std::array<double, 2 * kModes>;

RealState to_real(const State& s) {
    RealState r{};
    for (int n = 0; n < kModes; ++n) {
        r[static_cast<std::size_t>(n)] = s[n].real();
        r[static_cast<std::size_t>(n + kModes)] = s[n].imag();
    }
    return r;
}

State to_complex(const RealState& r) {
    State s{};
    for (int n = 0; n < kModes; ++n)
        s[n] = {r[static_cast<std::size_t>(n)], r[static_cast<std::size_t>(n + kModes)]};
    return s;
}

}  // namespace

CmeSolution integrate(const ModeEnvironment& env, const DriveConfig& drive, const CmeOptions& options,
                      double z0) {
    namespace odeint = boost::numeric::odeint;
    if (!(options.relative_tolerance > 0.0) || !(options.absolute_tolerance > 0.0))
        throw DomainError("tolerances must be > 0");

    CmeSolution sol;
    sol.env = env;
    sol.drive = drive;
    sol.options = options;
    sol.initial = initial_conditions(env, drive, z0, options);
    sol.degenerate = std::abs(drive.signal.omega - 0.5 * drive.pa.omega) <= 1e-12 * drive.pa.omega;

    const double n = env.cells;
    std::vector<double> xs;
    if (env.cells == 0) {
        xs = {0.0};
    } else if (options.sample_every <= 0) {
        xs = {0.0, n};
    } else {
        for (int x = 0; x < env.cells; x += options.sample_every) xs.push_back(x);
        xs.push_back(n);
    }
    if (env.cells == 0) {
        sol.x = xs;
        sol.amplitudes = {sol.initial};
        return sol;
    }

    RealState y = to_real(sol.initial);
    auto rhs = [&](const RealState& yr, RealState& dyr, double x) {
        State d{};
        cme_rhs(x, to_complex(yr), d, env, options);
        dyr = to_real(d);
    };
    sol.x.reserve(xs.size());
    sol.amplitudes.reserve(xs.size());
    auto observer = [&](const RealState& yr, double x) {
        sol.x.push_back(x);
        sol.amplitudes.push_back(to_complex(yr));
    };
    auto stepper = odeint::make_dense_output(options.absolute_tolerance, options.relative_tolerance,
                                             odeint::runge_kutta_dopri5<RealState>());
    try {
        sol.steps = odeint::integrate_times(stepper, rhs, y, xs.begin(), xs.end(), 0.5,
                                            observer, odeint::max_step_checker(100000));
    } catch (const odeint::no_progress_error& e) {
        throw NumericalError(std::string("step-size underflow at f_s = ") +
                             std::to_string(drive.signal.omega / two_pi / 1e9) + " GHz: " + e.what());
    } catch (const odeint::step_adjustment_error& e) {
        throw NumericalError(std::string("tolerance not met at f_s = ") +
                             std::to_string(drive.signal.omega / two_pi / 1e9) + " GHz: " + e.what());
    }
    return sol;
}

CmeSolution integrate(const device::DeviceSpec& device, const dispersion::DispersionTable& table,
                      const DriveConfig& drive, const CmeOptions& options) {
    const auto env = build_environment(device, table, drive, options);
    return integrate(env, drive, options, device.environment_impedance);
}

double transmission_coefficient(const ModeData& m) {
    // |1 - Gamma^2|^2 reduces to (1 - Gamma^2)^2 for the real magnitude convention.
    return std::norm(1.0 - m.refl.gamma_complex * m.refl.gamma_complex) * std::norm(m.refl.t);
}

double signal_gain(const CmeSolution& solution) {
    const cplx s0 = solution.initial[idx(Mode::s)];
    if (s0 == cplx(0.0)) throw DomainError("signal input amplitude is zero; gain undefined");
    const cplx sn = solution.final_state()[idx(Mode::s)];
    return std::norm(sn / s0) * transmission_coefficient(solution.env[Mode::s]);
}

dispersion::DispersionTable cme_dispersion(const device::DeviceSpec& device,
                                           const device::CellProfile& profile, double f_max_hz,
                                           double f_step_hz) {
    dispersion::DispersionOptions o;
    o.f_min = f_step_hz;
    o.f_max = f_max_hz;
    o.f_step = f_step_hz;
    return dispersion::compute_table(device, profile, o);
}

SpectrumResult sweep_spectrum(const device::DeviceSpec& device, const dispersion::DispersionTable& table,
                              const DriveConfig& drive_template, std::span<const double> signal_omegas,
                              Direction direction, const CmeOptions& options, int workers) {
    SpectrumResult r;
    r.direction = direction;
    r.points.resize(signal_omegas.size());
    const double z0 = device.environment_impedance;
    parallel_for(signal_omegas.size(), workers, [&](std::size_t k) {
        auto& pt = r.points[k];
        pt.omega = signal_omegas[k];
        for (const auto& sb : table.stopbands) {
            const double tol = 1e-9 * pt.omega;
            if (std::abs(pt.omega - sb.omega_lo) < tol || std::abs(pt.omega - sb.omega_hi) < tol) {
                pt.ok = false;
                pt.skipped = true;
                pt.error = "signal on a stopband edge";
                return;
            }
        }
        DriveConfig drive = drive_template;
        drive.signal.omega = pt.omega;
        drive.direction = direction;
        CmeOptions o = options;
        o.sample_every = 0;
        try {
            const auto sol = integrate(device, table, drive, o);
            pt.gain_db = 10.0 * std::log10(signal_gain(sol));
            pt.degenerate = sol.degenerate;
            const auto& y0 = sol.initial;
            const auto& yn = sol.final_state();
            for (int n = 0; n < kModes; ++n) {
                const auto& m = sol.env.modes[static_cast<std::size_t>(n)];
                const cplx out = m.sign > 0 ? yn[n] : y0[n];
                const double p = std::norm(out) * transmission_coefficient(m) * 0.5 * z0;
                pt.terminal_power_dbm[static_cast<std::size_t>(n)] =
                    p > 0.0 ? 10.0 * std::log10(p) + 30.0 : -std::numeric_limits<double>::infinity();
            }
        } catch (const std::exception& e) {
            pt.ok = false;
            pt.error = e.what();
        }
    });
    return r;
}

}  // namespace twpac::cme
