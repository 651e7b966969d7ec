#include "twpac/transient.hpp"

#include <fftw3.h>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "twpac/cme.hpp"
#include "twpac/constants.hpp"
#include "twpac/errors.hpp"
#include "twpac/parallel.hpp"

namespace twpac::transient {

using constants::phi0;
using constants::two_pi;

namespace {

constexpr int kBand = 2;
constexpr int kLd = kBand + 1;

struct BandBuilder {
    std::vector<double>& ab;
    void add(int i, int j, double v) {
        if (i < j) std::swap(i, j);
        if (i - j > kBand) throw NumericalError("network ordering exceeds the band width");
        ab[static_cast<std::size_t>(j * kLd + (i - j))] += v;
    }
    void branch(int p, int q, double v) {
        add(p, p, v);
        add(q, q, v);
        add(p, q, -v);
    }
};

double envelope(double t, double ramp) {
    if (ramp <= 0.0 || t >= ramp) return 1.0;
    if (t <= 0.0) return 0.0;
    return 0.5 * (1.0 - std::cos(std::numbers::pi * t / ramp));
}

}  // namespace

Network build_network(const device::DeviceSpec& device, const device::CellProfile& profile) {
    const int n = static_cast<int>(profile.size());
    if (n < 1) throw DomainError("the network needs at least one cell");
    Network net;
    net.cells = n;
    net.critical_current = device.junction.critical_current;
    net.rpm_inductance = device.rpm.inductance;
    net.termination = device.environment_impedance;
    net.node_index.resize(static_cast<std::size_t>(n + 1));
    net.rpm_index.assign(static_cast<std::size_t>(n), -1);
    int counter = 0;
    for (int node = 0; node <= n; ++node) {
        net.node_index[static_cast<std::size_t>(node)] = counter++;
        // Shunt of cell j hangs on node j + 1; its rpm tank adds one internal node.
        if (node >= 1 && profile.rpm[static_cast<std::size_t>(node - 1)]) {
            net.rpm_index[static_cast<std::size_t>(node - 1)] = counter++;
        }
    }
    net.unknowns = counter;
    net.mass_band.assign(static_cast<std::size_t>(counter * kLd), 0.0);
    net.conductance.assign(static_cast<std::size_t>(counter), 0.0);
    BandBuilder m{net.mass_band};
    const double cj = device.junction.junction_capacitance;
    for (int j = 0; j < n; ++j) {
        const int a = net.node_index[static_cast<std::size_t>(j)];
        const int b = net.node_index[static_cast<std::size_t>(j + 1)];
        m.branch(a, b, cj);
        const double cc = profile.ground_capacitance[static_cast<std::size_t>(j)];
        const int r = net.rpm_index[static_cast<std::size_t>(j)];
        if (r >= 0) {
            m.branch(b, r, cc);
            m.add(r, r, device.rpm.capacitance);
        } else {
            m.add(b, b, cc);
        }
    }
    net.input_index = net.node_index.front();
    net.output_index = net.node_index.back();
    net.conductance[static_cast<std::size_t>(net.input_index)] += 1.0 / net.termination;
    net.conductance[static_cast<std::size_t>(net.output_index)] += 1.0 / net.termination;
    return net;
}

TransientResult integrate_transient(const Network& net, const TransientConfig& cfg) {
    const double h = cfg.time_step;
    if (!(h > 0.0) || !(cfg.duration > cfg.settle) || cfg.settle < 0.0)
        throw DomainError("invalid time step, duration or settle window");
    const int nu = net.unknowns;
    const auto nus = static_cast<std::size_t>(nu);
    const long total_steps = std::lround(cfg.duration / h);
    const long settle_steps = std::lround(cfg.settle / h);
    const long window_steps = total_steps - settle_steps;
    if (window_steps <= 0) throw DomainError("empty analysis window");

    const Port ref_port = cfg.reference_port;
    const Port far_port = ref_port == Port::input ? Port::output : Port::input;
    const int ref_port_idx = ref_port == Port::input ? net.input_index : net.output_index;
    const int far_port_idx = ref_port == Port::input ? net.output_index : net.input_index;

    double omega_max = 0.0;
    for (const auto& s : cfg.drives) omega_max = std::max(omega_max, s.omega);
    if (omega_max == 0.0) omega_max = two_pi / (h * 64.0);
    const double phase_rate_limit = 1e3 * omega_max;

    // Base Jacobian band: 4M/h^2 + 2G/h.
    std::vector<double> base(net.mass_band.size());
    for (std::size_t k = 0; k < base.size(); ++k) base[k] = 4.0 / (h * h) * net.mass_band[k];
    for (int i = 0; i < nu; ++i) base[static_cast<std::size_t>(i * kLd)] += 2.0 / h * net.conductance[static_cast<std::size_t>(i)];

    auto mass_times = [&](const std::vector<double>& x, std::vector<double>& y) {
        std::fill(y.begin(), y.end(), 0.0);
        for (int j = 0; j < nu; ++j) {
            for (int d = 0; d <= kBand && j + d < nu; ++d) {
                const double v = net.mass_band[static_cast<std::size_t>(j * kLd + d)];
                if (v == 0.0) continue;
                y[static_cast<std::size_t>(j + d)] += v * x[static_cast<std::size_t>(j)];
                if (d > 0) y[static_cast<std::size_t>(j)] += v * x[static_cast<std::size_t>(j + d)];
            }
        }
    };

    const double ic = net.critical_current;
    // Nonlinear branch currents f(phi) and, optionally, their Jacobian added into a band.
    auto branch_currents = [&](const std::vector<double>& phi, std::vector<double>& f, double* band) {
        std::fill(f.begin(), f.end(), 0.0);
        for (int j = 0; j < net.cells; ++j) {
            const int a = net.node_index[static_cast<std::size_t>(j)];
            const int b = net.node_index[static_cast<std::size_t>(j + 1)];
            const double ph = (phi[static_cast<std::size_t>(a)] - phi[static_cast<std::size_t>(b)]) / phi0;
            const double cur = ic * std::sin(ph);
            f[static_cast<std::size_t>(a)] += cur;
            f[static_cast<std::size_t>(b)] -= cur;
            if (band) {
                const double k = ic * std::cos(ph) / phi0;
                band[a * kLd] += k;
                band[b * kLd] += k;
                band[a * kLd + (b - a)] -= k;
            }
            const int r = net.rpm_index[static_cast<std::size_t>(j)];
            if (r >= 0) {
                f[static_cast<std::size_t>(r)] += phi[static_cast<std::size_t>(r)] / net.rpm_inductance;
                if (band) band[r * kLd] += 1.0 / net.rpm_inductance;
            }
        }
    };

    auto port_source = [&](double t, Port port) {
        const double e = envelope(t, cfg.ramp);
        double s = 0.0;
        for (const auto& src : cfg.drives) {
            if (src.port == port) s += src.amplitude * std::cos(src.omega * t + src.phase);
        }
        return e * s;
    };
    auto sources = [&](double t, std::vector<double>& i_src) {
        std::fill(i_src.begin(), i_src.end(), 0.0);
        const double ib = cfg.dc_bias * envelope(t, cfg.ramp);
        i_src[static_cast<std::size_t>(net.input_index)] += ib + port_source(t, Port::input);
        i_src[static_cast<std::size_t>(net.output_index)] += -ib + port_source(t, Port::output);
    };

    std::vector<double> phi(nus, 0.0), v(nus, 0.0), phi_n(nus), v_n(nus);
    std::vector<double> dphi(nus), f(nus), fn(nus), isrc(nus), isrc1(nus), mv(nus), r(nus), mdphi(nus), jac(net.mass_band.size());
    // F_n = I_n - G V_n - f(phi_n)
    sources(0.0, isrc);
    branch_currents(phi, f, nullptr);
    for (std::size_t i = 0; i < nus; ++i) fn[i] = isrc[i] - net.conductance[i] * v[i] - f[i];

    TransientResult res;
    res.time_step = h;
    res.termination = net.termination;
    res.window_start = static_cast<double>(settle_steps) * h;
    res.v_in.reserve(static_cast<std::size_t>(window_steps));
    res.i_in.reserve(static_cast<std::size_t>(window_steps));
    res.v_out.reserve(static_cast<std::size_t>(window_steps));
    res.i_out.reserve(static_cast<std::size_t>(window_steps));
    const std::size_t ref_u = static_cast<std::size_t>(ref_port_idx);
    const std::size_t far_u = static_cast<std::size_t>(far_port_idx);
    const double g_ref = net.conductance[ref_u];

    for (long step = 1; step <= total_steps; ++step) {
        const double t1 = static_cast<double>(step) * h;
        phi_n = phi;
        v_n = v;
        sources(t1, isrc1);
        mass_times(v_n, mv);
        for (std::size_t i = 0; i < nus; ++i) phi[i] = phi_n[i] + h * v_n[i];
        bool converged = false;
        for (int it = 0; it < cfg.newton_max_iterations; ++it) {
            std::copy(base.begin(), base.end(), jac.begin());
            branch_currents(phi, f, jac.data());
            for (std::size_t i = 0; i < nus; ++i) dphi[i] = phi[i] - phi_n[i];
            mass_times(dphi, mdphi);
            double scale = phi0;
            for (std::size_t i = 0; i < nus; ++i) {
                r[i] = 4.0 / (h * h) * mdphi[i] - 4.0 / h * mv[i] - fn[i] - isrc1[i] +
                       net.conductance[i] * (2.0 * dphi[i] / h - v_n[i]) + f[i];
                scale = std::max(scale, std::abs(phi[i]));
            }
            lapack_int info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', nu, kBand, jac.data(), kLd);
            if (info != 0) {
                throw NumericalError("Jacobian not positive definite at t = " + std::to_string(t1) + " s");
            }
            info = LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'L', nu, kBand, 1, jac.data(), kLd, r.data(), nu);
            if (info != 0) throw NumericalError("banded solve failed at t = " + std::to_string(t1) + " s");
            double dmax = 0.0;
            for (std::size_t i = 0; i < nus; ++i) {
                phi[i] -= r[i];
                dmax = std::max(dmax, std::abs(r[i]));
            }
            if (dmax <= cfg.newton_tolerance * scale) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw NumericalError("Newton iteration did not converge at t = " + std::to_string(t1) + " s");
        }
        for (std::size_t i = 0; i < nus; ++i) v[i] = 2.0 * (phi[i] - phi_n[i]) / h - v_n[i];
        branch_currents(phi, f, nullptr);
        for (std::size_t i = 0; i < nus; ++i) fn[i] = isrc1[i] - net.conductance[i] * v[i] - f[i];

        if (step % 256 == 0 || step == total_steps) {
            for (int j = 0; j < net.cells; ++j) {
                const auto a = static_cast<std::size_t>(net.node_index[static_cast<std::size_t>(j)]);
                const auto b = static_cast<std::size_t>(net.node_index[static_cast<std::size_t>(j + 1)]);
                const double rate = std::abs(v[a] - v[b]) / phi0;
                if (!std::isfinite(rate) || rate > phase_rate_limit) {
                    throw NumericalError("instability: junction phase rate exceeds limit at t = " +
                                         std::to_string(t1) + " s");
                }
            }
        }
        if (step > settle_steps) {
            const double vin = v[ref_u];
            const double vout = v[far_u];
            res.v_in.push_back(vin);
            res.i_in.push_back(port_source(t1, ref_port) - g_ref * vin);
            res.v_out.push_back(vout);
            res.i_out.push_back(net.conductance[far_u] * vout - port_source(t1, far_port));
        }
    }
    if (cfg.keep_final_state) {
        for (int node = 0; node <= net.cells; ++node)
            res.final_flux.push_back(phi[static_cast<std::size_t>(net.node_index[static_cast<std::size_t>(node)])]);
        for (int j = 0; j < net.cells; ++j)
            res.final_junction_phase.push_back((res.final_flux[static_cast<std::size_t>(j)] -
                                                res.final_flux[static_cast<std::size_t>(j + 1)]) / phi0);
    }
    return res;
}

}  // namespace twpac::transient

namespace twpac::transient {

cplx fourier_coefficient(const std::vector<double>& x, double dt, double omega) {
    const auto m = x.size();
    if (m == 0) throw DomainError("empty waveform");
    const double window = dt * static_cast<double>(m);
    const double cycles = omega * window / two_pi;
    if (std::abs(cycles - std::round(cycles)) > 1e-6) {
        throw DomainError("frequency " + std::to_string(omega / two_pi / 1e9) +
                          " GHz is not on the analysis-window grid; use a commensurate window");
    }
    // Rectangular window over an integer number of periods: exact bin, no leakage.
    cplx acc = 0.0;
    const cplx step = std::polar(1.0, -omega * dt);
    cplx e = 1.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (k % 1024 == 0) e = std::polar(1.0, -omega * dt * static_cast<double>(k));
        acc += x[k] * e;
        e *= step;
    }
    return 2.0 * acc / static_cast<double>(m);
}

cplx extract_s21(const TransientResult& r, double omega, double z0) {
    const cplx vin = fourier_coefficient(r.v_in, r.time_step, omega);
    const cplx iin = fourier_coefficient(r.i_in, r.time_step, omega);
    const cplx vout = fourier_coefficient(r.v_out, r.time_step, omega);
    const cplx iout = fourier_coefficient(r.i_out, r.time_step, omega);
    const cplx den = vin + z0 * iin;
    if (std::abs(den) == 0.0) throw NumericalError("no incident wave at the analysis frequency");
    return (vout + z0 * iout) / den;
}

Spectrum output_spectrum(const TransientResult& r, double f_max_hz) {
    const int m = static_cast<int>(r.v_out.size());
    if (m == 0) throw DomainError("empty waveform");
    std::vector<double> b(static_cast<std::size_t>(m));
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = 0.5 * (r.v_out[k] + r.termination * r.i_out[k]);
    const int nc = m / 2 + 1;
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(nc)));
    fftw_plan plan = fftw_plan_dft_r2c_1d(m, b.data(), out, FFTW_ESTIMATE);
    fftw_execute(plan);
    Spectrum s;
    s.frequency_step = 1.0 / r.window_length();
    for (int k = 1; k < nc; ++k) {
        const double f = k * s.frequency_step;
        if (f_max_hz > 0.0 && f > f_max_hz) break;
        const double amp = 2.0 * std::hypot(out[k][0], out[k][1]) / m;
        const double p = amp * amp / (2.0 * r.termination);
        s.frequency.push_back(f);
        s.power_dbm.push_back(p > 0.0 ? 10.0 * std::log10(p) + 30.0 : -400.0);
    }
    fftw_destroy_plan(plan);
    fftw_free(out);
    return s;
}

std::vector<Peak> annotate_peaks(const Spectrum& spectrum,
                                 const std::vector<std::pair<std::string, double>>& tones) {
    std::vector<Peak> peaks;
    for (const auto& [label, f] : tones) {
        const auto k = static_cast<long>(std::llround(f / spectrum.frequency_step)) - 1;
        if (k < 0 || k >= static_cast<long>(spectrum.frequency.size())) continue;
        peaks.push_back({label, spectrum.frequency[static_cast<std::size_t>(k)],
                         spectrum.power_dbm[static_cast<std::size_t>(k)]});
    }
    return peaks;
}

}  // namespace twpac::transient

namespace twpac::transient {

namespace {

/// Largest frequency (Hz, on a 1 kHz lattice) dividing every tone.
double common_resolution(const std::vector<double>& tones_hz) {
    std::int64_t g = 0;
    for (double f : tones_hz) {
        const auto k = static_cast<std::int64_t>(std::llround(f / 1e3));
        if (std::abs(f - static_cast<double>(k) * 1e3) > 1e-3) {
            throw DomainError("tone frequencies must lie on a 1 kHz lattice for a commensurate window");
        }
        g = std::gcd(g, k);
    }
    return static_cast<double>(g) * 1e3;
}

}  // namespace

TransientConfig make_config(const device::DeviceSpec& device, const device::CellProfile& profile,
                            const TransientDrive& drive, double signal_omega, Response response,
                            bool signal_at_output) {
    const double z0 = device.environment_impedance;
    const double vp = device::phase_velocity(device, profile);
    const double transit = static_cast<double>(profile.size()) / vp;

    std::vector<double> tones{signal_omega / two_pi};
    if (drive.pa_enabled) tones.push_back(drive.pa_omega / two_pi);
    if (drive.fc_enabled) tones.push_back(drive.fc_omega / two_pi);
    const double f_max = *std::max_element(tones.begin(), tones.end());
    double df = drive.frequency_resolution;
    if (df <= 0.0) {
        df = common_resolution(tones);
    } else {
        for (double f : tones) {
            const double c = f / df;
            if (std::abs(c - std::round(c)) > 1e-6) throw DomainError("resolution does not divide every tone");
        }
    }
    const double window = 1.0 / df;
    if (window > 2e-6) throw DomainError("analysis window above 2 us; choose tones on a coarser common grid");
    const auto m = static_cast<long>(std::ceil(window * f_max * drive.samples_per_period - 1e-9));
    const double h = window / static_cast<double>(m);
    const double ramp = drive.ramp_transits * transit;
    double settle = std::max(drive.settle_periods * two_pi / signal_omega, drive.settle_transits * transit);
    settle = std::max(settle, ramp + 2.0 * transit);
    const long s = static_cast<long>(std::ceil(settle / h));

    TransientConfig cfg;
    cfg.time_step = h;
    cfg.settle = static_cast<double>(s) * h;
    cfg.duration = static_cast<double>(s + m) * h;
    cfg.ramp = ramp;
    cfg.dc_bias = drive.dc_bias;
    const bool fwd = response == Response::forward;
    if (drive.pa_enabled) {
        cfg.drives.push_back({fwd ? Port::input : Port::output, drive.pa_omega,
                              2.0 * cme::power_to_current(drive.pa_power_dbm, z0), 0.0, "pa"});
    }
    if (drive.fc_enabled) {
        cfg.drives.push_back({fwd ? Port::output : Port::input, drive.fc_omega,
                              2.0 * cme::power_to_current(drive.fc_power_dbm, z0), 0.0, "fc"});
    }
    const Port sig = signal_at_output ? Port::output : Port::input;
    cfg.drives.push_back({sig, signal_omega, drive.signal_amplitude, 0.0, "signal"});
    cfg.reference_port = sig;
    return cfg;
}

cplx run_point(const Network& network, const TransientConfig& config, double signal_omega,
               bool signal_at_output) {
    TransientConfig c = config;
    c.reference_port = signal_at_output ? Port::output : Port::input;
    const auto r = integrate_transient(network, c);
    return extract_s21(r, signal_omega, network.termination);
}

std::vector<SweepPoint> sweep_transient(const device::DeviceSpec& device, const device::CellProfile& profile,
                                        const TransientDrive& drive, const std::vector<double>& signal_omegas,
                                        bool both_directions, int workers) {
    const Network net = build_network(device, profile);
    std::vector<SweepPoint> out(signal_omegas.size());
    const std::size_t jobs = signal_omegas.size() * (both_directions ? 2 : 1);
    std::vector<std::string> errors(jobs);
    std::vector<cplx> values(jobs);
    parallel_for(jobs, workers, [&](std::size_t k) {
        const std::size_t p = k / (both_directions ? 2 : 1);
        const Response resp = (both_directions && k % 2 == 1) ? Response::backward : Response::forward;
        try {
            const auto cfg = make_config(device, profile, drive, signal_omegas[p], resp);
            values[k] = run_point(net, cfg, signal_omegas[p]);
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    });
    for (std::size_t p = 0; p < out.size(); ++p) {
        auto& pt = out[p];
        pt.omega = signal_omegas[p];
        const std::size_t kf = p * (both_directions ? 2 : 1);
        pt.s21_forward = values[kf];
        if (both_directions) pt.s21_backward = values[kf + 1];
        for (std::size_t k = kf; k < kf + (both_directions ? 2 : 1); ++k) {
            if (!errors[k].empty()) {
                pt.ok = false;
                pt.error += errors[k];
            }
        }
    }
    return out;
}

device::DeviceSpec with_cells(const device::DeviceSpec& device, int cells) {
    const int n0 = device.loading.supercell_length;
    if (cells <= 0 || cells % n0 != 0) {
        throw ConfigError("cell override must be a positive multiple of the supercell length");
    }
    device::DeviceSpec d = device;
    d.supercell_count = cells / n0;
    return d;
}

}  // namespace twpac::transient
