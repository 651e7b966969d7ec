#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "twpac/cme.hpp"
#include "twpac/constants.hpp"
#include "twpac/device.hpp"
#include "twpac/dispersion.hpp"
#include "twpac/errors.hpp"
#include "twpac/transient.hpp"

using namespace twpac;
using namespace twpac::transient;

namespace {

constexpr double kTwoPi = 6.283185307179586;
double w_of(double ghz) { return kTwoPi * ghz * 1e9; }
double db20(cplx z) { return 20.0 * std::log10(std::abs(z)); }

struct Reduced {
    device::DeviceSpec dev;
    device::CellProfile prof;
    Network net;
    explicit Reduced(double bias, int cells = 330) {
        dev = device::reference_device();
        dev.loss_tangent = 0.0;
        dev.bias.dc_current = bias;
        dev = with_cells(dev, cells);
        prof = device::build_cell_array(dev);
        net = build_network(dev, prof);
    }
};

TransientDrive passive(double bias) {
    TransientDrive d;
    d.dc_bias = bias;
    d.pa_enabled = false;
    d.fc_enabled = false;
    return d;
}

cplx s21_at(const Reduced& r, const TransientDrive& d, double f_ghz, bool from_output = false) {
    const double w = w_of(f_ghz);
    return run_point(r.net, make_config(r.dev, r.prof, d, w, Response::forward, from_output), w, from_output);
}

cplx abcd_s21(const Reduced& r, double f_ghz) {
    return dispersion::s21_from_matrix(dispersion::line_matrix(r.dev, r.prof, w_of(f_ghz), 0.0), 50.0);
}

}  // namespace

TEST_CASE("network layout") {
    const Reduced full(1e-6, 2640);
    CHECK(full.net.cells == 2640);
    CHECK(std::count(full.prof.rpm.begin(), full.prof.rpm.end(), 1) == 440);
    CHECK(full.net.unknowns == 2641 + 440);
    CHECK(full.net.input_index == 0);
    CHECK(full.net.output_index == full.net.node_index.back());
    CHECK(full.net.conductance[0] == doctest::Approx(1.0 / 50.0));
    CHECK(full.net.conductance[static_cast<std::size_t>(full.net.output_index)] == doctest::Approx(1.0 / 50.0));
    // Total capacitance to ground is the sum of the shunt capacitors (rpm branches in series).
    int rpm_seen = 0;
    for (int j = 0; j < full.net.cells; ++j) {
        if (full.net.rpm_index[static_cast<std::size_t>(j)] >= 0) ++rpm_seen;
    }
    CHECK(rpm_seen == 440);

    device::CellProfile empty;
    CHECK_THROWS_AS((void)build_network(full.dev, empty), DomainError);
}

TEST_CASE("single cell settles to the biased static phase") {
    auto dev = device::reference_device();
    device::CellProfile one;
    one.ground_capacitance = {32e-15};
    one.rpm = {0};
    const Network net = build_network(dev, one);
    CHECK(net.unknowns == 2);

    TransientConfig cfg;
    cfg.time_step = 1e-12;
    cfg.ramp = 1e-9;
    cfg.duration = 20e-9;
    cfg.settle = 19e-9;
    cfg.dc_bias = 1.5e-6;
    cfg.keep_final_state = true;
    const auto r = integrate_transient(net, cfg);
    REQUIRE(r.final_junction_phase.size() == 1);
    CHECK(r.final_junction_phase[0] == doctest::Approx(std::asin(0.3)).epsilon(1e-4));

    cfg.dc_bias = 0.0;
    const auto z = integrate_transient(net, cfg);
    CHECK(std::abs(z.final_junction_phase[0]) < 1e-12);
}

TEST_CASE("dc ramp: every junction reaches a common static phase") {
    const Reduced r(1e-6);
    TransientConfig cfg;
    cfg.time_step = 4e-12;
    cfg.ramp = 2e-9;
    cfg.duration = 30e-9;
    cfg.settle = 29e-9;
    cfg.dc_bias = 1e-6;
    cfg.keep_final_state = true;
    const auto res = integrate_transient(r.net, cfg);
    REQUIRE(res.final_junction_phase.size() == 330);
    const double target = std::asin(0.2);
    for (double ph : res.final_junction_phase) {
        const double m = std::round((ph - target) / kTwoPi);
        CHECK(std::abs(ph - target - kTwoPi * m) < 1e-3);
    }
}

TEST_CASE("passive passband transmission") {
    const Reduced r(0.0);
    for (double f : {2.0, 4.0, 7.0, 8.0}) {
        const cplx s = s21_at(r, passive(0.0), f);
        CHECK(std::abs(std::abs(s) - 1.0) < 0.01);
        CHECK(std::abs(db20(s) - db20(abcd_s21(r, f))) < 0.05);
    }
}

TEST_CASE("stopband suppression on the full-length line") {
    const Reduced r(1e-6, 2640);
    const cplx s = s21_at(r, passive(1e-6), 5.1);
    CHECK(db20(s) < -20.0);
    CHECK(std::abs(db20(s) - db20(abcd_s21(r, 5.1))) < 1.0);
}

TEST_CASE("reciprocity with pumps off") {
    const Reduced r(1e-6);
    for (double f : {1.0, 3.0, 6.0, 7.0, 8.0}) {
        const cplx s21 = s21_at(r, passive(1e-6), f);
        const cplx s12 = s21_at(r, passive(1e-6), f, true);
        CHECK(std::abs(db20(s21) - db20(s12)) < 0.1);
    }
    const auto sw = sweep_transient(r.dev, r.prof, passive(1e-6), {w_of(6.5)}, true, 1);
    REQUIRE(sw.size() == 1);
    CHECK(std::abs(db20(sw[0].s21_forward) - db20(sw[0].s21_backward)) < 0.1);
}

TEST_CASE("time-step halving") {
    const Reduced r(1e-6);
    TransientDrive fine = passive(1e-6);
    fine.samples_per_period = 256;
    for (double f : {3.0, 7.0, 8.0}) {
        CHECK(std::abs(db20(s21_at(r, passive(1e-6), f)) - db20(s21_at(r, fine, f))) < 0.05);
    }
    // The pumped response converges more slowly than the linear one.
    const Reduced r15(1.5e-6);
    TransientDrive pa;
    pa.dc_bias = 1.5e-6;
    pa.fc_enabled = false;
    pa.pa_omega = w_of(14.5);
    pa.pa_power_dbm = -70.0;
    TransientDrive pa_fine = pa;
    pa_fine.samples_per_period = 256;
    CHECK(std::abs(db20(s21_at(r15, pa, 7.0)) - db20(s21_at(r15, pa_fine, 7.0))) < 0.05);
}

TEST_CASE("small-signal linearity") {
    const Reduced r(1e-6);
    TransientDrive twice = passive(1e-6);
    twice.signal_amplitude = 0.1e-6;
    for (double f : {3.0, 7.0}) {
        CHECK(std::abs(db20(s21_at(r, passive(1e-6), f)) - db20(s21_at(r, twice, f))) < 0.05);
    }
}

TEST_CASE("single PA pump: transient gain follows the CME and favours the forward direction") {
    const double bias = 1.5e-6;
    const Reduced r(bias);
    const auto table = cme::cme_dispersion(r.dev, r.prof);
    TransientDrive drive;
    drive.dc_bias = bias;
    drive.fc_enabled = false;
    drive.pa_omega = w_of(14.5);
    drive.pa_power_dbm = -70.0;

    double fwd_sum = 0.0, bwd_sum = 0.0;
    int n = 0;
    for (double f = 6.0; f <= 8.001; f += 0.25) {
        // omega_a / 2: the transient response is phase sensitive there.
        if (std::abs(f - 7.25) < 1e-9) continue;
        const double w = w_of(f);
        const double fwd = db20(run_point(r.net, make_config(r.dev, r.prof, drive, w, Response::forward), w));
        const double bwd = db20(run_point(r.net, make_config(r.dev, r.prof, drive, w, Response::backward), w));
        cme::DriveConfig dc;
        dc.pa = {drive.pa_omega, drive.pa_power_dbm};
        dc.fc_enabled = false;
        dc.fc = {w_of(3.0), -200.0};
        dc.signal = {w, -133.0};
        const double g = 10.0 * std::log10(cme::signal_gain(cme::integrate(r.dev, table, dc)));
        CAPTURE(f);
        CHECK(g > 1.0);
        CHECK(std::abs(fwd - g) < 2.0);
        fwd_sum += fwd;
        bwd_sum += bwd;
        ++n;
    }
    CHECK(fwd_sum / n > bwd_sum / n + 1.0);
}

TEST_CASE("output spectrum") {
    const double bias = 1.5e-6;
    const Reduced r(bias);
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };

    SUBCASE("pure signal gives one line") {
        TransientDrive d = passive(bias);
        d.frequency_resolution = 1e8;
        const auto res = integrate_transient(r.net, make_config(r.dev, r.prof, d, w_of(7.0), Response::forward));
        const auto s = output_spectrum(res, 20e9);
        CHECK(s.frequency_step == doctest::Approx(1e8).epsilon(1e-9));
        const auto top = std::max_element(s.power_dbm.begin(), s.power_dbm.end());
        CHECK(s.frequency[static_cast<std::size_t>(top - s.power_dbm.begin())] == doctest::Approx(7e9));
        // Launched wave 0.025 uA into 50 ohm.
        CHECK(*top == doctest::Approx(cme::current_to_power_dbm(0.025e-6, 50.0)).epsilon(0.01));
        int above = 0;
        // The 3WM second harmonic sits about 40 dB down.
        for (double p : s.power_dbm) above += p > *top - 35.0;
        CHECK(above == 1);
    }

    SUBCASE("both pumps: the five main tones and growth of intermodulation") {
        TransientDrive d;
        d.dc_bias = bias;
        d.pa_omega = w_of(14.5);
        d.pa_power_dbm = -78.0;
        d.fc_omega = w_of(4.7);
        d.fc_power_dbm = -78.0;
        auto count = [&](double amplitude) {
            d.signal_amplitude = amplitude;
            const auto res = integrate_transient(r.net, make_config(r.dev, r.prof, d, w_of(7.0), Response::forward));
            return output_spectrum(res, 20e9);
        };
        const auto s = count(0.05e-6);
        const double floor = median(s.power_dbm);
        const auto peaks = annotate_peaks(s, {{"c", 4.7e9}, {"c2", 9.4e9}, {"s", 7.0e9}, {"i", 7.5e9}, {"a-2c", 5.1e9}});
        REQUIRE(peaks.size() == 5);
        for (const auto& p : peaks) {
            CAPTURE(p.label);
            CHECK(p.power_dbm > floor + 25.0);
        }
        auto lines = [](const Spectrum& sp, double fl) {
            return std::count_if(sp.power_dbm.begin(), sp.power_dbm.end(), [&](double p) { return p > fl + 20.0; });
        };
        const auto strong = count(2e-6);
        CHECK(lines(strong, median(strong.power_dbm)) > lines(s, floor) + 5);
    }
}

TEST_CASE("Fourier coefficient and S21 extraction") {
    const double dt = 1e-12;
    const double w = w_of(5.0);
    std::vector<double> x(2000);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = 0.7 * std::cos(w * static_cast<double>(k) * dt + 0.3);
    const cplx c = fourier_coefficient(x, dt, w);
    CHECK(std::abs(c) == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(std::arg(c) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(std::abs(fourier_coefficient(x, dt, w_of(6.0))) < 1e-12);
    CHECK_THROWS_AS((void)fourier_coefficient(x, dt, w_of(5.01)), DomainError);
    CHECK_THROWS_AS((void)fourier_coefficient({}, dt, w), DomainError);

    TransientResult r;
    r.time_step = dt;
    r.v_in = x;
    r.i_in = std::vector<double>(x.size(), 0.0);
    r.v_out = x;
    r.i_out = std::vector<double>(x.size(), 0.0);
    for (auto& v : r.v_out) v *= 0.5;
    CHECK(std::abs(extract_s21(r, w, 50.0) - cplx(0.5, 0.0)) < 1e-12);
}

TEST_CASE("configuration invariants") {
    const Reduced r(1e-6);
    TransientDrive d;
    d.dc_bias = 1e-6;
    d.pa_omega = w_of(14.3);
    d.pa_power_dbm = -70.0;
    d.fc_omega = w_of(3.14);
    d.fc_power_dbm = -74.0;
    const double ws = w_of(7.02);
    const auto fwd = make_config(r.dev, r.prof, d, ws, Response::forward);
    const auto bwd = make_config(r.dev, r.prof, d, ws, Response::backward);
    const double window = fwd.duration - fwd.settle;
    for (double f : {14.3e9, 3.14e9, 7.02e9}) {
        const double cycles = window * f;
        CHECK(std::abs(cycles - std::round(cycles)) < 1e-6);
        CHECK(1.0 / (f * fwd.time_step) >= 64.0 - 1e-9);
    }
    const double transit = 330.0 / device::phase_velocity(r.dev, r.prof);
    CHECK(fwd.settle >= 20.0 * kTwoPi / ws - fwd.time_step);
    CHECK(fwd.settle >= 5.0 * transit - fwd.time_step);
    CHECK(fwd.ramp == doctest::Approx(2.0 * transit));

    auto port_of = [](const TransientConfig& c, const std::string& label) {
        for (const auto& s : c.drives)
            if (s.label == label) return s.port;
        FAIL("missing source " << label);
        return Port::input;
    };
    CHECK(port_of(fwd, "pa") == Port::input);
    CHECK(port_of(fwd, "fc") == Port::output);
    CHECK(port_of(bwd, "pa") == Port::output);
    CHECK(port_of(bwd, "fc") == Port::input);
    CHECK(port_of(bwd, "signal") == Port::input);
    for (const auto& s : fwd.drives)
        if (s.label == "signal") CHECK(s.amplitude == doctest::Approx(0.05e-6));
    for (const auto& s : fwd.drives)
        if (s.label == "pa") CHECK(s.amplitude == doctest::Approx(2.0 * cme::power_to_current(-70.0, 50.0)));

    TransientDrive off_grid = d;
    off_grid.pa_omega = kTwoPi * (14.3e9 + 0.5);
    CHECK_THROWS_AS((void)make_config(r.dev, r.prof, off_grid, ws, Response::forward), DomainError);
    TransientDrive bad_res = d;
    bad_res.frequency_resolution = 3e7;
    CHECK_THROWS_AS((void)make_config(r.dev, r.prof, bad_res, ws, Response::forward), DomainError);
}

TEST_CASE("integration errors") {
    const Reduced r(1e-6);
    auto cfg = make_config(r.dev, r.prof, passive(1e-6), w_of(7.0), Response::forward);
    auto bad = cfg;
    bad.newton_max_iterations = 0;
    try {
        (void)integrate_transient(r.net, bad);
        FAIL("expected a Newton failure");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("t = ") != std::string::npos);
    }
    bad = cfg;
    bad.time_step = 0.0;
    CHECK_THROWS_AS((void)integrate_transient(r.net, bad), DomainError);
    bad = cfg;
    bad.settle = bad.duration;
    CHECK_THROWS_AS((void)integrate_transient(r.net, bad), DomainError);
}

TEST_CASE("sweep: single point matches a direct run, failures are recorded") {
    const Reduced r(1e-6);
    const double w = w_of(6.0);
    const auto sw = sweep_transient(r.dev, r.prof, passive(1e-6), {w, kTwoPi * (6.5e9 + 0.5)}, false, 2);
    REQUIRE(sw.size() == 2);
    CHECK(sw[0].ok);
    CHECK(sw[0].s21_forward == s21_at(r, passive(1e-6), 6.0));
    CHECK_FALSE(sw[1].ok);
    CHECK_FALSE(sw[1].error.empty());
}

TEST_CASE("cell override") {
    const auto d = device::reference_device();
    CHECK(with_cells(d, 330).total_cells() == 330);
    CHECK_THROWS_AS((void)with_cells(d, 100), ConfigError);
    CHECK_THROWS_AS((void)with_cells(d, 0), ConfigError);
}
