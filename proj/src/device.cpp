#include "twpac/device.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "twpac/constants.hpp"
#include "twpac/errors.hpp"

namespace twpac::device {

namespace {

void check_bias(const JunctionParams& j, const BiasPoint& b) {
    if (!(std::abs(b.dc_current) < j.critical_current)) {
        throw DomainError("dc bias " + std::to_string(b.dc_current) +
                          " A is not below the critical current " +
                          std::to_string(j.critical_current) + " A");
    }
}

}  // namespace

double JunctionParams::unbiased_inductance() const { return constants::phi0 / critical_current; }

double JunctionParams::plasma_angular_frequency() const {
    return 1.0 / std::sqrt(unbiased_inductance() * junction_capacitance);
}

void JunctionParams::validate() const {
    if (!(critical_current > 0.0)) throw ConfigError("critical_current must be > 0");
    if (!(junction_capacitance > 0.0)) throw ConfigError("junction_capacitance must be > 0");
}

bool DeviceSpec::has_rpm(int x) const {
    if (!rpm_enabled) return false;
    const int n0 = loading.supercell_length;
    const int local = ((x % n0) + n0) % n0;
    return local % rpm.spacing == rpm.offset;
}

void DeviceSpec::validate() const {
    junction.validate();
    if (rpm_enabled) {
        if (!(rpm.inductance > 0.0)) throw ConfigError("rpm.L must be > 0");
        if (!(rpm.capacitance > 0.0)) throw ConfigError("rpm.C must be > 0");
        if (rpm.spacing <= 0) throw ConfigError("rpm.spacing must be > 0");
        if (loading.supercell_length % rpm.spacing != 0)
            throw ConfigError("rpm.spacing must divide loading.supercell_cells");
        if (rpm.offset < 0 || rpm.offset >= rpm.spacing)
            throw ConfigError("rpm.offset must lie in [0, spacing)");
    }
    if (loading.supercell_length <= 0) throw ConfigError("loading.supercell_cells must be > 0");
    if (!(loading.mean_impedance > 0.0)) throw ConfigError("loading.Zm_ohm must be > 0");
    if (!(std::abs(loading.fundamental_depth) + std::abs(loading.second_harmonic_depth) < 1.0))
        throw ConfigError("|loading.delta_c| + |loading.delta_c2| must be < 1");
    if (supercell_count < 0) throw ConfigError("supercell_count must be >= 0");
    if (!(loss_tangent >= 0.0)) throw ConfigError("loss_tangent must be >= 0");
    if (!(environment_impedance > 0.0)) throw ConfigError("environment_impedance_ohm must be > 0");
    if (!(std::abs(bias.dc_current) < junction.critical_current))
        throw ConfigError("|bias_uA| must be below critical_current_uA");
    if (!(std::abs(design_bias.dc_current) < junction.critical_current))
        throw ConfigError("|design.bias_uA| must be below critical_current_uA");
    if (!(design_frequency >= 0.0)) throw ConfigError("design.frequency_GHz must be >= 0");
}

double CellProfile::mean_capacitance() const {
    if (ground_capacitance.empty()) return 0.0;
    return std::accumulate(ground_capacitance.begin(), ground_capacitance.end(), 0.0) /
           static_cast<double>(ground_capacitance.size());
}

double static_inductance(const JunctionParams& junction, const BiasPoint& bias) {
    check_bias(junction, bias);
    const double r = bias.dc_current / junction.critical_current;
    if (r == 0.0) return junction.unbiased_inductance();
    return junction.unbiased_inductance() / std::sqrt(1.0 - r * r);
}

std::pair<double, double> nonlinear_coefficients(const JunctionParams& junction,
                                                 const BiasPoint& bias) {
    check_bias(junction, bias);
    const double ic2 = junction.critical_current * junction.critical_current;
    const double id = bias.dc_current;
    const double den = ic2 - id * id;
    const double eps = id / den;
    const double xi = (ic2 + 2.0 * id * id) / (2.0 * den * den);
    return {eps, xi};
}

double biased_plasma_frequency(const JunctionParams& junction, const BiasPoint& bias) {
    return 1.0 / std::sqrt(static_inductance(junction, bias) * junction.junction_capacitance);
}

NonlinearCoefficients dressed_coefficients(const JunctionParams& junction, const BiasPoint& bias,
                                           double omega) {
    const double ld = static_inductance(junction, bias);
    const auto [eps, xi] = nonlinear_coefficients(junction, bias);
    const double wp = junction.plasma_angular_frequency();
    const double a = (omega / wp) * (omega / wp);
    if (!(a < 1.0)) {
        throw DomainError("frequency at or above the junction plasma resonance");
    }
    NonlinearCoefficients c;
    c.static_inductance = ld / (1.0 - a);
    c.first_order = eps / (1.0 - a);
    c.second_order = (xi + (eps * eps - xi) * a) / ((1.0 - a) * (1.0 - a));
    c.evaluation_frequency = omega;
    return c;
}

double loading_impedance(const LoadingProfile& loading, double x) {
    const double n0 = loading.supercell_length;
    // Reduce first so cells one supercell apart get bit-identical values.
    const double th = constants::two_pi * std::fmod(x, n0) / n0;
    return loading.mean_impedance *
           (1.0 + loading.fundamental_depth * std::cos(th) +
            loading.second_harmonic_depth * std::cos(2.0 * th));
}

double rpm_effective_inductance(const RpmParams& rpm, double omega) {
    const double den = 1.0 - rpm.inductance * rpm.capacitance * omega * omega;
    if (std::abs(den) < 1e-9) throw NumericalError("frequency sits on the rpm tank resonance");
    return rpm.inductance / den;
}

double rpm_bare_resonance(const RpmParams& rpm) {
    return 1.0 / std::sqrt(rpm.inductance * rpm.capacitance);
}

double rpm_loaded_resonance(const RpmParams& rpm, double coupling_capacitance) {
    return 1.0 / std::sqrt(rpm.inductance * (rpm.capacitance + coupling_capacitance));
}

double ground_capacitance(const DeviceSpec& device, int x, double omega_design) {
    // Exact inversion of sqrt(B/C) for the symmetric cell L/2 - Y - L/2 where
    // B/C = L/C_c - w^2 L Lrpm - w^2 L^2/4, with the series inductance taken at the
    // design bias.
    const double l = static_inductance(device.junction, device.design_bias);
    const double z = loading_impedance(device.loading, x);
    const double w2 = omega_design * omega_design;
    const double lr = device.has_rpm(x) ? rpm_effective_inductance(device.rpm, omega_design) : 0.0;
    const double den = z * z + w2 * l * (lr + 0.25 * l);
    if (!(den > 0.0)) {
        throw NumericalError("ground capacitance inversion has no positive solution at cell " +
                             std::to_string(x));
    }
    return l / den;
}

CellProfile build_cell_array(const DeviceSpec& device, double omega_design) {
    const int n0 = device.loading.supercell_length;
    const int n = device.total_cells();
    std::vector<double> period(static_cast<std::size_t>(n0));
    for (int x = 0; x < n0; ++x) period[static_cast<std::size_t>(x)] = ground_capacitance(device, x, omega_design);
    CellProfile p;
    p.ground_capacitance.resize(static_cast<std::size_t>(n));
    p.rpm.resize(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) {
        p.ground_capacitance[static_cast<std::size_t>(x)] = period[static_cast<std::size_t>(x % n0)];
        p.rpm[static_cast<std::size_t>(x)] = device.has_rpm(x) ? 1 : 0;
    }
    return p;
}

CellProfile build_cell_array(const DeviceSpec& device) {
    return build_cell_array(device, device.design_frequency);
}

double phase_velocity(const DeviceSpec& device, const CellProfile& profile) {
    const double ld = static_inductance(device.junction, device.bias);
    return 1.0 / std::sqrt(ld * profile.mean_capacitance());
}

DeviceSpec reference_device() {
    DeviceSpec d;
    d.junction = {5e-6, 240.5e-15};
    d.rpm = {230e-12, 557e-15, 6, 0};
    d.rpm_enabled = true;
    d.loading = {47.0, 0.1, 0.12, 66};
    d.supercell_count = 40;
    d.loss_tangent = 4e-4;
    d.environment_impedance = 50.0;
    d.bias = {1.5e-6};
    d.design_bias = {1.5e-6};
    d.design_frequency = constants::two_pi * 7.25e9;
    return d;
}

}  // namespace twpac::device
