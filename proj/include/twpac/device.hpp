#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace twpac::device {

/// Josephson junction of the series chain. L_J0 and omega_p are derived.
struct JunctionParams {
    double critical_current = 0.0;      ///< A
    double junction_capacitance = 0.0;  ///< F

    [[nodiscard]] double unbiased_inductance() const;
    [[nodiscard]] double plasma_angular_frequency() const;
    void validate() const;
    bool operator==(const JunctionParams&) const = default;
};

struct BiasPoint {
    double dc_current = 0.0;  ///< A
    bool operator==(const BiasPoint&) const = default;
};

/// Taylor coefficients of the biased junction inductance, dressed at one frequency.
struct NonlinearCoefficients {
    double static_inductance = 0.0;  ///< H
    double first_order = 0.0;        ///< 1/A
    double second_order = 0.0;       ///< 1/A^2
    double evaluation_frequency = 0.0;
};

/// Resonant shunt (L parallel C) placed in series with the ground capacitor of selected cells.
struct RpmParams {
    double inductance = 0.0;   ///< H
    double capacitance = 0.0;  ///< F
    int spacing = 1;           ///< cells between shunts
    int offset = 0;            ///< shunt at indices x with x % spacing == offset
    bool operator==(const RpmParams&) const = default;
};

struct LoadingProfile {
    double mean_impedance = 50.0;
    double fundamental_depth = 0.0;
    double second_harmonic_depth = 0.0;
    int supercell_length = 1;
    bool operator==(const LoadingProfile&) const = default;
};

struct DeviceSpec {
    JunctionParams junction;
    RpmParams rpm;
    bool rpm_enabled = true;
    LoadingProfile loading;
    int supercell_count = 1;
    double loss_tangent = 0.0;
    double environment_impedance = 50.0;
    BiasPoint bias;
    /// Bias and angular frequency at which the ground-capacitance profile was inverted.
    /// The capacitors are fabricated once, so they do not follow the operating bias.
    BiasPoint design_bias;
    double design_frequency = 0.0;

    [[nodiscard]] int total_cells() const { return supercell_count * loading.supercell_length; }
    [[nodiscard]] bool has_rpm(int x) const;
    void validate() const;

    bool operator==(const DeviceSpec&) const = default;
};

struct CellProfile {
    std::vector<double> ground_capacitance;  ///< F, one per cell
    std::vector<std::uint8_t> rpm;           ///< 1 where an rpm shunt is present

    [[nodiscard]] std::size_t size() const { return ground_capacitance.size(); }
    [[nodiscard]] double mean_capacitance() const;
};

/// L_d = L_J0 / sqrt(1 - (I_d/I_c)^2). Throws DomainError for |I_d| >= I_c.
[[nodiscard]] double static_inductance(const JunctionParams& junction, const BiasPoint& bias);

/// (epsilon, xi) of the undressed expansion around the bias point.
[[nodiscard]] std::pair<double, double> nonlinear_coefficients(const JunctionParams& junction,
                                                               const BiasPoint& bias);

/// Plasma frequency of the biased junction, 1/sqrt(L_d C_J).
[[nodiscard]] double biased_plasma_frequency(const JunctionParams& junction, const BiasPoint& bias);

/// Coefficients of the junction in parallel with C_J seen as one effective inductance at omega.
[[nodiscard]] NonlinearCoefficients dressed_coefficients(const JunctionParams& junction,
                                                         const BiasPoint& bias, double omega);

/// Z_m (1 + delta_c cos(2 pi x/N0) + delta_c2 cos(4 pi x/N0)).
[[nodiscard]] double loading_impedance(const LoadingProfile& loading, double x);

/// Effective inductance of the rpm tank, L/(1 - L C omega^2).
[[nodiscard]] double rpm_effective_inductance(const RpmParams& rpm, double omega);

/// Bare tank resonance 1/sqrt(L C).
[[nodiscard]] double rpm_bare_resonance(const RpmParams& rpm);

/// Pole of the shunt admittance when the tank is loaded by a coupling capacitor Cc.
[[nodiscard]] double rpm_loaded_resonance(const RpmParams& rpm, double coupling_capacitance);

/// Ground capacitor of cell x such that the symmetric cell impedance equals Z_pl(x) at omega_design.
[[nodiscard]] double ground_capacitance(const DeviceSpec& device, int x, double omega_design);

[[nodiscard]] CellProfile build_cell_array(const DeviceSpec& device, double omega_design);
[[nodiscard]] CellProfile build_cell_array(const DeviceSpec& device);

/// Small-signal phase velocity 1/sqrt(L_d <C_c>) in cells per second at the operating bias.
[[nodiscard]] double phase_velocity(const DeviceSpec& device, const CellProfile& profile);

/// Reference design: 40 supercells of 66 cells at 1.5 uA bias.
[[nodiscard]] DeviceSpec reference_device();

}  // namespace twpac::device
