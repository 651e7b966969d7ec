#pragma once

#include <complex>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "twpac/device.hpp"

namespace twpac::dispersion {

using cplx = std::complex<double>;

/// ABCD matrix of a two-port.
struct TwoPortMatrix {
    cplx A{1.0}, B{0.0}, C{0.0}, D{1.0};

    [[nodiscard]] static TwoPortMatrix identity() { return {}; }
    [[nodiscard]] cplx determinant() const { return A * D - B * C; }
    [[nodiscard]] TwoPortMatrix inverse() const;
    friend TwoPortMatrix operator*(const TwoPortMatrix& l, const TwoPortMatrix& r);
};

/// Everything a single cell needs for its two-port matrix.
struct UnitCell {
    device::JunctionParams junction;
    double ground_capacitance = 0.0;
    bool has_rpm = false;
    device::RpmParams rpm;
};

struct DispersionPoint {
    double omega = 0.0;
    double k = 0.0;       ///< unwrapped Bloch wavenumber, rad/cell
    double k_star = 0.0;  ///< k - omega/v_p
    cplx impedance;       ///< sqrt(B/C), Re >= 0
    cplx s21;
    double attenuation = 0.0;  ///< Np/cell
};

struct Stopband {
    double omega_lo = 0.0;
    double omega_hi = 0.0;
    [[nodiscard]] double center() const { return 0.5 * (omega_lo + omega_hi); }
};

struct DispersionTable {
    std::vector<DispersionPoint> points;
    std::vector<Stopband> stopbands;
    double phase_velocity = 0.0;  ///< cells/s used for k_star
    int cells = 0;

    /// Linear interpolation of k + i alpha at omega. Throws DomainError outside the grid.
    [[nodiscard]] cplx complex_wavenumber(double omega) const;
    [[nodiscard]] cplx impedance(double omega) const;
    [[nodiscard]] double s21_db(double omega) const;
};

struct DispersionOptions {
    double f_min = 0.02e9;  ///< Hz
    double f_max = 16e9;
    double f_step = 10e6;
    double threshold_db = -10.0;
    /// Sub-threshold fragments closer than this (Hz) are merged into one stopband.
    double merge_gap = 100e6;
    /// Maximum number of bisections when a grid step advances the supercell phase by more than pi/2.
    int max_refine = 8;
};

/// C (1 - i tan delta).
[[nodiscard]] cplx lossy_capacitance(double capacitance, double loss_tangent);

/// Shunt admittance of a cell: C_c alone, or C_c in series with the rpm tank.
[[nodiscard]] cplx shunt_admittance(const UnitCell& cell, double omega, double loss_tangent);

/// Symmetric cell L/2 - Y - L/2 with L the dressed series inductance at omega.
[[nodiscard]] TwoPortMatrix unit_cell_matrix(const UnitCell& cell, double omega,
                                             const device::BiasPoint& bias, double loss_tangent);

[[nodiscard]] TwoPortMatrix cascade(std::span<const TwoPortMatrix> matrices);
[[nodiscard]] TwoPortMatrix matrix_power(TwoPortMatrix m, int n);

[[nodiscard]] cplx s21_from_matrix(const TwoPortMatrix& m, double z0);
[[nodiscard]] cplx s11_from_matrix(const TwoPortMatrix& m, double z0);

/// Principal arccosh((A+D)/2) with Re >= 0.
[[nodiscard]] cplx bloch_exponent(const TwoPortMatrix& m);

/// Single-point wavenumber Im(arccosh((A+D)/2))/N in [0, pi/N]; no unwrapping.
[[nodiscard]] double wavenumber(const TwoPortMatrix& m, int cells);

/// sqrt(B/C) with Re >= 0. Throws NumericalError when C == 0.
[[nodiscard]] cplx characteristic_impedance(const TwoPortMatrix& m);

/// alpha = G Z / 2.
[[nodiscard]] double attenuation_constant(double shunt_conductance, double impedance);

[[nodiscard]] UnitCell cell_at(const device::DeviceSpec& device, const device::CellProfile& profile,
                               int x);

/// Product of the first supercell_length cells.
[[nodiscard]] TwoPortMatrix supercell_matrix(const device::DeviceSpec& device,
                                             const device::CellProfile& profile, double omega,
                                             double loss_tangent);

/// Full cascade of all N cells (supercell matrix raised to supercell_count).
[[nodiscard]] TwoPortMatrix line_matrix(const device::DeviceSpec& device,
                                        const device::CellProfile& profile, double omega,
                                        double loss_tangent);

/// Bloch exponent of one supercell with the branch chosen so that Re >= 0 for a
/// passive line; for a lossless line the branch follows a vanishing-loss limit.
[[nodiscard]] cplx supercell_exponent(const device::DeviceSpec& device,
                                      const device::CellProfile& profile, double omega,
                                      double loss_tangent);

/// 2 pi unwrap of a sequence of phases. Standalone helper for sweeps.
[[nodiscard]] std::vector<double> unwrap(std::span<const double> phases);

[[nodiscard]] std::vector<Stopband> find_stopbands(const DispersionTable& table, double threshold_db,
                                                   double merge_gap_omega = 0.0);

/// Full sweep for the device at its operating bias and loss tangent.
[[nodiscard]] DispersionTable compute_table(const device::DeviceSpec& device,
                                            const device::CellProfile& profile,
                                            const DispersionOptions& options = {});

/// Frequency grid f_min, f_min + step, ... <= f_max (Hz).
[[nodiscard]] std::vector<double> frequency_grid(double f_min, double f_max, double f_step);

}  // namespace twpac::dispersion
