#pragma once

#include <vector>

#include "twpac/device.hpp"
#include "twpac/dispersion.hpp"

namespace twpac::phasematch {

enum class Process { pa, fc_down, fc_up };

/// Device and dispersion the mismatch is evaluated on.
struct Context {
    const device::DeviceSpec& device;
    const dispersion::DispersionTable& table;
    bool include_reflections = true;
};

struct MismatchCurve {
    Process process = Process::pa;
    double pump_omega = 0.0;
    double pump_amplitude = 0.0;
    std::vector<double> signal_omega;
    std::vector<double> delta_beta;  ///< rad/cell
};

/// Self-phase-modulation factor chi = xi~(omega_pump) |I0|^2 / 8.
[[nodiscard]] double kerr_factor(const Context& ctx, double omega_pump, double amplitude);

/// k_a - k_s - k_i + chi_a (1 + Gamma_a^2)(k_a - 2k_s - 2k_i).
[[nodiscard]] double pa_mismatch(const Context& ctx, double omega_s, double omega_a, double amplitude);
/// k_c + k_d - k_s + chi_c (1 + Gamma_c^2)(k_c + 2k_d - 2k_s).
[[nodiscard]] double fc_mismatch(const Context& ctx, double omega_s, double omega_c, double amplitude);
/// Linear k_s + k_c - k_u.
[[nodiscard]] double up_conversion_mismatch(const Context& ctx, double omega_s, double omega_c);

[[nodiscard]] MismatchCurve mismatch_curve(const Context& ctx, Process process, double pump_omega,
                                           double amplitude, const std::vector<double>& signal_omegas);

struct PumpPlacement {
    Process process = Process::pa;
    double pump_omega = 0.0;
    double signal_omega = 0.0;
    double partner_omega = 0.0;  ///< idler, down- or up-converted mode
    double residual = 0.0;       ///< mismatch at the returned root
    bool degenerate = false;     ///< mismatch vanishes identically over the scan
    std::vector<double> roots;   ///< every bracketed root in the scan, ascending
};

struct PlacementOptions {
    double scan_min = 0.0;  ///< angular frequency; 0 selects a default range for the process
    double scan_max = 0.0;
    double scan_step = 0.0;   ///< default 10 MHz
    double tolerance = 0.0;   ///< default 1 MHz
    /// Preferred pump frequency when several roots exist; 0 returns the first root.
    double hint = 0.0;
};

/// Pump frequency satisfying the mismatch condition. For pa, target is the signal-idler
/// detuning omega_s - omega_i; for fc_down and fc_up it is the signal frequency.
[[nodiscard]] PumpPlacement solve_pump_placement(const Context& ctx, Process process, double target,
                                                 double amplitude, const PlacementOptions& options = {});

}  // namespace twpac::phasematch
