#pragma once

#include <array>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twpac/device.hpp"
#include "twpac/dispersion.hpp"

namespace twpac::cme {

using cplx = std::complex<double>;

enum class Mode : int { a = 0, s, i, c, d, u, c2 };
inline constexpr int kModes = 7;
using State = std::array<cplx, kModes>;

[[nodiscard]] std::string_view mode_name(Mode m);
[[nodiscard]] constexpr int idx(Mode m) { return static_cast<int>(m); }

enum class Direction { forward, backward };

/// Angular frequencies of all seven modes from the three inputs. Throws DomainError if
/// the down-converted frequency is not positive.
[[nodiscard]] std::array<double, kModes> mode_frequencies(double omega_a, double omega_c,
                                                          double omega_s);

struct ReflectionFactors {
    double gamma = 0.0;
    cplx gamma_complex{0.0};  ///< equals gamma unless the complex convention is selected
    cplx t{1.0};
    cplx gamma_tilde{0.0};
};

/// Gamma = |Z - Z0| / |Z + Z0|, t = 1/(1 - Gamma e^{2ikN}), Gamma~ = Gamma e^{ikN}.
/// With complex_gamma the reflection keeps its phase, Gamma = (Z - Z0)/(Z + Z0).
[[nodiscard]] ReflectionFactors reflection_factors(cplx z, double z0, cplx k, int cells,
                                                   bool complex_gamma = false);

/// Traveling-wave current amplitude for P = |I|^2 Z0 / 2.
[[nodiscard]] double power_to_current(double p_dbm, double z0);
[[nodiscard]] double current_to_power_dbm(double amplitude, double z0);

struct ModeData {
    double omega = 0.0;
    double beta = 0.0;   ///< rad/cell
    double alpha = 0.0;  ///< Np/cell
    cplx impedance{50.0};
    ReflectionFactors refl;
    double eps = 0.0;  ///< dressed first-order coefficient at omega
    double xi = 0.0;   ///< dressed second-order coefficient at omega
    int sign = 1;      ///< +1 travels toward x = N, -1 toward x = 0
};

struct ModeEnvironment {
    std::array<ModeData, kModes> modes;
    int cells = 0;
    [[nodiscard]] const ModeData& operator[](Mode m) const { return modes[static_cast<std::size_t>(idx(m))]; }
    [[nodiscard]] ModeData& operator[](Mode m) { return modes[static_cast<std::size_t>(idx(m))]; }
};

struct Tone {
    double omega = 0.0;
    double power_dbm = -200.0;
};

struct DriveConfig {
    Tone pa;
    Tone fc;
    bool fc_enabled = true;
    bool pa_enabled = true;
    Tone signal{0.0, -133.0};
    Direction direction = Direction::forward;
    /// Signal input phase, rad.
    double signal_phase = 0.0;
};

/// Non-fatal problems with a drive, e.g. a signal too strong for the small-signal picture.
[[nodiscard]] std::vector<std::string> drive_warnings(const DriveConfig& drive);

struct CmeOptions {
    bool include_4wm = true;
    bool include_reflections = true;
    bool complex_gamma = false;
    double relative_tolerance = 1e-9;
    double absolute_tolerance = 1e-15;
    /// Output sampling interval in cells; 0 keeps only the two end points.
    int sample_every = 1;
    /// Backward-traveling pumps start from I0 e^{-alpha N} so that their amplitude at the
    /// physical input port x = N equals the requested chip-input power.
    bool backward_pump_loss_compensation = true;
};

struct Factor {
    Mode mode;
    bool conj = false;
};

/// One product on the right-hand side of the equation for `target`.
struct Term {
    Mode target;
    int order;  ///< 3 or 4 (number of mixing waves)
    double weight;
    std::array<Factor, 3> factors;  ///< order-1 entries used
};

/// All 3WM and 4WM products in the seven-mode basis.
[[nodiscard]] std::span<const Term> term_table();

/// Orientation of each mode for a response direction.
[[nodiscard]] std::array<int, kModes> propagation_signs(Direction direction);

/// (e^{i s k x} + G~ e^{-i s k x}) for the mode, conjugated if requested.
[[nodiscard]] cplx mode_wave(const ModeData& m, bool conj, double x);
/// (e^{i s k x} - G~ e^{-i s k x}) for the generated mode.
[[nodiscard]] cplx mode_denominator(const ModeData& m, double x);

/// Mismatch and reflection factor of a 3WM product (m, n) generating p.
[[nodiscard]] cplx phase_factor_3wm(Factor m, Factor n, Mode p, const ModeEnvironment& env, double x);
/// Mismatch and reflection factor of a 4WM product (m, n, q) generating p.
[[nodiscard]] cplx phase_factor_4wm(Factor m, Factor n, Factor q, Mode p, const ModeEnvironment& env,
                                    double x);

/// Right-hand side of the seven coupled-mode equations.
void cme_rhs(double x, const State& amplitudes, State& derivative, const ModeEnvironment& env,
             const CmeOptions& options);

/// Environment for one drive at the device's operating bias.
[[nodiscard]] ModeEnvironment build_environment(const device::DeviceSpec& device,
                                                const dispersion::DispersionTable& table,
                                                const DriveConfig& drive, const CmeOptions& options);

[[nodiscard]] State initial_conditions(const ModeEnvironment& env, const DriveConfig& drive,
                                       double z0, const CmeOptions& options);

struct CmeSolution {
    std::vector<double> x;
    std::vector<State> amplitudes;
    State initial{};
    ModeEnvironment env;
    DriveConfig drive;
    CmeOptions options;
    bool degenerate = false;  ///< omega_s == omega_a / 2
    std::size_t steps = 0;
    [[nodiscard]] const State& final_state() const { return amplitudes.back(); }
};

/// Integrate with the prepared environment.
[[nodiscard]] CmeSolution integrate(const ModeEnvironment& env, const DriveConfig& drive,
                                    const CmeOptions& options, double z0);

/// Integrate from scratch: builds the environment from the dispersion table.
[[nodiscard]] CmeSolution integrate(const device::DeviceSpec& device,
                                    const dispersion::DispersionTable& table,
                                    const DriveConfig& drive, const CmeOptions& options = {});

/// G_s = |I_s(N)/I_s(0)|^2 T_s, T_s = (1 - Gamma_s^2)^2 |t_s|^2.
[[nodiscard]] double signal_gain(const CmeSolution& solution);
[[nodiscard]] double transmission_coefficient(const ModeData& m);

struct SpectrumPoint {
    double omega = 0.0;
    double gain_db = 0.0;
    std::array<double, kModes> terminal_power_dbm{};  ///< |t I(N)|^2 Z0 / 2 at x = N
    bool ok = true;
    bool skipped = false;
    bool degenerate = false;
    std::string error;
};

struct SpectrumResult {
    Direction direction = Direction::forward;
    std::vector<SpectrumPoint> points;
};

/// Dispersion table sized for every mode the drive can generate up to omega_max_signal.
[[nodiscard]] dispersion::DispersionTable cme_dispersion(const device::DeviceSpec& device,
                                                         const device::CellProfile& profile,
                                                         double f_max_hz = 20e9,
                                                         double f_step_hz = 5e6);

/// Gain versus signal frequency. Point failures are recorded and the sweep continues.
[[nodiscard]] SpectrumResult sweep_spectrum(const device::DeviceSpec& device,
                                            const dispersion::DispersionTable& table,
                                            const DriveConfig& drive_template,
                                            std::span<const double> signal_omegas,
                                            Direction direction, const CmeOptions& options = {},
                                            int workers = 1);

}  // namespace twpac::cme
