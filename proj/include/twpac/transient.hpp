#pragma once

#include <complex>
#include <string>
#include <vector>

#include "twpac/device.hpp"

namespace twpac::transient {

using cplx = std::complex<double>;

enum class Port { input, output };

/// Sinusoidal Norton current source in parallel with a port termination.
struct Source {
    Port port = Port::input;
    double omega = 0.0;
    double amplitude = 0.0;  ///< A, source current (twice the launched wave current)
    double phase = 0.0;
    std::string label;
};

/// Ladder network: node fluxes ordered so that the nodal matrices have bandwidth 2.
struct Network {
    int cells = 0;
    int unknowns = 0;
    std::vector<int> node_index;        ///< main node n = 0..cells -> unknown index
    std::vector<int> rpm_index;         ///< per cell: internal rpm node index, or -1
    std::vector<double> mass_band;      ///< lower band storage of the capacitance matrix, 3 per column
    std::vector<double> conductance;    ///< diagonal, 1/Z0 at the two ports
    double critical_current = 0.0;
    double rpm_inductance = 0.0;
    double termination = 50.0;
    int input_index = 0;
    int output_index = 0;
};

struct TransientConfig {
    double time_step = 0.0;   ///< s
    double duration = 0.0;    ///< s, including the settle window
    double settle = 0.0;      ///< s, discarded before analysis
    double ramp = 0.0;        ///< raised-cosine turn-on of all sources and the bias
    double dc_bias = 0.0;     ///< A, injected at the input node and extracted at the output node
    std::vector<Source> drives;
    /// Port whose waveforms are reported as v_in / i_in; the other one is the far port.
    Port reference_port = Port::input;
    double newton_tolerance = 1e-12;
    int newton_max_iterations = 30;
    /// Record every node flux at the end of the run (for static checks).
    bool keep_final_state = false;
};

struct TransientResult {
    double time_step = 0.0;
    double window_start = 0.0;
    std::vector<double> v_in, i_in, v_out, i_out;  ///< analysis window samples
    std::vector<double> final_flux;                ///< node fluxes by main node, if requested
    std::vector<double> final_junction_phase;      ///< per junction, if requested
    double termination = 50.0;
    [[nodiscard]] double window_length() const { return time_step * static_cast<double>(v_in.size()); }
};

struct Spectrum {
    double frequency_step = 0.0;          ///< Hz
    std::vector<double> frequency;        ///< Hz
    std::vector<double> power_dbm;        ///< output wave power into Z0
};

/// Nodal model of the line with C_c shunts, rpm tanks through internal nodes and Z0 ports.
[[nodiscard]] Network build_network(const device::DeviceSpec& device, const device::CellProfile& profile);

[[nodiscard]] TransientResult integrate_transient(const Network& network, const TransientConfig& config);

/// Fourier coefficient of samples at omega over the whole window; throws if not commensurate.
[[nodiscard]] cplx fourier_coefficient(const std::vector<double>& x, double dt, double omega);

/// (V_out + Z0 I_out)/(V_in + Z0 I_in) at omega.
[[nodiscard]] cplx extract_s21(const TransientResult& result, double omega, double z0);

[[nodiscard]] Spectrum output_spectrum(const TransientResult& result, double f_max_hz = 0.0);

struct Peak {
    std::string label;
    double frequency = 0.0;
    double power_dbm = 0.0;
};

/// Power at the listed tones (nearest bin).
[[nodiscard]] std::vector<Peak> annotate_peaks(const Spectrum& spectrum,
                                               const std::vector<std::pair<std::string, double>>& tones);

/// Drive description in the units a sweep works with.
struct TransientDrive {
    double dc_bias = 0.0;
    bool pa_enabled = true;
    double pa_omega = 0.0;
    double pa_power_dbm = -200.0;
    bool fc_enabled = true;
    double fc_omega = 0.0;
    double fc_power_dbm = -200.0;
    double signal_amplitude = 0.05e-6;  ///< source current
    int samples_per_period = 128;
    double settle_periods = 20.0;
    double settle_transits = 5.0;
    double ramp_transits = 2.0;
    /// Smallest frequency common to all tones, Hz; 0 derives it from the tone frequencies.
    double frequency_resolution = 0.0;
};

enum class Response { forward, backward };

/// Configuration for one signal frequency. Forward: PA and signal at the input, FC at the output.
/// Backward: the pumps trade ports; the signal stays at the input. With signal_at_output the
/// signal is launched from the output port instead (used for S12).
[[nodiscard]] TransientConfig make_config(const device::DeviceSpec& device, const device::CellProfile& profile,
                                          const TransientDrive& drive, double signal_omega,
                                          Response response, bool signal_at_output = false);

struct SweepPoint {
    double omega = 0.0;
    cplx s21_forward;
    cplx s21_backward;
    bool ok = true;
    std::string error;
};

/// S21 from the input signal port to the far port.
[[nodiscard]] cplx run_point(const Network& network, const TransientConfig& config, double signal_omega,
                             bool signal_at_output = false);

[[nodiscard]] std::vector<SweepPoint> sweep_transient(const device::DeviceSpec& device,
                                                      const device::CellProfile& profile,
                                                      const TransientDrive& drive,
                                                      const std::vector<double>& signal_omegas,
                                                      bool both_directions = true, int workers = 1);

/// Device with the supercell count reduced to cells / supercell_length.
[[nodiscard]] device::DeviceSpec with_cells(const device::DeviceSpec& device, int cells);

}  // namespace twpac::transient
