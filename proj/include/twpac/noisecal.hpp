#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace twpac::noisecal {

struct NoiseSample {
    double frequency = 0.0;  ///< Hz
    double gain = 1.0;       ///< linear
    double nsys = 0.0;       ///< quanta
    double weight = 1.0;
};

struct NoiseFit {
    double n1 = 0.0;
    double n2 = 0.0;
    double residual_norm = 0.0;
    std::size_t sample_count = 0;
    bool negative_parameter = false;  ///< flagged, never clamped
};

/// Least squares N_sys = N1 + N2 / G in the variable 1/G (weighted if weights differ from 1).
[[nodiscard]] NoiseFit fit_two_stage(std::span<const NoiseSample> samples);

[[nodiscard]] double predict_nsys(const NoiseFit& fit, double gain);

/// A = P_in / (P_out / G_chain_off).
[[nodiscard]] double input_attenuation(double p_vna_in, double p_vna_out, double g_chain_off);

/// Samples from the model with Gaussian measurement noise, gains log-spaced in [g_min, g_max].
[[nodiscard]] std::vector<NoiseSample> synthetic_samples(double n1, double n2, double sigma, int count,
                                                         double g_min, double g_max, std::uint64_t seed);

struct BinnedFit {
    double f_lo = 0.0;
    double f_hi = 0.0;
    NoiseFit fit;
    bool ok = true;
};

/// One fit per frequency bin of width bin_width (Hz), bins anchored at the lowest sample frequency.
[[nodiscard]] std::vector<BinnedFit> fit_binned(std::span<const NoiseSample> samples, double bin_width);

}  // namespace twpac::noisecal
