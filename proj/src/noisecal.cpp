#include "twpac/noisecal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "twpac/errors.hpp"

namespace twpac::noisecal {

NoiseFit fit_two_stage(std::span<const NoiseSample> samples) {
    if (samples.size() < 2) throw DomainError("at least two samples are required");
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& s = samples[static_cast<std::size_t>(k)];
        if (!(s.gain > 0.0)) throw DomainError("gain must be > 0");
        if (!(s.weight > 0.0)) throw DomainError("weights must be > 0");
        const double w = std::sqrt(s.weight);
        a(k, 0) = w;
        a(k, 1) = w / s.gain;
        b(k) = w * s.nsys;
    }
    const double g0 = samples.front().gain;
    const bool distinct = std::any_of(samples.begin(), samples.end(),
                                      [&](const NoiseSample& s) { return s.gain != g0; });
    if (!distinct) throw NumericalError("rank-deficient fit: all gains are equal");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < 2) throw NumericalError("rank-deficient fit");
    const Eigen::Vector2d x = qr.solve(b);
    NoiseFit f;
    f.n1 = x(0);
    f.n2 = x(1);
    f.residual_norm = (a * x - b).norm();
    f.sample_count = samples.size();
    f.negative_parameter = f.n1 < 0.0 || f.n2 < 0.0;
    return f;
}

double predict_nsys(const NoiseFit& fit, double gain) {
    if (!(gain > 0.0)) throw DomainError("gain must be > 0");
    return fit.n1 + fit.n2 / gain;
}

double input_attenuation(double p_vna_in, double p_vna_out, double g_chain_off) {
    if (!(p_vna_in > 0.0) || !(p_vna_out > 0.0) || !(g_chain_off > 0.0))
        throw DomainError("powers and gain must be > 0");
    return p_vna_in / (p_vna_out / g_chain_off);
}

std::vector<NoiseSample> synthetic_samples(double n1, double n2, double sigma, int count, double g_min,
                                           double g_max, std::uint64_t seed) {
    if (count < 1 || !(g_min > 0.0) || !(g_max >= g_min)) throw DomainError("invalid synthetic grid");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<NoiseSample> out;
    for (int k = 0; k < count; ++k) {
        const double t = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
        const double g = g_min * std::pow(g_max / g_min, t);
        out.push_back({0.0, g, n1 + n2 / g + (sigma > 0.0 ? noise(rng) : 0.0), 1.0});
    }
    return out;
}

std::vector<BinnedFit> fit_binned(std::span<const NoiseSample> samples, double bin_width) {
    if (samples.empty()) return {};
    if (!(bin_width > 0.0)) throw DomainError("bin width must be > 0");
    double f0 = samples.front().frequency;
    for (const auto& s : samples) f0 = std::min(f0, s.frequency);
    std::map<long, std::vector<NoiseSample>> bins;
    for (const auto& s : samples) bins[static_cast<long>(std::floor((s.frequency - f0) / bin_width))].push_back(s);
    std::vector<BinnedFit> out;
    for (const auto& [k, v] : bins) {
        BinnedFit b;
        b.f_lo = f0 + static_cast<double>(k) * bin_width;
        b.f_hi = b.f_lo + bin_width;
        try {
            b.fit = fit_two_stage(v);
        } catch (const std::exception&) {
            b.ok = false;
            b.fit.sample_count = v.size();
        }
        out.push_back(b);
    }
    return out;
}

}  // namespace twpac::noisecal
