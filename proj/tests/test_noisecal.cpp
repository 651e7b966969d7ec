#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "twpac/errors.hpp"
#include "twpac/noisecal.hpp"

using namespace twpac;
using namespace twpac::noisecal;

namespace {

// Closed-form normal equations for y = a + b x, x = 1/G.
std::pair<double, double> ols(const std::vector<NoiseSample>& s) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(s.size());
    for (const auto& p : s) {
        const double x = 1.0 / p.gain;
        sx += x;
        sy += p.nsys;
        sxx += x * x;
        sxy += x * p.nsys;
    }
    const double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {(sy - b * sx) / n, b};
}

std::vector<NoiseSample> exact(double n1, double n2, std::vector<double> gains) {
    std::vector<NoiseSample> s;
    for (double g : gains) s.push_back({7e9, g, n1 + n2 / g, 1.0});
    return s;
}

}  // namespace

TEST_CASE("exact synthetic data is recovered") {
    std::vector<double> gains;
    for (int k = 0; k < 10; ++k) gains.push_back(1.0 + k);
    const auto f = fit_two_stage(exact(1.7, 17.5, gains));
    CHECK(std::abs(f.n1 - 1.7) < 1e-9);
    CHECK(std::abs(f.n2 - 17.5) < 1e-9);
    CHECK(f.residual_norm < 1e-9);
    CHECK(f.sample_count == 10);
    CHECK_FALSE(f.negative_parameter);

    const auto g = synthetic_samples(1.7, 17.5, 0.0, 20, 1.0, 10.0, 1);
    const auto fg = fit_two_stage(g);
    CHECK(std::abs(fg.n1 - 1.7) < 1e-9);
    CHECK(std::abs(fg.n2 - 17.5) < 1e-9);
}

TEST_CASE("two samples interpolate exactly") {
    const std::vector<NoiseSample> s{{0, 2.0, 5.0, 1.0}, {0, 4.0, 3.0, 1.0}};
    const auto f = fit_two_stage(s);
    CHECK(f.n1 == doctest::Approx(1.0));
    CHECK(f.n2 == doctest::Approx(8.0));
    CHECK(f.residual_norm < 1e-12);
}

TEST_CASE("high-gain limit approaches N1") {
    const auto f = fit_two_stage(exact(1.7, 17.5, {1, 2, 5, 10}));
    CHECK(predict_nsys(f, 1e9) == doctest::Approx(1.7).epsilon(1e-6));
}

TEST_CASE("ordinary least squares matches the normal equations") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> gdist(1.0, 50.0), ndist(-0.3, 0.3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<NoiseSample> s;
        for (int k = 0; k < 15; ++k) {
            const double g = gdist(rng);
            s.push_back({0, g, 2.0 + 10.0 / g + ndist(rng), 1.0});
        }
        const auto [a, b] = ols(s);
        const auto f = fit_two_stage(s);
        CHECK(f.n1 == doctest::Approx(a).epsilon(1e-10));
        CHECK(f.n2 == doctest::Approx(b).epsilon(1e-10));
    }
}

TEST_CASE("weights") {
    auto s = exact(1.0, 4.0, {1, 2, 4});
    s.push_back({0, 8.0, 10.0, 1e-12});
    // A vanishing weight on an outlier leaves the fit on the clean points.
    const auto f = fit_two_stage(s);
    CHECK(f.n1 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.n2 == doctest::Approx(4.0).epsilon(1e-6));
    s.back().weight = 0.0;
    CHECK_THROWS_AS((void)fit_two_stage(s), DomainError);
}

TEST_CASE("errors and flags") {
    CHECK_THROWS_AS((void)fit_two_stage(exact(1, 1, {3})), DomainError);
    CHECK_THROWS_AS((void)fit_two_stage(exact(1, 1, {3, 3, 3})), NumericalError);
    CHECK_THROWS_AS((void)fit_two_stage(exact(1, 1, {3, -1})), DomainError);
    const auto neg = fit_two_stage(exact(-0.5, 3.0, {1, 2, 3}));
    CHECK(neg.negative_parameter);
    CHECK(neg.n1 == doctest::Approx(-0.5));
    const auto neg2 = fit_two_stage(exact(2.0, -1.0, {1, 2, 3}));
    CHECK(neg2.negative_parameter);
}

TEST_CASE("predict_nsys") {
    const NoiseFit f{1.7, 17.5, 0.0, 0, false};
    CHECK(predict_nsys(f, 5.01) == doctest::Approx(5.19).epsilon(0.01 / 5.19));
    CHECK(predict_nsys(f, 1.0) == doctest::Approx(19.2));
    double prev = predict_nsys(f, 0.5);
    for (double g = 1.0; g < 100.0; g *= 1.3) {
        const double v = predict_nsys(f, g);
        CHECK(v < prev);
        prev = v;
    }
    CHECK_THROWS_AS((void)predict_nsys(f, 0.0), DomainError);
}

TEST_CASE("input attenuation") {
    CHECK(input_attenuation(1e-6, 1e-4, 100.0) == doctest::Approx(1.0));
    // 1 mW in, 1 uW out through a chain of gain 10: 40 dB of line attenuation.
    CHECK(10.0 * std::log10(input_attenuation(1e-3, 1e-6, 10.0)) == doctest::Approx(40.0));
    CHECK(input_attenuation(1e-3, 1e-6, 1e4) == doctest::Approx(1e7));
    CHECK_THROWS_AS((void)input_attenuation(1e-3, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS((void)input_attenuation(1e-3, 1.0, 0.0), DomainError);
    CHECK_THROWS_AS((void)input_attenuation(0.0, 1.0, 1.0), DomainError);
}

TEST_CASE("scale equivariance") {
    auto s = synthetic_samples(1.7, 17.5, 0.05, 20, 1.0, 50.0, 11);
    const auto f = fit_two_stage(s);
    auto s2 = s;
    for (auto& p : s2) p.nsys *= 2.0;
    const auto f2 = fit_two_stage(s2);
    CHECK(f2.n1 == 2.0 * f.n1);
    CHECK(f2.n2 == 2.0 * f.n2);
    for (double lambda : {0.3, 3.7, 1e3}) {
        auto sl = s;
        for (auto& p : sl) p.nsys *= lambda;
        const auto fl = fit_two_stage(sl);
        CHECK(fl.n1 == doctest::Approx(lambda * f.n1).epsilon(1e-12));
        CHECK(fl.n2 == doctest::Approx(lambda * f.n2).epsilon(1e-12));
    }
}

TEST_CASE("noisy round trip over 20 log-spaced gains") {
    int hits = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        const auto s = synthetic_samples(1.7, 17.5, 0.05, 20, 1.0, 50.0, 1000 + static_cast<std::uint64_t>(t));
        const auto f = fit_two_stage(s);
        hits += std::abs(f.n1 - 1.7) <= 0.1;
    }
    CHECK(static_cast<double>(hits) / trials >= 0.95);

    const auto a = synthetic_samples(1.7, 17.5, 0.05, 20, 1.0, 50.0, 42);
    const auto b = synthetic_samples(1.7, 17.5, 0.05, 20, 1.0, 50.0, 42);
    REQUIRE(a.size() == 20);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].nsys == b[k].nsys);
    CHECK(a.front().gain == doctest::Approx(1.0));
    CHECK(a.back().gain == doctest::Approx(50.0));
    CHECK(a[10].gain / a[9].gain == doctest::Approx(a[1].gain / a[0].gain));
}

TEST_CASE("binned fits") {
    std::vector<NoiseSample> s;
    for (double f : {6.9e9, 7.0e9, 7.05e9}) {
        for (double g : {1.0, 3.0, 10.0}) s.push_back({f, g, 1.0 + 5.0 / g, 1.0});
    }
    for (double g : {1.0, 3.0}) s.push_back({8.05e9, g, 2.0 + 1.0 / g, 1.0});
    s.push_back({9.0e9, 2.0, 3.0, 1.0});
    const auto bins = fit_binned(s, 0.5e9);
    REQUIRE(bins.size() == 3);
    CHECK(bins[0].ok);
    CHECK(bins[0].fit.n1 == doctest::Approx(1.0));
    CHECK(bins[0].fit.n2 == doctest::Approx(5.0));
    CHECK(bins[0].fit.sample_count == 9);
    CHECK(bins[1].ok);
    CHECK(bins[1].fit.n1 == doctest::Approx(2.0));
    CHECK_FALSE(bins[2].ok);
    CHECK(bins[0].f_lo == doctest::Approx(6.9e9));
    CHECK(bins[0].f_hi == doctest::Approx(7.4e9));
    CHECK(fit_binned({}, 1e9).empty());
    CHECK_THROWS_AS((void)fit_binned(s, 0.0), DomainError);
}
