#include <doctest.h>

#include "elmlink/errors.hpp"
#include "elmlink/fft.hpp"
#include "elmlink/signal.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

using namespace elmlink;

namespace {

constexpr double kPi = std::numbers::pi;

// Textbook RRC impulse response (unit symbol period), written out separately
// from the library including both removable singularities.
double oracle_rrc(double t, double b) {
    if (std::abs(t) < 1e-12) return 1.0 - b + 4.0 * b / kPi;
    if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12) {
        return b / std::sqrt(2.0) *
               ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * b)) + (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * b)));
    }
    const double num = std::sin(kPi * t * (1.0 - b)) + 4.0 * b * t * std::cos(kPi * t * (1.0 + b));
    const double den = kPi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
    return num / den;
}

double rms_diff(const std::vector<double>& a, const std::vector<double>& b, std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t k = lo; k < hi; ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(acc / static_cast<double>(hi - lo));
}

// Least-squares fit of DC + cos + sin at a known frequency; returns SNDR in dB.
double sine_fit_sndr_db(const std::vector<double>& y, double f_norm) {
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd v(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double ph = 2.0 * kPi * f_norm * static_cast<double>(k);
        a(k, 0) = 1.0;
        a(k, 1) = std::cos(ph);
        a(k, 2) = std::sin(ph);
        v(k) = y[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(v);
    const Eigen::VectorXd resid = v - a * c;
    const double p_sig = 0.5 * (c(1) * c(1) + c(2) * c(2));
    const double p_err = resid.squaredNorm() / static_cast<double>(n);
    return 10.0 * std::log10(p_sig / p_err);
}

}  // namespace

TEST_CASE("fft round trip") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (std::size_t n : {1u, 7u, 64u, 1000u, 4093u}) {
        std::vector<cplx> x(n);
        for (auto& v : x) v = {g(rng), g(rng)};
        const auto y = fft::inverse_copy(fft::forward_copy(x));
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            num += std::norm(y[k] - x[k]);
            den += std::norm(x[k]);
        }
        CHECK(std::sqrt(num / den) < 1e-12);
    }
}

TEST_CASE("rrc taps match the closed-form response") {
    const auto taps = rrc_taps(0.1, 16, 4);
    REQUIRE(taps.size() == 65);
    std::vector<double> ref(taps.size());
    double e = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        ref[k] = oracle_rrc((static_cast<double>(k) - 32.0) / 4.0, 0.1);
        e += ref[k] * ref[k];
    }
    for (auto& r : ref) r /= std::sqrt(e);
    CHECK(taps[32] == doctest::Approx(ref[32]).epsilon(1e-12));
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(taps[k] == doctest::Approx(ref[k]).epsilon(1e-10));
}

TEST_CASE("rrc taps: symmetry, energy, sinc limit, errors") {
    for (double beta : {0.0, 0.1, 0.25, 0.5, 1.0}) {
        for (int sps : {2, 4, 8}) {
            const auto taps = rrc_taps(beta, 16, sps);
            for (std::size_t k = 0; k < taps.size(); ++k) CHECK(taps[k] == taps[taps.size() - 1 - k]);
            double e = 0.0;
            for (double t : taps) e += t * t;
            CHECK(std::abs(e - 1.0) < 1e-9);
        }
    }
    // beta = 0: proportional to sinc samples
    const auto s = rrc_taps(0.0, 12, 4);
    const double c = s[24];
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double t = (static_cast<double>(k) - 24.0) / 4.0;
        const double sinc = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
        CHECK(s[k] == doctest::Approx(c * sinc).epsilon(1e-12).scale(1.0));
    }
    CHECK_THROWS_AS(rrc_taps(1.5, 16, 4), ParameterError);
    CHECK_THROWS_AS(rrc_taps(-0.1, 16, 4), ParameterError);
    CHECK_THROWS_AS(rrc_taps(0.1, 1, 4), ParameterError);
    CHECK_THROWS_AS(rrc_taps(0.1, 16, 1), ParameterError);
    CHECK_THROWS_AS(rrc_taps(0.1, 3, 3), ParameterError);
}

TEST_CASE("resample identity and rates") {
    SampledSignal x({1.0, -2.0, 3.5, 0.25}, 10.0);
    const auto y = resample(x, 1, 1);
    CHECK(y.samples == x.samples);
    CHECK(y.sample_rate == 10.0);
    const auto z = resample(x, 3, 3);
    CHECK(z.samples == x.samples);

    SampledSignal adc(std::vector<double>(1600, 0.5), 160e9);
    const auto two_sps = resample(adc, 7, 10, EdgeMode::Periodic);
    CHECK(two_sps.sample_rate == doctest::Approx(112e9));
    CHECK(two_sps.size() == 1120);
    CHECK_THROWS_AS(resample(SampledSignal({}, 1.0), 2, 1), ParameterError);
    CHECK_THROWS_AS(resample(x, 0, 1), ParameterError);
}

TEST_CASE("resample a 1 GHz sine at 16 GSa/s by 2:1") {
    const double fs = 16e9;
    const double f = 1e9;
    std::vector<double> x(1000);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::sin(2.0 * kPi * f * k / fs);
    for (auto [p, q] : {std::pair{2, 1}, std::pair{1, 2}}) {
        const auto y = resample(SampledSignal(x, fs), p, q, EdgeMode::Symmetric);
        CHECK(y.sample_rate == doctest::Approx(fs * p / q));
        std::vector<double> ref(y.size());
        for (std::size_t k = 0; k < ref.size(); ++k) ref[k] = std::sin(2.0 * kPi * f * k / y.sample_rate);
        double worst = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k) worst = std::max(worst, std::abs(y.samples[k] - ref[k]));
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("resample stays bounded on white noise") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    std::vector<double> x(3001);
    for (auto& v : x) v = g(rng);
    const auto y = resample(SampledSignal(x, 1.0), 5, 7);
    CHECK(y.size() == 3001 * 5 / 7);
    double peak = 0.0;
    for (double v : y.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak < 10.0);
}

TEST_CASE("resample round trip on band-limited records") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
    const std::size_t n = 1400;
    // Tones below 80% of the narrower (7/10 rate) Nyquist band.
    std::vector<double> x(n, 0.0);
    for (int tone = 1; tone <= 30; ++tone) {
        const double ph = u(rng);
        const int bin = tone * 8;  // up to bin 240 of 700 -> 0.34 fs_in, < 0.8 * 0.35 fs_in
        for (std::size_t k = 0; k < n; ++k) x[k] += std::cos(2.0 * kPi * bin * k / n + ph) / tone;
    }
    const SampledSignal sig(x, 160e9);
    const auto back = resample(resample(sig, 7, 10, EdgeMode::Periodic), 10, 7, EdgeMode::Periodic);
    REQUIRE(back.size() == n);
    CHECK(rms_diff(back.samples, x, 0, n) < 1e-6);
}

TEST_CASE("quantizer: identity sentinel, SNDR target, zero input, clipping") {
    SampledSignal x({0.1, -0.4, 0.9}, 1.0);
    QuantizerSpec inf;
    inf.enob = kInfiniteEnob;
    CHECK(quantize_enob(x, inf).samples == x.samples);

    const double f_norm = 0.0123456;
    std::vector<double> sine(1 << 16);
    for (std::size_t k = 0; k < sine.size(); ++k) sine[k] = std::sin(2.0 * kPi * f_norm * static_cast<double>(k));
    QuantizerSpec q;
    q.enob = 5.5;
    q.full_scale = 1.0;
    q.center = 0.0;
    q.seed = 9;
    const auto y = quantize_enob(SampledSignal(sine, 1.0), q);
    CHECK(std::abs(sine_fit_sndr_db(y.samples, f_norm) - (6.02 * 5.5 + 1.76)) < 0.3);
    CHECK(y.warnings.empty());

    QuantizerSpec q8;
    q8.enob = 8.0;
    const auto z = quantize_enob(SampledSignal(std::vector<double>(500, 0.0), 1.0), q8);
    const double lsb = 2.0 * 1.0 / static_cast<double>(quantizer_levels(8.0));
    for (double v : z.samples) CHECK(std::abs(v) <= lsb);

    QuantizerSpec clip = q;
    clip.full_scale = 0.5;
    CHECK_FALSE(quantize_enob(SampledSignal(sine, 1.0), clip).warnings.empty());
    CHECK_THROWS_AS(quantizer_levels(0.0), ParameterError);
}

TEST_CASE("hilbert maps cos to sin on a periodic record") {
    const std::size_t n = 256;
    std::vector<double> c(n);
    for (std::size_t k = 0; k < n; ++k) c[k] = std::cos(2.0 * kPi * 5.0 * k / n);
    const auto h = hilbert(c);
    for (std::size_t k = 0; k < n; ++k) CHECK(h[k] == doctest::Approx(std::sin(2.0 * kPi * 5.0 * k / n)).epsilon(1e-9).scale(1.0));
}
