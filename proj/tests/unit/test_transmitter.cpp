#include <doctest.h>

#include "elmlink/errors.hpp"
#include "elmlink/fft.hpp"
#include "elmlink/transmitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace elmlink;

namespace {

BitStream bits_of(std::initializer_list<int> b) {
    BitStream s;
    for (int v : b) s.bits.push_back(static_cast<std::uint8_t>(v));
    return s;
}

int hamming(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

// Carrier = the single bin at fc, signal = everything else.
std::pair<double, double> carrier_and_signal_power(const ComplexEnvelope& env, double fc) {
    const auto spec = fft::forward_copy(env.samples);
    const auto f = fft::bin_frequencies(spec.size(), env.sample_rate);
    const double n = static_cast<double>(spec.size());
    double pc = 0.0, ps = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double p = std::norm(spec[k]) / (n * n);
        if (std::abs(f[k] - fc) < 0.5 * env.sample_rate / n) pc += p;
        else ps += p;
    }
    return {pc, ps};
}

}  // namespace

TEST_CASE("gray map entries") {
    CHECK(gray_encode_pam4(bits_of({0, 0})).levels == std::vector<int>{-3});
    CHECK(gray_encode_pam4(bits_of({1, 0})).levels == std::vector<int>{3});
    CHECK(gray_encode_pam4(bits_of({0, 0, 1, 1, 1, 0, 0, 1})).levels == std::vector<int>{-3, 1, 3, -1});
    CHECK_THROWS_AS(gray_encode_pam4(bits_of({1, 0, 1})), ParameterError);
}

TEST_CASE("gray property and round trip") {
    const int levels[4] = {-3, -1, 1, 3};
    for (int i = 0; i + 1 < 4; ++i) {
        const auto a = gray_decode_pam4({levels[i]}).bits;
        const auto b = gray_decode_pam4({levels[i + 1]}).bits;
        CHECK(hamming(a, b) == 1);
    }
    const BitStream bits = random_bits(20000, 77);
    const Pam4Symbols sym = gray_encode_pam4(bits);
    CHECK(sym.source_bits.bits == bits.bits);
    CHECK(gray_decode_pam4(sym.levels).bits == bits.bits);
    CHECK(random_bits(100, 5).bits == random_bits(100, 5).bits);
}

TEST_CASE("carrier-only output is a constant-modulus tone at the detune") {
    TxConfig cfg;
    cfg.cspr_db = std::numeric_limits<double>::infinity();
    const auto env = shape_and_ssb(gray_encode_pam4(random_bits(2 * 448, 1)), cfg);
    const double a = std::abs(env.samples.front());
    for (const auto& v : env.samples) CHECK(std::abs(v) == doctest::Approx(a).epsilon(1e-12));
    CHECK(dominant_frequency(env) == doctest::Approx(cfg.carrier_detune));
    CHECK(env.power() == doctest::Approx(cfg.output_power).epsilon(1e-12));
    CHECK(check_minimum_phase(env) == 0);
}

TEST_CASE("measured CSPR matches the target") {
    TxConfig cfg;
    cfg.dac_enob = kInfiniteEnob;
    const auto sym = gray_encode_pam4(random_bits(2 * 16384, 3));
    for (double cspr : {6.0, 9.0, 12.0, 20.0}) {
        cfg.cspr_db = cspr;
        const auto env = shape_and_ssb(sym, cfg);
        const auto [pc, ps] = carrier_and_signal_power(env, cfg.carrier_detune);
        CHECK(std::abs(10.0 * std::log10(pc / ps) - cspr) < 0.1);
        CHECK(env.power() == doctest::Approx(cfg.output_power).epsilon(1e-9));
    }
}

TEST_CASE("single sideband occupancy") {
    TxConfig cfg;
    cfg.dac_enob = kInfiniteEnob;
    cfg.cspr_db = std::numeric_limits<double>::infinity() * -1.0;
    const auto env = shape_and_ssb(gray_encode_pam4(random_bits(2 * 8192, 4)), cfg);
    const auto spec = fft::forward_copy(env.samples);
    const auto f = fft::bin_frequencies(spec.size(), env.sample_rate);
    double inside = 0.0, above = 0.0, total = 0.0;
    double lo = 1e300, hi = -1e300;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double p = std::norm(spec[k]);
        total += p;
        if (f[k] > cfg.carrier_detune + 1e6) above += p;
        if (f[k] >= cfg.carrier_detune - cfg.baud * (1 + cfg.beta) / 2 * 2 - 1e6 && f[k] <= cfg.carrier_detune + 1e6)
            inside += p;
    }
    // Smoothed -20 dB edges of the occupied band.
    std::vector<double> smooth(spec.size(), 0.0);
    const long w = 64;
    const long n = static_cast<long>(spec.size());
    for (long k = 0; k < n; ++k) {
        double acc = 0.0;
        for (long j = -w; j <= w; ++j) acc += std::norm(spec[static_cast<std::size_t>((k + j + n) % n)]);
        smooth[static_cast<std::size_t>(k)] = acc;
    }
    const double smax = *std::max_element(smooth.begin(), smooth.end());
    for (std::size_t k = 0; k < spec.size(); ++k) {
        if (smooth[k] >= 0.01 * smax) {
            lo = std::min(lo, f[k]);
            hi = std::max(hi, f[k]);
        }
    }
    CHECK(above / total < 1e-20);
    CHECK(inside / total > 0.999);
    // Lower sideband spans about baud*(1+beta)/2 = 30.8 GHz below the carrier.
    CHECK(hi == doctest::Approx(cfg.carrier_detune).epsilon(0.05));
    CHECK(hi - lo > 0.8 * cfg.baud * (1 + cfg.beta) / 2);
    CHECK(hi - lo < 1.05 * cfg.baud * (1 + cfg.beta) / 2);
}

TEST_CASE("minimum-phase winding") {
    TxConfig cfg;
    const auto sym = gray_encode_pam4(random_bits(2 * 4096, 8));
    cfg.cspr_db = 20.0;
    const auto strong = shape_and_ssb(sym, cfg);
    CHECK(check_minimum_phase(strong, cfg.carrier_detune) == 0);
    CHECK(check_minimum_phase(strong) == 0);
    CHECK(strong.warnings.empty());

    cfg.cspr_db = -std::numeric_limits<double>::infinity();
    const auto bare = shape_and_ssb(sym, cfg);
    CHECK(check_minimum_phase(bare, cfg.carrier_detune) > 0);

    cfg.cspr_db = 0.0;
    const auto weak = shape_and_ssb(sym, cfg);
    CHECK(check_minimum_phase(weak, cfg.carrier_detune) > 0);
    CHECK_FALSE(weak.warnings.empty());
}

TEST_CASE("tx config validation") {
    TxConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.baud = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = TxConfig{};
    cfg.carrier_detune = 120e9;   // beyond the 112 GHz Nyquist edge
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = TxConfig{};
    cfg.beta = 1.2;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
}
