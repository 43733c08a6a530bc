#include "elmlink/transmitter.hpp"

#include "elmlink/errors.hpp"
#include "elmlink/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace elmlink {

void TxConfig::validate() const {
    if (!(baud > 0.0)) throw ParameterError("TxConfig: baud must be positive");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("TxConfig: beta must lie in [0, 1]");
    if (sps < 2) throw ParameterError("TxConfig: sps must be >= 2");
    if (!(carrier_detune > 0.0)) throw ParameterError("TxConfig: carrier_detune must be positive");
    // The lower sideband spans carrier_detune - baud*(1+beta)/2 .. carrier_detune.
    const double band = baud * (1.0 + beta) / 2.0;
    if (std::max(carrier_detune, std::abs(carrier_detune - band)) >= 0.5 * baud * sps)
        throw ParameterError("TxConfig: sample rate too low for carrier plus sideband");
    if (!(output_power > 0.0)) throw ParameterError("TxConfig: output_power must be positive");
    if (std::isnan(cspr_db)) throw ParameterError("TxConfig: cspr_db is NaN");
}

BitStream random_bits(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    BitStream out;
    out.bits.resize(count);
    for (std::size_t i = 0; i < count; ++i) out.bits[i] = static_cast<std::uint8_t>(rng() >> 63);
    return out;
}

Pam4Symbols gray_encode_pam4(const BitStream& bits) {
    if (bits.bits.size() % 2 != 0) throw ParameterError("gray_encode_pam4: odd bit count");
    Pam4Symbols out;
    out.source_bits = bits;
    out.levels.reserve(bits.bits.size() / 2);
    for (std::size_t i = 0; i < bits.bits.size(); i += 2) {
        const int b0 = bits.bits[i] ? 1 : 0;
        const int b1 = bits.bits[i + 1] ? 1 : 0;
        static constexpr int table[2][2] = {{-3, -1}, {+3, +1}};
        out.levels.push_back(table[b0][b1]);
    }
    return out;
}

BitStream gray_decode_pam4(const std::vector<int>& levels) {
    BitStream out;
    out.bits.reserve(levels.size() * 2);
    for (int v : levels) {
        switch (v) {
            case -3: out.bits.insert(out.bits.end(), {0, 0}); break;
            case -1: out.bits.insert(out.bits.end(), {0, 1}); break;
            case +1: out.bits.insert(out.bits.end(), {1, 1}); break;
            case +3: out.bits.insert(out.bits.end(), {1, 0}); break;
            default: throw ParameterError("gray_decode_pam4: level outside {-3,-1,+1,+3}");
        }
    }
    return out;
}

SampledSignal shape_drive(const Pam4Symbols& symbols, const TxConfig& cfg) {
    cfg.validate();
    const double fs = cfg.baud * cfg.sps;
    const std::size_t n = symbols.size() * static_cast<std::size_t>(cfg.sps);
    if (n == 0) return SampledSignal({}, fs);

    std::vector<double> impulses(n, 0.0);
    for (std::size_t k = 0; k < symbols.size(); ++k)
        impulses[k * static_cast<std::size_t>(cfg.sps)] = symbols.levels[k];
    const auto taps = rrc_taps(cfg.beta, cfg.rrc_span, cfg.sps);
    auto drive = convolve_circular(impulses, taps);

    const bool shaped = cfg.preemph_corner > 0.0;
    if (shaped) {
        const double fc = cfg.preemph_corner;
        drive = filter_frequency(drive, fs, [fc](double f) { return cplx(1.0, f / fc); });
    }
    SampledSignal out(std::move(drive), fs);
    if (std::isfinite(cfg.dac_enob)) {
        QuantizerSpec q;
        q.enob = cfg.dac_enob;
        q.seed = cfg.dac_seed;
        out = quantize_enob(out, q);
    }
    if (shaped) {
        const double fc = cfg.preemph_corner;
        out.samples = filter_frequency(out.samples, fs, [fc](double f) { return 1.0 / cplx(1.0, f / fc); });
    }
    return out;
}

ComplexEnvelope shape_and_ssb(const Pam4Symbols& symbols, const TxConfig& cfg) {
    const SampledSignal drive = shape_drive(symbols, cfg);
    const std::size_t n = drive.size();
    const double fs = drive.sample_rate;
    ComplexEnvelope env({}, fs, 0.0);
    env.warnings = drive.warnings;
    if (n == 0) return env;

    // Keep the lower sideband of the real drive.
    std::vector<cplx> spec(drive.samples.begin(), drive.samples.end());
    fft::forward(spec);
    const auto freqs = fft::bin_frequencies(n, fs);
    for (std::size_t k = 0; k < n; ++k) {
        if (freqs[k] >= 0.0) spec[k] = 0.0;   // DC would land on the carrier
        else spec[k] *= 2.0;
    }
    fft::inverse(spec);

    double signal_power = 0.0;
    for (const auto& v : spec) signal_power += std::norm(v);
    signal_power /= static_cast<double>(n);

    double carrier_amp = 0.0;
    double signal_scale = 1.0;
    if (std::isinf(cfg.cspr_db) && cfg.cspr_db > 0) {
        carrier_amp = 1.0;
        signal_scale = 0.0;
    } else if (std::isinf(cfg.cspr_db)) {
        carrier_amp = 0.0;
    } else {
        if (!(signal_power > 0.0)) throw ParameterError("shape_and_ssb: zero signal power with finite CSPR");
        carrier_amp = std::sqrt(signal_power * std::pow(10.0, cfg.cspr_db / 10.0));
    }
    double total = carrier_amp * carrier_amp + signal_scale * signal_scale * signal_power;
    if (!(total > 0.0)) throw ParameterError("shape_and_ssb: zero output power");
    const double norm = std::sqrt(cfg.output_power / total);

    env.samples.resize(n);
    const double w = 2.0 * std::numbers::pi * cfg.carrier_detune / fs;
    for (std::size_t k = 0; k < n; ++k) {
        const cplx rot = std::polar(1.0, w * static_cast<double>(k));
        env.samples[k] = norm * rot * (carrier_amp + signal_scale * spec[k]);
    }
    if (carrier_amp > 0.0 && signal_scale > 0.0) {
        const int winding = check_minimum_phase(env, cfg.carrier_detune);
        if (winding != 0)
            env.warnings.push_back("shape_and_ssb: field is not minimum-phase (winding " + std::to_string(winding) + ")");
    }
    return env;
}

double dominant_frequency(const ComplexEnvelope& env) {
    if (env.samples.empty()) return 0.0;
    const auto spec = fft::forward_copy(env.samples);
    std::size_t best = 0;
    for (std::size_t k = 1; k < spec.size(); ++k)
        if (std::norm(spec[k]) > std::norm(spec[best])) best = k;
    return fft::bin_frequencies(spec.size(), env.sample_rate)[best];
}

int check_minimum_phase(const ComplexEnvelope& env, double carrier_frequency) {
    if (env.samples.size() < 2) return 0;
    const double w = -2.0 * std::numbers::pi * carrier_frequency / env.sample_rate;
    double total = 0.0;
    cplx prev = env.samples[0];
    for (std::size_t k = 1; k < env.samples.size(); ++k) {
        const cplx cur = env.samples[k] * std::polar(1.0, w * static_cast<double>(k));
        if (std::abs(prev) > 0.0 && std::abs(cur) > 0.0) total += std::arg(cur / prev);
        prev = cur;
    }
    return static_cast<int>(std::abs(std::lround(total / (2.0 * std::numbers::pi))));
}

int check_minimum_phase(const ComplexEnvelope& env) {
    return check_minimum_phase(env, dominant_frequency(env));
}

}  // namespace elmlink
