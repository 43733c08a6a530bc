#include "elmlink/channel.hpp"

#include "elmlink/errors.hpp"
#include "elmlink/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace elmlink {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSpeedOfLight = 299792458.0;
constexpr double kReferenceWavelength = 1545.5e-9;

std::vector<double> angular_frequencies(const ComplexEnvelope& env) {
    auto f = fft::bin_frequencies(env.size(), env.sample_rate);
    for (auto& v : f) v = 2.0 * kPi * (v + env.center_frequency_offset);
    return f;
}

double relative_rms_difference(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        num += std::norm(a[k] - b[k]);
        den += std::norm(b[k]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

ComplexEnvelope split_step(const ComplexEnvelope& env, const FiberParams& fp, double step_km) {
    ComplexEnvelope out = env;
    if (fp.length_km == 0.0 || env.samples.empty()) return out;
    const auto steps = static_cast<long>(std::ceil(fp.length_km / step_km - 1e-9));
    const double h = fp.length_km / static_cast<double>(steps);
    const double beta2 = fp.beta2_ps2_per_km * 1e-24;
    const double alpha = fp.alpha_db_per_km * std::log(10.0) / 10.0;
    const auto w = angular_frequencies(env);

    std::vector<cplx> half(w.size());
    std::vector<cplx> full(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        const cplx exponent(-alpha / 2.0, beta2 / 2.0 * w[k] * w[k]);
        half[k] = std::exp(exponent * (h / 2.0));
        full[k] = std::exp(exponent * h);
    }
    auto& a = out.samples;
    const double gh = fp.gamma_per_w_km * h;

    // D(h/2) [N(h) D(h)]^(steps-1) N(h) D(h/2)
    fft::forward(a);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] *= half[k];
    for (long s = 0; s < steps; ++s) {
        fft::inverse(a);
        if (gh != 0.0)
            for (auto& v : a) v *= std::polar(1.0, gh * std::norm(v));
        fft::forward(a);
        const auto& lin = (s + 1 == steps) ? half : full;
        for (std::size_t k = 0; k < a.size(); ++k) a[k] *= lin[k];
    }
    fft::inverse(a);
    return out;
}

}  // namespace

double osnr_reference_bandwidth() {
    return kSpeedOfLight * 0.1e-9 / (kReferenceWavelength * kReferenceWavelength);
}

void FiberParams::validate() const {
    if (!(length_km >= 0.0)) throw ParameterError("FiberParams: length must be >= 0");
    if (!(step_km > 0.0)) throw ParameterError("FiberParams: step must be > 0");
    if (length_km > 0.0 && step_km > length_km) throw ParameterError("FiberParams: step exceeds fiber length");
}

void LinkConfig::validate(const TxConfig& tx) const {
    const double band = tx.baud * (1.0 + tx.beta) / 2.0;
    const double extent = std::max(std::abs(tx.carrier_detune), std::abs(tx.carrier_detune - band));
    if (rx_filter_bw / 2.0 < extent)
        throw ParameterError("LinkConfig: rx_filter_bw does not cover carrier and signal band");
    if (!(pd_bandwidth > 0.0)) throw ParameterError("LinkConfig: pd_bandwidth must be positive");
    if (!(adc_rate > 0.0)) throw ParameterError("LinkConfig: adc_rate must be positive");
    if (!(target_osnr_db >= 10.0)) throw ParameterError("LinkConfig: target OSNR must be >= 10 dB");
    if (neighbor_noise_ratio < 0.0 || neighbor_phase_noise_rad < 0.0)
        throw ParameterError("LinkConfig: neighbor impairment terms must be >= 0");
}

ComplexEnvelope propagate_ssmf(const ComplexEnvelope& env, const FiberParams& fp) {
    fp.validate();
    env.validate();
    ComplexEnvelope out = split_step(env, fp, fp.step_km);
    if (fp.check_convergence && fp.length_km > 0.0) {
        const ComplexEnvelope fine = split_step(env, fp, fp.step_km / 2.0);
        const double diff = relative_rms_difference(out.samples, fine.samples);
        if (diff > 1e-3)
            out.warnings.push_back("propagate_ssmf: step not converged (halving changes output by " +
                                   std::to_string(diff) + " rms)");
    }
    return out;
}

ComplexEnvelope apply_dispersion(const ComplexEnvelope& env, double length_km, double beta2_ps2_per_km) {
    ComplexEnvelope out = env;
    if (length_km == 0.0 || env.samples.empty()) return out;
    const double beta2 = beta2_ps2_per_km * 1e-24;
    const auto w = angular_frequencies(env);
    fft::forward(out.samples);
    for (std::size_t k = 0; k < w.size(); ++k)
        out.samples[k] *= std::polar(1.0, beta2 / 2.0 * w[k] * w[k] * length_km);
    fft::inverse(out.samples);
    return out;
}

ComplexEnvelope set_power_dbm(const ComplexEnvelope& env, double power_dbm) {
    const double p = env.power();
    if (!(p > 0.0)) throw ParameterError("set_power_dbm: zero-power field");
    const double target = 1e-3 * std::pow(10.0, power_dbm / 10.0);
    ComplexEnvelope out = env;
    const double scale = std::sqrt(target / p);
    for (auto& v : out.samples) v *= scale;
    return out;
}

ComplexEnvelope amplify_noise_load(const ComplexEnvelope& env, double target_osnr_db, std::uint64_t seed) {
    if (std::isinf(target_osnr_db) && target_osnr_db > 0) return env;
    if (!(target_osnr_db >= 10.0)) throw ParameterError("amplify_noise_load: target OSNR must be >= 10 dB");
    const double p_sig = env.power();
    const double osnr = std::pow(10.0, target_osnr_db / 10.0);
    const double n0 = p_sig / (osnr * osnr_reference_bandwidth());
    const double sigma = std::sqrt(n0 * env.sample_rate / 2.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    ComplexEnvelope out = env;
    for (auto& v : out.samples) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        v += cplx(re, im);
    }
    return out;
}

double estimate_osnr_db(const ComplexEnvelope& env, double band_lo, double band_hi, double guard) {
    const auto spec = fft::forward_copy(env.samples);
    const auto f = fft::bin_frequencies(spec.size(), env.sample_rate);
    const double n = static_cast<double>(spec.size());
    double total = 0.0;
    double noise = 0.0;
    std::size_t noise_bins = 0;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double p = std::norm(spec[k]) / (n * n);
        total += p;
        if (f[k] < band_lo - guard || f[k] > band_hi + guard) {
            noise += p;
            ++noise_bins;
        }
    }
    if (noise_bins == 0) throw ParameterError("estimate_osnr_db: no out-of-band bins");
    const double n0 = noise / static_cast<double>(noise_bins) * n / env.sample_rate;
    const double p_sig = total - n0 * env.sample_rate;
    return 10.0 * std::log10(p_sig / (n0 * osnr_reference_bandwidth()));
}

ComplexEnvelope optical_bandpass(const ComplexEnvelope& env, double center, double bandwidth) {
    ComplexEnvelope out = env;
    fft::forward(out.samples);
    const auto f = fft::bin_frequencies(env.size(), env.sample_rate);
    for (std::size_t k = 0; k < f.size(); ++k)
        if (std::abs(f[k] - center) > bandwidth / 2.0) out.samples[k] = 0.0;
    fft::inverse(out.samples);
    return out;
}

SampledSignal photodetect(const ComplexEnvelope& env, double pd_bandwidth) {
    SampledSignal out;
    out.sample_rate = env.sample_rate;
    out.warnings = env.warnings;
    out.samples.resize(env.size());
    for (std::size_t k = 0; k < env.size(); ++k) out.samples[k] = std::norm(env.samples[k]);
    if (std::isinf(pd_bandwidth) || pd_bandwidth >= env.sample_rate / 2.0) return out;
    out.samples = filter_frequency(out.samples, env.sample_rate,
                                   [pd_bandwidth](double f) { return std::abs(f) <= pd_bandwidth ? 1.0 : 0.0; });
    return out;
}

std::pair<int, int> rational_ratio(double target) {
    for (int q = 1; q <= 10000; ++q) {
        const double p = std::round(target * q);
        if (p >= 1.0 && std::abs(p / q - target) <= 1e-9 * target) {
            const int pi = static_cast<int>(p);
            const int g = std::gcd(pi, q);
            return {pi / g, q / g};
        }
    }
    throw ParameterError("rational_ratio: sample-rate ratio is not a small rational");
}

SyncResult sync_and_downsample(const SampledSignal& sig, const Pam4Symbols& reference, double baud, double beta) {
    if (reference.size() < 1000) throw ParameterError("sync_and_downsample: reference needs >= 1000 symbols");
    sig.validate();
    const double fs_out = 2.0 * baud;
    const auto [p, q] = rational_ratio(fs_out / sig.sample_rate);
    const std::size_t n_ref = 2 * reference.size();
    const bool periodic = (sig.size() * static_cast<std::size_t>(p)) % static_cast<std::size_t>(q) == 0 &&
                          sig.size() * static_cast<std::size_t>(p) / static_cast<std::size_t>(q) == n_ref;
    SampledSignal two_sps = resample(sig, p, q, periodic ? EdgeMode::Periodic : EdgeMode::Symmetric);
    const std::size_t n = two_sps.size();
    if (n < n_ref) throw ParameterError("sync_and_downsample: signal shorter than reference");

    // RRC-shaped reference at 2 SpS, zero-padded to the record length.
    std::vector<double> impulses(n, 0.0);
    for (std::size_t k = 0; k < reference.size(); ++k) impulses[2 * k] = reference.levels[k];
    const auto taps = rrc_taps(beta, 32, 2);
    std::vector<double> ref_wave = periodic ? convolve_circular(impulses, taps) : convolve_same(impulses, taps);

    const double mean = std::accumulate(two_sps.samples.begin(), two_sps.samples.end(), 0.0) / static_cast<double>(n);
    std::vector<cplx> ys(n);
    for (std::size_t k = 0; k < n; ++k) ys[k] = two_sps.samples[k] - mean;
    std::vector<cplx> rs(ref_wave.begin(), ref_wave.end());
    fft::forward(ys);
    fft::forward(rs);
    std::vector<cplx> cross(n);
    for (std::size_t k = 0; k < n; ++k) cross[k] = ys[k] * std::conj(rs[k]);
    auto corr = fft::inverse_copy(cross);  // corr[d] = sum_n y[n + d] r[n]

    std::size_t peak = 0;
    for (std::size_t k = 1; k < n; ++k)
        if (std::abs(corr[k].real()) > std::abs(corr[peak].real())) peak = k;
    const double sign = corr[peak].real() >= 0.0 ? 1.0 : -1.0;

    // Sidelobes: everything farther than 64 symbols from the peak.
    double side = 0.0;
    std::size_t side_count = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const long d = static_cast<long>(k) - static_cast<long>(peak);
        const long wrapped = std::min(std::labs(d), static_cast<long>(n) - std::labs(d));
        if (wrapped > 128) {
            side += corr[k].real() * corr[k].real();
            ++side_count;
        }
    }
    const double side_rms = side_count ? std::sqrt(side / static_cast<double>(side_count)) : 0.0;
    const double ratio = side_rms > 0.0 ? std::abs(corr[peak].real()) / side_rms : std::numeric_limits<double>::infinity();
    if (!(std::abs(corr[peak].real()) > 0.0) || ratio < 3.0) throw SyncError("sync_and_downsample: correlation peak below 3x sidelobe rms");

    // Band-limited correlation at fractional lag, refined by golden-section search.
    const auto fr = fft::bin_frequencies(n, 1.0);
    const auto corr_at = [&](double lag) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double ph = 2.0 * kPi * fr[k] * lag;
            acc += cross[k].real() * std::cos(ph) - cross[k].imag() * std::sin(ph);
        }
        return sign * acc / static_cast<double>(n);
    };
    double lo = static_cast<double>(peak) - 1.0;
    double hi = static_cast<double>(peak) + 1.0;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo);
    double x2 = lo + g * (hi - lo);
    double f1 = corr_at(x1);
    double f2 = corr_at(x2);
    for (int it = 0; it < 40; ++it) {
        if (f1 > f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - g * (hi - lo); f1 = corr_at(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + g * (hi - lo); f2 = corr_at(x2);
        }
    }
    double delay = 0.5 * (lo + hi);
    if (delay > static_cast<double>(n) / 2.0) delay -= static_cast<double>(n);

    // Advance the record by `delay` samples with a band-limited phase ramp.
    std::vector<cplx> shifted(two_sps.samples.begin(), two_sps.samples.end());
    fft::forward(shifted);
    for (std::size_t k = 0; k < n; ++k) shifted[k] *= std::polar(1.0, 2.0 * kPi * fr[k] * delay);
    if (n % 2 == 0) shifted[n / 2] = cplx(shifted[n / 2].real() * std::cos(kPi * delay), 0.0);
    fft::inverse(shifted);

    SyncResult result;
    result.delay = delay;
    result.peak_to_sidelobe = ratio;
    result.signal.sample_rate = fs_out;
    result.signal.warnings = two_sps.warnings;
    result.signal.samples.resize(n_ref);
    for (std::size_t k = 0; k < n_ref; ++k) result.signal.samples[k] = shifted[k].real();
    return result;
}

}  // namespace elmlink
