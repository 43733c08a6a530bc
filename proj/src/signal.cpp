#include "elmlink/signal.hpp"

#include "elmlink/errors.hpp"
#include "elmlink/fft.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace elmlink {

SampledSignal::SampledSignal(std::vector<double> s, double fs) : samples(std::move(s)), sample_rate(fs) {}

void SampledSignal::validate() const {
    if (!(sample_rate > 0.0)) throw ParameterError("SampledSignal: sample_rate must be positive");
    for (double v : samples)
        if (!std::isfinite(v)) throw ParameterError("SampledSignal: non-finite sample");
}

ComplexEnvelope::ComplexEnvelope(std::vector<cplx> s, double fs, double offset)
    : samples(std::move(s)), sample_rate(fs), center_frequency_offset(offset) {}

double ComplexEnvelope::power() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& v : samples) acc += std::norm(v);
    return acc / static_cast<double>(samples.size());
}

void ComplexEnvelope::validate() const {
    if (!(sample_rate > 0.0)) throw ParameterError("ComplexEnvelope: sample_rate must be positive");
    if (!std::isfinite(power())) throw ParameterError("ComplexEnvelope: non-finite power");
}

double rrc_impulse(double t, double beta) {
    constexpr double pi = std::numbers::pi;
    if (std::abs(t) < 1e-12) return 1.0 - beta + 4.0 * beta / pi;
    if (beta > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-12) {
        const double a = pi / (4.0 * beta);
        return beta / std::numbers::sqrt2 * ((1.0 + 2.0 / pi) * std::sin(a) + (1.0 - 2.0 / pi) * std::cos(a));
    }
    const double num = std::sin(pi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(pi * t * (1.0 + beta));
    const double den = pi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
    return num / den;
}

std::vector<double> rrc_taps(double beta, int span, int sps) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("rrc_taps: beta must lie in [0, 1]");
    if (span < 2 || sps < 2) throw ParameterError("rrc_taps: span and sps must be >= 2");
    if ((span * sps) % 2 != 0) throw ParameterError("rrc_taps: span*sps must be even for a symmetric odd-length filter");
    const int len = span * sps + 1;
    const int mid = len / 2;
    std::vector<double> h(static_cast<std::size_t>(len));
    for (int k = 0; k <= mid; ++k) {
        const double t = static_cast<double>(k - mid) / sps;
        h[static_cast<std::size_t>(k)] = rrc_impulse(t, beta);
        h[static_cast<std::size_t>(len - 1 - k)] = h[static_cast<std::size_t>(k)];
    }
    const double energy = std::inner_product(h.begin(), h.end(), h.begin(), 0.0);
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& v : h) v *= scale;
    return h;
}

namespace {

long gcd_long(long a, long b) { return std::gcd(a, b); }

// Spectral zero-pad / truncate of one period from n_in to n_out points.
std::vector<cplx> fourier_resize(std::vector<cplx> x, std::size_t n_out) {
    const std::size_t n_in = x.size();
    fft::forward(x);
    std::vector<cplx> y(n_out, cplx(0.0, 0.0));
    const std::size_t n = std::min(n_in, n_out);
    const std::size_t pos = (n + 1) / 2;  // bins 0..pos-1
    for (std::size_t k = 0; k < pos; ++k) y[k] = x[k];
    for (std::size_t k = 1; k < pos; ++k) y[n_out - k] = x[n_in - k];
    if (n % 2 == 0 && n > 0) {
        const std::size_t h = n / 2;
        if (n_out > n_in) {
            y[h] = 0.5 * x[h];
            y[n_out - h] = 0.5 * x[h];
        } else if (n_out < n_in) {
            y[h] = x[h] + x[n_in - h];
        } else {
            y[h] = x[h];
        }
    }
    fft::inverse(y);
    const double scale = static_cast<double>(n_out) / static_cast<double>(n_in);
    for (auto& v : y) v *= scale;
    return y;
}

// Index reflection about the record ends (no edge repeat), valid for any offset.
std::size_t reflect_index(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * (n - 1);
    long m = i % period;
    if (m < 0) m += period;
    if (m >= n) m = period - m;
    return static_cast<std::size_t>(m);
}

// Continues x past its last sample with a least-squares linear predictor fitted
// on the trailing segment. Returns an empty vector when the prediction grows
// beyond the record's range.
std::vector<cplx> predict_forward(const std::vector<cplx>& x, long count) {
    const long n = static_cast<long>(x.size());
    const long order = std::min<long>(32, n / 4);
    if (order < 1 || count <= 0) return {};
    const long seg = std::min<long>(n, std::max<long>(8 * order, 256));
    const long rows = seg - order;
    Eigen::MatrixXcd a(rows, order);
    Eigen::VectorXcd b(rows);
    const long base = n - seg;
    for (long r = 0; r < rows; ++r) {
        const long t = base + order + r;
        b(r) = x[static_cast<std::size_t>(t)];
        for (long i = 0; i < order; ++i) a(r, i) = x[static_cast<std::size_t>(t - 1 - i)];
    }
    const Eigen::VectorXcd coef = a.completeOrthogonalDecomposition().solve(b);

    double peak = 0.0;
    for (const auto& v : x) peak = std::max(peak, std::abs(v));
    std::vector<cplx> hist(x.end() - order, x.end());
    std::vector<cplx> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) {
        cplx next(0.0, 0.0);
        for (long i = 0; i < order; ++i) next += coef(i) * hist[hist.size() - 1 - static_cast<std::size_t>(i)];
        if (!std::isfinite(next.real()) || !std::isfinite(next.imag()) || std::abs(next) > 2.0 * peak + 1e-300)
            return {};
        out.push_back(next);
        hist.push_back(next);
    }
    return out;
}

// Pads both ends of x: linear prediction where it stays bounded, otherwise
// point-symmetric reflection about the end sample. The outer half of each pad
// is eased towards the mean of the two end samples so the circular wrap of
// the padded buffer is smooth.
template <typename T>
std::vector<cplx> extend_edges(const std::vector<T>& x, long left, long right) {
    const long n = static_cast<long>(x.size());
    const std::vector<cplx> xc(x.begin(), x.end());
    std::vector<cplx> rev(xc.rbegin(), xc.rend());
    const auto tail = predict_forward(xc, right);
    const auto head = predict_forward(rev, left);

    const long total = n + left + right;
    std::vector<cplx> out(static_cast<std::size_t>(total));
    const cplx first = xc.front();
    const cplx last = xc.back();
    const cplx mid = 0.5 * (first + last);
    const auto ease = [](double d) { return d > 0.5 ? 0.5 * (1.0 + std::cos(std::numbers::pi * (d - 0.5) / 0.5)) : 1.0; };
    for (long i = 0; i < total; ++i) {
        const long j = i - left;
        cplx v;
        double w = 1.0;
        if (j < 0) {
            v = head.empty() ? 2.0 * first - xc[reflect_index(-j, n)] : head[static_cast<std::size_t>(-j - 1)];
            w = ease(static_cast<double>(-j) / static_cast<double>(left));
        } else if (j >= n) {
            v = tail.empty() ? 2.0 * last - xc[reflect_index(2 * (n - 1) - j, n)] : tail[static_cast<std::size_t>(j - n)];
            w = ease(static_cast<double>(j - n + 1) / static_cast<double>(right));
        } else {
            v = xc[static_cast<std::size_t>(j)];
        }
        out[static_cast<std::size_t>(i)] = mid + w * (v - mid);
    }
    return out;
}

std::vector<cplx> resample_complex(const std::vector<cplx>& x, int p, int q, EdgeMode edges) {
    if (x.empty()) throw ParameterError("resample: empty input");
    if (p < 1 || q < 1) throw ParameterError("resample: p and q must be >= 1");
    const long g = gcd_long(p, q);
    const long P = p / g;
    const long Q = q / g;
    if (P == 1 && Q == 1) return x;
    const long n = static_cast<long>(x.size());
    if (edges == EdgeMode::Periodic) {
        if ((n * P) % Q != 0)
            throw ParameterError("resample: periodic mode needs size*p/q to be an integer");
        return fourier_resize(x, static_cast<std::size_t>(n * P / Q));
    }
    // Symmetric: left pad is a multiple of Q so the crop start is an integer.
    const long min_pad = std::max<long>(64, n / 2);
    const long left = Q * ((min_pad + Q - 1) / Q);
    long total = n + 2 * left;
    total += (Q - total % Q) % Q;
    std::vector<cplx> padded = extend_edges(x, left, total - n - left);
    const auto y = fourier_resize(std::move(padded), static_cast<std::size_t>(total * P / Q));
    const long start = left * P / Q;
    const long count = (n * P) / Q;
    return {y.begin() + start, y.begin() + start + count};
}

}  // namespace

SampledSignal resample(const SampledSignal& sig, int p, int q, EdgeMode edges) {
    std::vector<cplx> x(sig.samples.begin(), sig.samples.end());
    const auto y = resample_complex(x, p, q, edges);
    SampledSignal out;
    out.samples.resize(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) out.samples[k] = y[k].real();
    out.sample_rate = sig.sample_rate * p / q;
    out.warnings = sig.warnings;
    return out;
}

ComplexEnvelope resample(const ComplexEnvelope& env, int p, int q, EdgeMode edges) {
    ComplexEnvelope out(resample_complex(env.samples, p, q, edges), env.sample_rate * p / q,
                        env.center_frequency_offset);
    out.warnings = env.warnings;
    return out;
}

long quantizer_levels(double enob) {
    if (!(enob > 0.0)) throw ParameterError("quantize_enob: enob must be positive");
    // Rounded up; the additive noise term brings the SNDR down to the target.
    return std::max<long>(2, static_cast<long>(std::ceil(std::pow(2.0, enob) - 1e-9)));
}

SampledSignal quantize_enob(const SampledSignal& sig, const QuantizerSpec& spec) {
    if (std::isinf(spec.enob) && spec.enob > 0) return sig;
    const long levels = quantizer_levels(spec.enob);
    const auto n = static_cast<double>(sig.samples.size());

    double center = spec.center;
    double full_scale = spec.full_scale;
    if (std::isnan(center) || full_scale <= 0.0) {
        const double mean = n > 0 ? std::accumulate(sig.samples.begin(), sig.samples.end(), 0.0) / n : 0.0;
        double var = 0.0;
        for (double v : sig.samples) var += (v - mean) * (v - mean);
        var = n > 0 ? var / n : 0.0;
        if (std::isnan(center)) center = mean;
        if (full_scale <= 0.0) full_scale = 4.0 * std::sqrt(var);
    }
    if (!(full_scale > 0.0)) full_scale = 1.0;

    const double step = 2.0 * full_scale / static_cast<double>(levels);
    const double sndr_db = 6.02 * spec.enob + 1.76;
    const double target_noise = 0.5 * full_scale * full_scale / std::pow(10.0, sndr_db / 10.0);
    const double extra_var = std::max(0.0, target_noise - step * step / 12.0);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double extra_std = std::sqrt(extra_var);

    SampledSignal out;
    out.sample_rate = sig.sample_rate;
    out.warnings = sig.warnings;
    out.samples.resize(sig.samples.size());
    std::size_t clipped = 0;
    for (std::size_t k = 0; k < sig.samples.size(); ++k) {
        const double rel = sig.samples[k] - center;
        if (std::abs(rel) > full_scale) ++clipped;
        long idx = static_cast<long>(std::floor((rel + full_scale) / step));
        idx = std::clamp(idx, 0L, levels - 1);
        const double q = center - full_scale + step * (static_cast<double>(idx) + 0.5);
        out.samples[k] = q + (extra_std > 0.0 ? extra_std * gauss(rng) : 0.0);
    }
    if (n > 0 && static_cast<double>(clipped) / n > 0.01) {
        out.warnings.push_back("quantize_enob: clipping fraction " + std::to_string(static_cast<double>(clipped) / n));
    }
    return out;
}

std::vector<double> hilbert(const std::vector<double>& x, EdgeMode edges) {
    if (x.empty()) return {};
    const long n = static_cast<long>(x.size());
    long left = 0;
    std::vector<cplx> buf;
    if (edges == EdgeMode::Periodic) {
        buf.assign(x.begin(), x.end());
    } else {
        left = std::max<long>(64, n / 2);
        buf = extend_edges(x, left, left);
    }
    fft::forward(buf);
    const std::size_t m = buf.size();
    const cplx minus_i(0.0, -1.0);
    for (std::size_t k = 0; k < m; ++k) {
        if (k == 0 || (m % 2 == 0 && k == m / 2)) {
            buf[k] = 0.0;
        } else if (k < (m + 1) / 2) {
            buf[k] *= minus_i;
        } else {
            buf[k] *= -minus_i;
        }
    }
    fft::inverse(buf);
    std::vector<double> out(x.size());
    for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(i + left)].real();
    return out;
}

std::vector<double> convolve_same(const std::vector<double>& x, const std::vector<double>& h) {
    const long n = static_cast<long>(x.size());
    const long m = static_cast<long>(h.size());
    const long c = m / 2;
    std::vector<double> y(x.size(), 0.0);
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long k = 0; k < m; ++k) {
            const long j = i + c - k;
            if (j >= 0 && j < n) acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(j)];
        }
        y[static_cast<std::size_t>(i)] = acc;
    }
    return y;
}

std::vector<double> convolve_circular(const std::vector<double>& x, const std::vector<double>& h) {
    const std::size_t n = x.size();
    if (h.size() > n) throw ParameterError("convolve_circular: filter longer than record");
    const long c = static_cast<long>(h.size()) / 2;
    std::vector<cplx> hx(n, 0.0);
    for (std::size_t k = 0; k < h.size(); ++k) {
        long idx = (static_cast<long>(k) - c) % static_cast<long>(n);
        if (idx < 0) idx += static_cast<long>(n);
        hx[static_cast<std::size_t>(idx)] += h[k];
    }
    std::vector<cplx> xx(x.begin(), x.end());
    fft::forward(xx);
    fft::forward(hx);
    for (std::size_t k = 0; k < n; ++k) xx[k] *= hx[k];
    fft::inverse(xx);
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = xx[k].real();
    return y;
}

}  // namespace elmlink
