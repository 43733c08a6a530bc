#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace elmlink {

using cplx = std::complex<double>;

/// Real-valued sampled stream (photocurrent, ADC output, laser intensity).
struct SampledSignal {
    std::vector<double> samples;
    double sample_rate = 0.0;  // Hz
    std::vector<std::string> warnings;

    SampledSignal() = default;
    SampledSignal(std::vector<double> s, double fs);

    std::size_t size() const { return samples.size(); }
    /// Throws ParameterError when sample_rate <= 0 or a sample is not finite.
    void validate() const;
};

/// Complex optical field in units of sqrt(W).
///
/// `center_frequency_offset` is the absolute optical frequency of the grid's
/// DC bin, measured from the channel center. Operators that depend on
/// absolute frequency (dispersion) use it; a field downshifted to its carrier
/// carries the carrier offset here.
struct ComplexEnvelope {
    std::vector<cplx> samples;
    double sample_rate = 0.0;               // Hz
    double center_frequency_offset = 0.0;   // Hz
    std::vector<std::string> warnings;

    ComplexEnvelope() = default;
    ComplexEnvelope(std::vector<cplx> s, double fs, double offset = 0.0);

    std::size_t size() const { return samples.size(); }
    double power() const;  // mean |E|^2, W
    void validate() const;
};

/// How transform-based operators treat record edges.
enum class EdgeMode {
    Periodic,   // record is one period of a circular signal
    Symmetric,  // extrapolated padding before transforming, crop afterwards
};

inline constexpr double kInfiniteEnob = std::numeric_limits<double>::infinity();

/// Unit-energy root-raised-cosine FIR, length span*sps + 1.
std::vector<double> rrc_taps(double beta, int span, int sps);

/// Closed-form RRC impulse response at time t (in symbol periods), unit symbol period.
double rrc_impulse(double t, double beta);

/// Band-limited rational resampling by p/q (FFT method).
///
/// Periodic mode requires size*p/q to be an integer and is exact for
/// band-limited periodic records. Symmetric mode pads both ends (linear
/// prediction, or odd reflection when that diverges) before the transform and
/// returns floor(size*p/q) samples.
SampledSignal resample(const SampledSignal& sig, int p, int q, EdgeMode edges = EdgeMode::Symmetric);
ComplexEnvelope resample(const ComplexEnvelope& env, int p, int q, EdgeMode edges = EdgeMode::Symmetric);

struct QuantizerSpec {
    double enob = 5.5;
    // Half-range of the converter around `center`. Non-positive means "use 4 sigma".
    double full_scale = 0.0;
    // Converter mid-point; NaN means "use the signal mean".
    double center = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
};

/// Finite-resolution converter: uniform mid-rise quantizer plus white noise
/// topping the error up to the 6.02*enob + 1.76 dB full-scale-sine SNDR.
/// Records clipping above 1% as a warning on the returned signal.
SampledSignal quantize_enob(const SampledSignal& sig, const QuantizerSpec& spec);

/// Number of quantizer levels used for a given ENOB.
long quantizer_levels(double enob);

/// Analytic-signal helpers via FFT sign-flip.
std::vector<double> hilbert(const std::vector<double>& x, EdgeMode edges = EdgeMode::Periodic);

/// Applies a zero-phase frequency response H(f) to a real record (periodic).
template <typename Response>
std::vector<double> filter_frequency(const std::vector<double>& x, double fs, Response&& response);

/// Linear convolution, output aligned to the filter center ("same" length).
std::vector<double> convolve_same(const std::vector<double>& x, const std::vector<double>& h);

/// Circular convolution centered on the filter midpoint.
std::vector<double> convolve_circular(const std::vector<double>& x, const std::vector<double>& h);

}  // namespace elmlink

#include "elmlink/fft.hpp"

template <typename Response>
std::vector<double> elmlink::filter_frequency(const std::vector<double>& x, double fs, Response&& response) {
    std::vector<cplx> spec(x.begin(), x.end());
    fft::forward(spec);
    const auto freqs = fft::bin_frequencies(spec.size(), fs);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= response(freqs[k]);
    fft::inverse(spec);
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = spec[k].real();
    return out;
}
