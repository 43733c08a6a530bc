#pragma once

#include <complex>
#include <span>
#include <vector>

namespace elmlink::fft {

using cplx = std::complex<double>;

// Thin wrapper over FFTW. Plans are created once per size and shared; planning
// is serialized, execution is thread-safe. Unnormalized forward transform,
// inverse scaled by 1/n so that inverse(forward(x)) == x.
void forward(std::span<cplx> data);
void inverse(std::span<cplx> data);

std::vector<cplx> forward_copy(std::span<const cplx> data);
std::vector<cplx> inverse_copy(std::span<const cplx> data);

// Frequencies (Hz) of the FFT bins for n points at sample rate fs, in FFTW order.
std::vector<double> bin_frequencies(std::size_t n, double fs);

std::size_t next_pow2(std::size_t n);

}  // namespace elmlink::fft
