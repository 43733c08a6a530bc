#include "elmlink/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace elmlink::fft {
namespace {

std::mutex plan_mutex;
std::map<std::pair<std::size_t, int>, fftw_plan> plans;

fftw_plan plan_for(std::size_t n, int sign) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_pair(n, sign);
    if (auto it = plans.find(key); it != plans.end()) return it->second;
    std::vector<cplx> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans.emplace(key, p);
    return p;
}

void execute(std::span<cplx> data, int sign) {
    if (data.empty()) return;
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan_for(data.size(), sign), buf, buf);
}

}  // namespace

void forward(std::span<cplx> data) { execute(data, FFTW_FORWARD); }

void inverse(std::span<cplx> data) {
    execute(data, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= scale;
}

std::vector<cplx> forward_copy(std::span<const cplx> data) {
    std::vector<cplx> out(data.begin(), data.end());
    forward(out);
    return out;
}

std::vector<cplx> inverse_copy(std::span<const cplx> data) {
    std::vector<cplx> out(data.begin(), data.end());
    inverse(out);
    return out;
}

std::vector<double> bin_frequencies(std::size_t n, double fs) {
    std::vector<double> f(n);
    const auto half = static_cast<long>((n - 1) / 2);
    for (std::size_t k = 0; k < n; ++k) {
        long idx = static_cast<long>(k);
        if (idx > half) idx -= static_cast<long>(n);
        f[k] = fs * static_cast<double>(idx) / static_cast<double>(n);
    }
    return f;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace elmlink::fft
