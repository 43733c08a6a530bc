#pragma once

#include "elmlink/signal.hpp"
#include "elmlink/transmitter.hpp"

#include <cstdint>
#include <limits>

namespace elmlink {

inline constexpr double kInfiniteOsnr = std::numeric_limits<double>::infinity();

/// 0.1 nm expressed in Hz at 1545.5 nm.
double osnr_reference_bandwidth();

struct FiberParams {
    double length_km = 100.0;
    double beta2_ps2_per_km = -21.7;
    double gamma_per_w_km = 1.3;
    double alpha_db_per_km = 0.2;
    double step_km = 0.1;
    // Re-run at half the step and attach a warning when the outputs differ by
    // more than 1e-3 relative RMS. Doubles the cost.
    bool check_convergence = false;

    void validate() const;
};

struct LinkConfig {
    double launch_power_dbm = 6.5;
    double target_osnr_db = 35.9;      // kInfiniteOsnr: no noise loading
    double rx_filter_bw = 50e9;        // Hz, centered on the channel
    double pd_bandwidth = 40e9;        // Hz
    double adc_rate = 160e9;           // Hz
    double adc_enob = 5.5;
    // Neighbor-channel impairment stand-in: white noise power relative to the
    // signal and Gaussian nonlinear phase noise (rad rms). Both off by default.
    double neighbor_noise_ratio = 0.0;
    double neighbor_phase_noise_rad = 0.0;
    std::uint64_t noise_seed = 0xa5e;

    void validate(const TxConfig& tx) const;
};

/// Symmetric split-step Fourier solution of the scalar NLSE (periodic grid).
ComplexEnvelope propagate_ssmf(const ComplexEnvelope& env, const FiberParams& fp);

/// Exact frequency-domain dispersion operator exp(i beta2/2 w^2 L), w absolute.
ComplexEnvelope apply_dispersion(const ComplexEnvelope& env, double length_km, double beta2_ps2_per_km);

/// Scales the field to the given mean power.
ComplexEnvelope set_power_dbm(const ComplexEnvelope& env, double power_dbm);

/// Adds complex white Gaussian noise so that OSNR in 0.1 nm equals the target.
ComplexEnvelope amplify_noise_load(const ComplexEnvelope& env, double target_osnr_db, std::uint64_t seed);

/// Spectral OSNR estimate: noise density from bins outside
/// [band_lo - guard, band_hi + guard] (Hz relative to the grid).
double estimate_osnr_db(const ComplexEnvelope& env, double band_lo, double band_hi, double guard = 5e9);

/// Ideal rectangular optical band-pass around `center` (grid-relative Hz).
ComplexEnvelope optical_bandpass(const ComplexEnvelope& env, double center, double bandwidth);

/// Square-law detection followed by an ideal low-pass at pd_bandwidth.
/// Infinite bandwidth returns |E|^2 unfiltered.
SampledSignal photodetect(const ComplexEnvelope& env, double pd_bandwidth);

struct SyncResult {
    SampledSignal signal;   // 2 samples per symbol, sample 2k at symbol k's center
    double delay = 0.0;     // estimated delay of the input, in output (T/2) samples
    double peak_to_sidelobe = 0.0;
};

/// Resamples to 2 SpS, estimates the delay against the RRC-shaped reference by
/// cross-correlation (integer peak plus band-limited fractional refinement),
/// removes it, and returns exactly 2 * reference.size() samples.
SyncResult sync_and_downsample(const SampledSignal& sig, const Pam4Symbols& reference,
                               double baud, double beta);

/// Pair of integers p/q with p/q == target within 1e-9, denominators up to 10000.
std::pair<int, int> rational_ratio(double target);

}  // namespace elmlink
