#pragma once

#include "elmlink/photonic_node.hpp"
#include "elmlink/readout.hpp"
#include "elmlink/signal.hpp"
#include "elmlink/transmitter.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace elmlink {

// ---------------------------------------------------------------------------
// Linear memory capacity

struct McReport {
    std::vector<double> per_step_correlation;   // m = 0 .. m_max
    double mc = 0.0;                            // sum over m = 1 .. m_max
};

struct McOptions {
    std::size_t record = 6000;
    std::uint64_t mask_seed = 1;
    std::uint64_t input_seed = 7;
    double lambda = 0.01;
    double train_fraction = 0.6;
    std::size_t buffer = 100;
};

/// Squared Pearson correlation between the ridge prediction of u(k - m) from
/// the states of symbol k (single tap) and the delayed input, on the test rows.
McReport memory_capacity_from_states(const StateMatrix& states, const std::vector<double>& input, int m_max,
                                     const SplitSpec& split, double lambda = 0.01);

/// Drives the node with i.i.d. uniform inputs through the same masking and
/// scheduling path used for the transmission task.
McReport memory_capacity(const NodeConfig& nc, const LaserParams& lp, int m_max = 10, const McOptions& options = {});

/// Default train/buffer/test layout used by memory_capacity for a record.
SplitSpec memory_capacity_split(std::size_t record, int m_max, const McOptions& options);

// ---------------------------------------------------------------------------
// Kramers-Kronig receiver chain

enum class Sideband { Upper, Lower };

struct KkConfig {
    int upsample_factor = 4;
    double cd_length_km = 100.0;
    double cd_beta2_ps2_per_km = -21.7;
    int ffe_taps = 48;
    double matched_beta = 0.1;
    double baud = 56e9;
    double carrier_detune = 24.5e9;
    Sideband sideband = Sideband::Lower;
    double intensity_floor = 1e-3;   // clamp level before the log, relative to the mean intensity
    EdgeMode edges = EdgeMode::Periodic;

    void validate() const;
};

/// Below this recovered carrier-to-signal ratio kk_reconstruct warns.
inline constexpr double kKkMinCsprDb = 5.0;

/// Field (carrier at DC, offset = carrier_detune) recovered from a minimum-phase intensity.
ComplexEnvelope kk_reconstruct(const SampledSignal& intensity, const KkConfig& cfg);

/// Inverse of dispersion-only propagation over `length_km`.
ComplexEnvelope cd_compensate(const ComplexEnvelope& env, double length_km, double beta2_ps2_per_km);

struct FfeResult {
    SampledSignal signal;           // one sample per symbol
    Eigen::VectorXd taps;
    double bias = 0.0;
};

/// T/2-spaced least-squares FFE trained on the train segment against the
/// symbol levels; the record is treated as circular.
FfeResult ffe_train_apply(const SampledSignal& sig, const Pam4Symbols& truth, int n_taps, const SplitSpec& split);

/// KK -> CD compensation -> matched filter -> timing -> FFE -> slicer -> BER.
BerReport kk_receiver_pipeline(const SampledSignal& detected, const KkConfig& cfg, const Pam4Symbols& truth,
                               const SplitSpec& split);

}  // namespace elmlink
