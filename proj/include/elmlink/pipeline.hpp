#pragma once

#include "elmlink/benchmarks.hpp"
#include "elmlink/channel.hpp"
#include "elmlink/photonic_node.hpp"
#include "elmlink/readout.hpp"
#include "elmlink/transmitter.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace elmlink {

enum class Mode { Tdrc, Elm, Kk, RawLr };

Mode parse_mode(const std::string& name);
const char* to_string(Mode mode);

/// Everything that determines the received waveform.
struct LinkSetup {
    TxConfig tx;
    FiberParams fiber;
    LinkConfig link;
    SplitSpec split;
    std::size_t guard_symbols = 64;   // unused symbols before train and after test
    std::uint64_t data_seed = 1;

    /// Smallest record >= guard + split + guard that keeps every resampling
    /// ratio integral and the carrier on an FFT bin.
    std::size_t record_symbols() const;
};

struct LinkRecord {
    Pam4Symbols truth;
    SampledSignal detected;   // 2 samples per symbol, sample 2k at symbol k
    SplitSpec split;          // offset already includes the guard
    double measured_osnr_db = 0.0;
    double sync_peak_to_sidelobe = 0.0;
    std::vector<std::string> warnings;
};

/// Smallest S >= min_symbols for which the Tx grid, the ADC grid and the
/// 2 SpS grid all hold an integer number of samples and the carrier detune
/// is a multiple of the record's frequency resolution.
std::size_t periodic_record_length(std::size_t min_symbols, const TxConfig& tx, const LinkConfig& link);

/// Tx -> launch -> fiber -> noise loading -> Rx filter -> PD -> ADC -> timing.
LinkRecord simulate_link(const LinkSetup& setup);

struct ReadoutResult {
    BerReport ber;
    int taps = 0;
    std::vector<std::string> warnings;
};

/// Linear readout straight on the two received samples per symbol (scaled
/// to [0, 1] like the node input).
ReadoutResult evaluate_raw_lr(const LinkRecord& rec, int max_taps = 61, double lambda = 0.01,
                              StateMatrix* states_out = nullptr);

/// Photonic node (ELM or TDRC depending on nc.loop_closed) plus linear readout.
ReadoutResult evaluate_node(const LinkRecord& rec, const Mask& mask, const LaserParams& lp, const NodeConfig& nc,
                            int max_taps = 61, double lambda = 0.01, StateMatrix* states_out = nullptr);

KkConfig kk_config_for(const LinkSetup& setup);

ReadoutResult evaluate_kk(const LinkRecord& rec, const KkConfig& cfg);

}  // namespace elmlink
