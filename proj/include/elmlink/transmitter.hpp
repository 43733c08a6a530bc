#pragma once

#include "elmlink/signal.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace elmlink {

struct BitStream {
    std::vector<std::uint8_t> bits;
};

/// PAM-4 levels in {-3, -1, +1, +3}, Gray-mapped from `source_bits`.
struct Pam4Symbols {
    std::vector<int> levels;
    BitStream source_bits;

    std::size_t size() const { return levels.size(); }
};

struct TxConfig {
    double baud = 56e9;
    double beta = 0.1;
    double carrier_detune = 24.5e9;   // Hz, carrier above the channel center
    double cspr_db = 9.0;             // +inf: carrier only, -inf: no carrier
    double dac_enob = 5.5;            // kInfiniteEnob disables the converter model
    double preemph_corner = 20e9;     // Hz; <= 0 disables pre-emphasis and the DAC/MZM roll-off
    int sps = 4;
    int rrc_span = 32;
    double output_power = 1e-3;       // W
    std::uint64_t dac_seed = 0x5eed;

    void validate() const;
};

BitStream random_bits(std::size_t count, std::uint64_t seed);

/// 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
Pam4Symbols gray_encode_pam4(const BitStream& bits);
BitStream gray_decode_pam4(const std::vector<int>& levels);

/// Pre-emphasized, converter-limited RRC drive at cfg.sps samples per symbol (periodic record).
SampledSignal shape_drive(const Pam4Symbols& symbols, const TxConfig& cfg);

/// Single-sideband optical field: lower sideband of the drive plus a carrier
/// tone at +cfg.carrier_detune. The grid is referenced to the channel center.
ComplexEnvelope shape_and_ssb(const Pam4Symbols& symbols, const TxConfig& cfg);

/// Net number of times the field trajectory encircles the origin in the frame
/// of a carrier at `carrier_frequency` (Hz relative to the grid). Zero means
/// the minimum-phase condition holds.
int check_minimum_phase(const ComplexEnvelope& env, double carrier_frequency);

/// Same, with the carrier located at the strongest spectral line.
int check_minimum_phase(const ComplexEnvelope& env);

/// Frequency of the strongest spectral line, Hz relative to the grid.
double dominant_frequency(const ComplexEnvelope& env);

}  // namespace elmlink
