#pragma once

#include "elmlink/signal.hpp"
#include "elmlink/state_matrix.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace elmlink {

/// Input mask: N values in [0, 1], shared by every symbol.
struct Mask {
    std::vector<double> values;
    std::uint64_t seed = 0;

    std::size_t size() const { return values.size(); }
};

/// How masked symbols are laid out against the delay (see schedule_drive).
///  A: one symbol per delay, loop closed     B: one symbol per delay, loop open
///  C: n = floor(tau/tau_m) per delay, closed D: contiguous, open
enum class EncodingMethod { A, B, C, D };

EncodingMethod parse_encoding_method(const std::string& name);
const char* to_string(EncodingMethod method);

/// Single-mode semiconductor laser (response laser) parameters.
struct LaserParams {
    double bias_current_ma = 10.1;
    double threshold_current_ma = 10.2;
    double linewidth_enhancement = 3.0;
    double photon_lifetime_ps = 2.0;
    double carrier_lifetime_ns = 2.0;
    double injection_coupling_per_s = 1.0e11;
    double emission_wavelength_nm = 1545.5;
    double differential_gain_per_s = 1.2e4;   // per carrier
    double gain_saturation = 0.0;             // per photon
    double spontaneous_emission_factor = 1e-6;

    void validate() const;
    double threshold_carriers() const;
    double transparency_carriers() const;
};

struct NodeConfig {
    double theta_ps = 62.5;
    double tau_ns = 24.5;
    int n_nodes = 20;
    double delta_f_ghz = -12.0;               // f_drive - f_response
    double feedback_ratio = 0.0;              // returned / emitted power
    bool loop_closed = false;
    double feedback_phase_rad = 0.0;
    double injection_power_uw = 96.0;
    int averages = 1;
    EncodingMethod method = EncodingMethod::D;
    int substeps = 16;                        // RK4 steps per theta
    double drive_bandwidth_ghz = 20.0;        // RF amplifier + modulator
    double detection_bandwidth_ghz = 40.0;    // photoreceiver
    double detection_noise = 0.01;            // rms, relative to the mean detected power
    double detection_reference_uw = 0.0;      // pins that mean; 0: the record's own mean
    bool spontaneous_noise = true;
    std::uint64_t noise_seed = 0x6e6f6465;

    void validate() const;
    double effective_feedback() const { return loop_closed ? feedback_ratio : 0.0; }
    long slots_per_delay() const;
};

/// Drive sequence on the theta grid; symbol k occupies slots
/// [symbol_boundaries[k], symbol_boundaries[k] + nodes_per_symbol).
struct DriveWaveform {
    std::vector<double> values;
    std::vector<std::size_t> symbol_boundaries;
    std::size_t nodes_per_symbol = 0;
    double theta_ps = 62.5;
    // True when every symbol is followed by idle time up to the next delay period.
    bool padded = false;
    // Drive rms that maps to nc.injection_power_uw. 0: use the rms of this
    // waveform's data slots, which ties the gain to the whole record.
    double reference_rms = 0.0;

    double duration_ns() const { return static_cast<double>(values.size()) * theta_ps * 1e-3; }
    void validate() const;
};

Mask build_mask(int n, std::uint64_t seed);

/// rms of the drive over data slots (idle padding excluded).
double data_rms(const DriveWaveform& drive);

/// Sample 0 of each symbol is multiplied by mask[0, N/2), sample 1 by mask[N/2, N).
DriveWaveform mask_symbols(const SampledSignal& samples_2sps, const Mask& mask, double theta_ps = 62.5);

/// Lays masked symbols out per encoding method (idle slots carry zero drive).
DriveWaveform schedule_drive(const DriveWaveform& masked, EncodingMethod method, double tau_ns);

/// Symbols per delay period for the packed layout.
std::size_t symbols_per_delay(double tau_ns, std::size_t nodes, double theta_ps);

struct LaserRunOptions {
    // Pre-loads the delay line (field samples on the substep grid, oldest first).
    std::optional<std::vector<cplx>> initial_history;
};

/// Integrates the injected response laser with fixed-step RK4 on a theta/substeps
/// grid. Returns emitted power (uW) at the end of every substep.
SampledSignal simulate_laser(const DriveWaveform& drive, const LaserParams& lp, const NodeConfig& nc,
                             const LaserRunOptions& options = {});

/// One detected sample per virtual node (end of each theta slot) after the
/// photoreceiver low-pass, averaged over nc.averages detection-noise draws.
StateMatrix extract_states(const SampledSignal& intensity, const NodeConfig& nc, const DriveWaveform& schedule);

/// Maps a record linearly onto [0, 1] using its min and max.
SampledSignal normalize_unit_range(const SampledSignal& sig);

/// mask -> schedule -> laser -> states for a 2 SpS input already in [0, 1].
StateMatrix run_node(const SampledSignal& input_2sps, const Mask& mask, const LaserParams& lp, const NodeConfig& nc);

}  // namespace elmlink
