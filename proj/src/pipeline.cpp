#include "elmlink/pipeline.hpp"

#include "elmlink/errors.hpp"

#include <cmath>
#include <algorithm>
#include <random>

namespace elmlink {
namespace {

bool is_integer(double x) { return std::abs(x - std::round(x)) < 1e-9 * std::max(1.0, std::abs(x)); }

}  // namespace

Mode parse_mode(const std::string& name) {
    if (name == "tdrc") return Mode::Tdrc;
    if (name == "elm") return Mode::Elm;
    if (name == "kk") return Mode::Kk;
    if (name == "raw_lr") return Mode::RawLr;
    throw ParameterError("unknown mode '" + name + "' (expected tdrc, elm, kk or raw_lr)");
}

const char* to_string(Mode mode) {
    switch (mode) {
        case Mode::Tdrc: return "tdrc";
        case Mode::Elm: return "elm";
        case Mode::Kk: return "kk";
        case Mode::RawLr: return "raw_lr";
    }
    return "?";
}

std::size_t periodic_record_length(std::size_t min_symbols, const TxConfig& tx, const LinkConfig& link) {
    tx.validate();
    const double fs = tx.baud * tx.sps;
    const auto [p, q] = rational_ratio(link.adc_rate / fs);
    const auto [p2, q2] = rational_ratio(2.0 * tx.baud / link.adc_rate);
    for (std::size_t s = std::max<std::size_t>(min_symbols, 1); s < min_symbols + 1000000; ++s) {
        const double tx_len = static_cast<double>(s) * tx.sps;
        const double adc_len = tx_len * p / q;
        if (!is_integer(adc_len)) continue;
        if (!is_integer(std::round(adc_len) * p2 / q2)) continue;
        if (!is_integer(tx.carrier_detune * tx_len / fs)) continue;
        return s;
    }
    throw ParameterError("periodic_record_length: no admissible record length found");
}

std::size_t LinkSetup::record_symbols() const {
    return periodic_record_length(split.train + split.buffer + split.test + 2 * guard_symbols, tx, link);
}

LinkRecord simulate_link(const LinkSetup& setup) {
    setup.tx.validate();
    setup.fiber.validate();
    setup.link.validate(setup.tx);

    LinkRecord rec;
    const std::size_t n_symbols = setup.record_symbols();
    rec.truth = gray_encode_pam4(random_bits(2 * n_symbols, setup.data_seed));
    rec.split = setup.split;
    rec.split.offset = setup.guard_symbols;
    rec.split.validate(n_symbols);

    ComplexEnvelope field = shape_and_ssb(rec.truth, setup.tx);
    field = set_power_dbm(field, setup.link.launch_power_dbm);
    field = propagate_ssmf(field, setup.fiber);
    if (setup.link.neighbor_noise_ratio > 0.0 || setup.link.neighbor_phase_noise_rad > 0.0) {
        std::mt19937_64 rng(setup.link.noise_seed ^ 0x9e3779b97f4a7c15ULL);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double sigma = std::sqrt(field.power() * setup.link.neighbor_noise_ratio / 2.0);
        for (auto& v : field.samples) {
            const double phi = setup.link.neighbor_phase_noise_rad * gauss(rng);
            v = v * std::polar(1.0, phi) + cplx(sigma * gauss(rng), sigma * gauss(rng));
        }
    }
    field = amplify_noise_load(field, setup.link.target_osnr_db, setup.link.noise_seed);

    const double band_hi = setup.tx.carrier_detune;
    const double band_lo = band_hi - setup.tx.baud * (1.0 + setup.tx.beta);
    rec.measured_osnr_db = std::isfinite(setup.link.target_osnr_db) ? estimate_osnr_db(field, band_lo, band_hi)
                                                                     : kInfiniteOsnr;

    field = optical_bandpass(field, 0.0, setup.link.rx_filter_bw);
    SampledSignal pd = photodetect(field, setup.link.pd_bandwidth);

    const double fs = setup.tx.baud * setup.tx.sps;
    const auto [p, q] = rational_ratio(setup.link.adc_rate / fs);
    SampledSignal adc = resample(pd, p, q, EdgeMode::Periodic);
    if (std::isfinite(setup.link.adc_enob)) {
        QuantizerSpec qs;
        qs.enob = setup.link.adc_enob;
        qs.seed = setup.link.noise_seed + 1;
        adc = quantize_enob(adc, qs);
    }

    SyncResult synced = sync_and_downsample(adc, rec.truth, setup.tx.baud, setup.tx.beta);
    rec.detected = std::move(synced.signal);
    rec.sync_peak_to_sidelobe = synced.peak_to_sidelobe;
    rec.warnings = field.warnings;
    rec.warnings.insert(rec.warnings.end(), adc.warnings.begin(), adc.warnings.end());
    rec.warnings.insert(rec.warnings.end(), rec.detected.warnings.begin(), rec.detected.warnings.end());
    return rec;
}

ReadoutResult evaluate_raw_lr(const LinkRecord& rec, int max_taps, double lambda, StateMatrix* states_out) {
    const std::size_t s = rec.truth.size();
    const SampledSignal x = normalize_unit_range(rec.detected);
    StateMatrix states;
    states.values.resize(static_cast<Eigen::Index>(s), 2);
    for (std::size_t k = 0; k < s; ++k) {
        states.values(static_cast<Eigen::Index>(k), 0) = x.samples[2 * k];
        states.values(static_cast<Eigen::Index>(k), 1) = x.samples[2 * k + 1];
    }
    const TapSelection sel = tune_taps(states, rec.truth, rec.split, max_taps, lambda);
    if (states_out) *states_out = states;
    return {sel.ber, sel.model.taps, {}};
}

ReadoutResult evaluate_node(const LinkRecord& rec, const Mask& mask, const LaserParams& lp, const NodeConfig& nc,
                            int max_taps, double lambda, StateMatrix* states_out) {
    const SampledSignal drive = normalize_unit_range(rec.detected);
    const StateMatrix states = run_node(drive, mask, lp, nc);
    const TapSelection sel = tune_taps(states, rec.truth, rec.split, max_taps, lambda);
    if (states_out) *states_out = states;
    return {sel.ber, sel.model.taps, {}};
}

KkConfig kk_config_for(const LinkSetup& setup) {
    KkConfig cfg;
    cfg.cd_length_km = setup.fiber.length_km;
    cfg.cd_beta2_ps2_per_km = setup.fiber.beta2_ps2_per_km;
    cfg.matched_beta = setup.tx.beta;
    cfg.baud = setup.tx.baud;
    cfg.carrier_detune = setup.tx.carrier_detune;
    cfg.sideband = Sideband::Lower;
    cfg.edges = EdgeMode::Periodic;
    return cfg;
}

ReadoutResult evaluate_kk(const LinkRecord& rec, const KkConfig& cfg) {
    ReadoutResult out;
    out.ber = kk_receiver_pipeline(rec.detected, cfg, rec.truth, rec.split);
    out.taps = cfg.ffe_taps;
    return out;
}

}  // namespace elmlink
