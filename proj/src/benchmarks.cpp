#include "elmlink/benchmarks.hpp"

#include "elmlink/channel.hpp"
#include "elmlink/errors.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace elmlink {
namespace {

double squared_pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd da = a.array() - a.mean();
    const Eigen::VectorXd db = b.array() - b.mean();
    const double va = da.squaredNorm();
    const double vb = db.squaredNorm();
    if (va <= 0.0 || vb <= 0.0) return 0.0;
    const double c = da.dot(db);
    return c * c / (va * vb);
}

}  // namespace

McReport memory_capacity_from_states(const StateMatrix& states, const std::vector<double>& input, int m_max,
                                     const SplitSpec& split, double lambda) {
    if (m_max < 0) throw ParameterError("memory_capacity: m_max must be >= 0");
    if (static_cast<std::size_t>(states.symbols()) != input.size())
        throw ParameterError("memory_capacity: states and input lengths differ");
    split.validate(input.size());
    if (split.train_begin() < static_cast<std::size_t>(m_max))
        throw ParameterError("memory_capacity: train segment must start at or after m_max");

    const Eigen::VectorXd col_var = (states.values.rowwise() - states.values.colwise().mean()).colwise().squaredNorm();
    if (col_var.maxCoeff() <= 0.0) throw SimulationError("memory_capacity: node response has zero variance");

    const FeatureMatrix all = build_features(states, 1);
    const auto tr0 = static_cast<Eigen::Index>(split.train_begin());
    const auto trn = static_cast<Eigen::Index>(split.train);
    const auto te0 = static_cast<Eigen::Index>(split.test_begin());
    const auto ten = static_cast<Eigen::Index>(split.test);
    FeatureMatrix train_x{all.values.middleRows(tr0, trn), true};
    FeatureMatrix test_x{all.values.middleRows(te0, ten), true};

    McReport report;
    for (int m = 0; m <= m_max; ++m) {
        Eigen::VectorXd y_train(trn), y_test(ten);
        for (Eigen::Index r = 0; r < trn; ++r) y_train(r) = input[static_cast<std::size_t>(tr0 + r - m)];
        for (Eigen::Index r = 0; r < ten; ++r) y_test(r) = input[static_cast<std::size_t>(te0 + r - m)];
        const RidgeModel model = train_ridge(train_x, y_train, lambda);
        const double r2 = squared_pearson(model.predict(test_x), y_test);
        report.per_step_correlation.push_back(r2);
        if (m >= 1) report.mc += r2;
    }
    return report;
}

SplitSpec memory_capacity_split(std::size_t record, int m_max, const McOptions& options) {
    SplitSpec split;
    split.offset = static_cast<std::size_t>(m_max);
    const std::size_t usable = record - split.offset;
    split.train = static_cast<std::size_t>(options.train_fraction * static_cast<double>(usable));
    split.buffer = options.buffer;
    if (split.train + split.buffer >= usable) throw ParameterError("memory_capacity: record too short");
    split.test = usable - split.train - split.buffer;
    return split;
}

McReport memory_capacity(const NodeConfig& nc, const LaserParams& lp, int m_max, const McOptions& options) {
    if (options.record < 5000) throw ParameterError("memory_capacity: record must hold >= 5000 inputs");
    std::mt19937_64 rng(options.input_seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> u(options.record);
    for (auto& v : u) v = uni(rng);

    SampledSignal input;
    input.sample_rate = 1.0;
    input.samples.resize(2 * u.size());
    for (std::size_t k = 0; k < u.size(); ++k) input.samples[2 * k] = input.samples[2 * k + 1] = u[k];

    const Mask mask = build_mask(nc.n_nodes, options.mask_seed);
    const StateMatrix states = run_node(input, mask, lp, nc);
    return memory_capacity_from_states(states, u, m_max, memory_capacity_split(options.record, m_max, options),
                                       options.lambda);
}

void KkConfig::validate() const {
    if (upsample_factor < 2) throw ParameterError("KkConfig: upsample_factor must be >= 2");
    if (ffe_taps < 1) throw ParameterError("KkConfig: ffe_taps must be >= 1");
    if (!(baud > 0.0)) throw ParameterError("KkConfig: baud must be positive");
    if (!(intensity_floor > 0.0 && intensity_floor < 1.0))
        throw ParameterError("KkConfig: intensity_floor must be in (0, 1)");
}

ComplexEnvelope kk_reconstruct(const SampledSignal& intensity, const KkConfig& cfg) {
    cfg.validate();
    intensity.validate();
    SampledSignal up = resample(intensity, cfg.upsample_factor, 1, cfg.edges);
    double mean = 0.0;
    for (double v : up.samples) mean += v;
    mean /= static_cast<double>(up.size());
    if (!(mean > 0.0)) throw ParameterError("kk_reconstruct: intensity must have a positive mean");

    const double floor = cfg.intensity_floor * mean;
    std::size_t clamped = 0;
    std::vector<double> log_amp(up.size());
    for (std::size_t k = 0; k < up.size(); ++k) {
        if (up.samples[k] < floor) {
            up.samples[k] = floor;
            ++clamped;
        }
        log_amp[k] = 0.5 * std::log(up.samples[k]);
    }
    const auto h = hilbert(log_amp, cfg.edges);
    const double sign = cfg.sideband == Sideband::Upper ? 1.0 : -1.0;

    ComplexEnvelope out;
    out.sample_rate = up.sample_rate;
    out.center_frequency_offset = cfg.carrier_detune;
    out.warnings = up.warnings;
    out.samples.resize(up.size());
    for (std::size_t k = 0; k < up.size(); ++k)
        out.samples[k] = std::polar(std::sqrt(up.samples[k]), sign * h[k]);
    // The true field is not available here; a weak recovered carrier is the
    // usual symptom of a field that was not minimum-phase.
    cplx carrier(0.0, 0.0);
    for (const auto& v : out.samples) carrier += v;
    carrier /= static_cast<double>(out.samples.size());
    double spread = 0.0;
    for (const auto& v : out.samples) spread += std::norm(v - carrier);
    spread /= static_cast<double>(out.samples.size());
    const double est_cspr_db = spread > 0.0 ? 10.0 * std::log10(std::norm(carrier) / spread)
                                            : std::numeric_limits<double>::infinity();
    if (clamped > 0)
        out.warnings.push_back("kk_reconstruct: " + std::to_string(clamped) + " samples clamped; input is not minimum-phase");
    else if (check_minimum_phase(out, 0.0) != 0)
        out.warnings.push_back("kk_reconstruct: reconstructed field winds around the origin");
    else if (est_cspr_db < kKkMinCsprDb)
        out.warnings.push_back("kk_reconstruct: recovered CSPR " + std::to_string(est_cspr_db) +
                               " dB; field is probably not minimum-phase");
    return out;
}

ComplexEnvelope cd_compensate(const ComplexEnvelope& env, double length_km, double beta2_ps2_per_km) {
    return apply_dispersion(env, length_km, -beta2_ps2_per_km);
}

FfeResult ffe_train_apply(const SampledSignal& sig, const Pam4Symbols& truth, int n_taps, const SplitSpec& split) {
    if (n_taps < 1) throw ParameterError("ffe_train_apply: n_taps must be >= 1");
    if (sig.size() != 2 * truth.size()) throw ParameterError("ffe_train_apply: input must be 2 samples per symbol");
    split.validate(truth.size());
    const long len = static_cast<long>(sig.size());
    const long center = n_taps / 2;
    const auto row = [&](std::size_t k, auto&& r) {
        for (int j = 0; j < n_taps; ++j) {
            long idx = (2 * static_cast<long>(k) + j - center) % len;
            if (idx < 0) idx += len;
            r(j) = sig.samples[static_cast<std::size_t>(idx)];
        }
        r(n_taps) = 1.0;
    };

    Eigen::MatrixXd a(static_cast<Eigen::Index>(split.train), n_taps + 1);
    Eigen::VectorXd y(static_cast<Eigen::Index>(split.train));
    for (std::size_t r = 0; r < split.train; ++r) {
        row(split.train_begin() + r, a.row(static_cast<Eigen::Index>(r)));
        y(static_cast<Eigen::Index>(r)) = truth.levels[split.train_begin() + r];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-12);
    if (qr.rank() < a.cols()) throw SimulationError("ffe_train_apply: singular training matrix");
    const Eigen::VectorXd w = qr.solve(y);

    FfeResult result;
    result.taps = w.head(n_taps);
    result.bias = w(n_taps);
    result.signal.sample_rate = sig.sample_rate / 2.0;
    result.signal.samples.resize(truth.size());
    Eigen::RowVectorXd r(n_taps + 1);
    for (std::size_t k = 0; k < truth.size(); ++k) {
        row(k, r);
        result.signal.samples[k] = r.dot(w);
    }
    return result;
}

BerReport kk_receiver_pipeline(const SampledSignal& detected, const KkConfig& cfg, const Pam4Symbols& truth,
                               const SplitSpec& split) {
    ComplexEnvelope field = kk_reconstruct(detected, cfg);
    field = cd_compensate(field, cfg.cd_length_km, cfg.cd_beta2_ps2_per_km);

    // Carrier to the positive real axis, then remove it; the real part of the
    // single-sideband remainder is the transmitted drive.
    cplx carrier(0.0, 0.0);
    for (const auto& v : field.samples) carrier += v;
    carrier /= static_cast<double>(field.size());
    const cplx derotate = std::abs(carrier) > 0.0 ? std::conj(carrier) / std::abs(carrier) : cplx(1.0, 0.0);
    std::vector<double> drive(field.size());
    for (std::size_t k = 0; k < field.size(); ++k) drive[k] = ((field.samples[k] - carrier) * derotate).real();

    const int sps = static_cast<int>(std::lround(field.sample_rate / cfg.baud));
    const auto taps = rrc_taps(cfg.matched_beta, 32, sps);
    SampledSignal matched(cfg.edges == EdgeMode::Periodic ? convolve_circular(drive, taps) : convolve_same(drive, taps),
                          field.sample_rate);

    const SyncResult timed = sync_and_downsample(matched, truth, cfg.baud, cfg.matched_beta);
    const FfeResult eq = ffe_train_apply(timed.signal, truth, cfg.ffe_taps, split);
    const Pam4Symbols decided = decide_pam4(eq.signal.samples);
    return evaluate_ber(decided, truth, split);
}

}  // namespace elmlink
