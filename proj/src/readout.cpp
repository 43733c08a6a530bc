#include "elmlink/readout.hpp"

#include "elmlink/errors.hpp"

#include <algorithm>
#include <cmath>

namespace elmlink {
namespace {

void check_taps(int taps) {
    if (taps < 1 || taps % 2 == 0) throw ParameterError("taps must be a positive odd integer");
}

// Rows [begin, begin+count) of the tapped feature matrix with window half-width h.
Eigen::MatrixXd tapped_rows(const StateMatrix& states, std::size_t begin, std::size_t count, int h, bool bias) {
    const Eigen::Index n = states.nodes();
    const Eigen::Index last = states.symbols() - 1;
    const Eigen::Index cols = (2 * h + 1) * n + (bias ? 1 : 0);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(count), cols);
    for (std::size_t r = 0; r < count; ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        const auto k = static_cast<Eigen::Index>(begin + r);
        for (int j = -h; j <= h; ++j) {
            const Eigen::Index src = std::clamp<Eigen::Index>(k + j, 0, last);
            out.block(row, (j + h) * n, 1, n) = states.values.row(src);
        }
        if (bias) out(row, cols - 1) = 1.0;
    }
    return out;
}

BerReport make_report(std::size_t errors, std::size_t bits) {
    BerReport r;
    r.bit_errors = errors;
    r.bits = bits;
    r.log10_ber_bound = bits ? std::log10(1.0 / static_cast<double>(bits)) : 0.0;
    if (errors > 0) r.log10_ber = std::log10(static_cast<double>(errors) / static_cast<double>(bits));
    r.hd_fec_pass = errors == 0 || r.log10_ber <= kHdFecLog10Ber;
    return r;
}

}  // namespace

void SplitSpec::validate(std::size_t record_symbols) const {
    if (train == 0 || test == 0) throw ParameterError("SplitSpec: train and test segments must be non-empty");
    if (end() > record_symbols) throw ParameterError("SplitSpec: segments exceed the record length");
}

Eigen::VectorXd RidgeModel::predict(const FeatureMatrix& x) const {
    if (x.values.cols() != weights.size()) throw ParameterError("RidgeModel::predict: feature width mismatch");
    return x.values * weights;
}

FeatureMatrix build_features(const StateMatrix& states, int taps) {
    check_taps(taps);
    if (states.symbols() < taps) throw ParameterError("build_features: fewer rows than taps");
    FeatureMatrix f;
    f.values = tapped_rows(states, 0, static_cast<std::size_t>(states.symbols()), taps / 2, true);
    f.has_bias = true;
    return f;
}

RidgeModel train_ridge(const FeatureMatrix& x, const Eigen::VectorXd& y, double lambda) {
    if (x.values.rows() != y.size()) throw ParameterError("train_ridge: row count differs from target length");
    if (!(lambda >= 0.0)) throw ParameterError("train_ridge: lambda must be >= 0");
    const Eigen::Index cols = x.values.cols();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(cols, cols);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x.values.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    const Eigen::Index regularized = x.has_bias ? cols - 1 : cols;
    for (Eigen::Index i = 0; i < regularized; ++i) gram(i, i) += lambda;
    const Eigen::VectorXd rhs = x.values.transpose() * y;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const Eigen::VectorXd d = ldlt.vectorD();
    const double d_max = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
    if (ldlt.info() != Eigen::Success || d.size() == 0 || !(d.minCoeff() > 1e-14 * d_max) || ldlt.rcond() < 1e-14)
        throw SimulationError("train_ridge: rank-deficient normal equations");
    RidgeModel model;
    model.weights = ldlt.solve(rhs);
    model.has_bias = x.has_bias;
    model.lambda = lambda;
    return model;
}

Pam4Symbols decide_pam4(std::span<const double> predictions) {
    std::vector<int> levels(predictions.size());
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        const double v = predictions[k];
        if (v <= -2.0) levels[k] = -3;
        else if (v <= 0.0) levels[k] = -1;
        else if (v <= 2.0) levels[k] = +1;
        else levels[k] = +3;
    }
    Pam4Symbols out;
    out.source_bits = gray_decode_pam4(levels);
    out.levels = std::move(levels);
    return out;
}

BerReport evaluate_ber(const Pam4Symbols& decided, const Pam4Symbols& truth, const SplitSpec& split) {
    if (decided.size() != truth.size()) throw ParameterError("evaluate_ber: length mismatch");
    split.validate(truth.size());
    const std::vector<int> d(decided.levels.begin() + static_cast<long>(split.test_begin()),
                             decided.levels.begin() + static_cast<long>(split.end()));
    const std::vector<int> t(truth.levels.begin() + static_cast<long>(split.test_begin()),
                             truth.levels.begin() + static_cast<long>(split.end()));
    const auto db = gray_decode_pam4(d);
    const auto tb = gray_decode_pam4(t);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < db.bits.size(); ++i) errors += db.bits[i] != tb.bits[i];
    return make_report(errors, db.bits.size());
}

Eigen::VectorXd levels_as_vector(const Pam4Symbols& symbols) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(symbols.size()));
    for (std::size_t k = 0; k < symbols.size(); ++k) v(static_cast<Eigen::Index>(k)) = symbols.levels[k];
    return v;
}

TapSelection tune_taps(const StateMatrix& states, const Pam4Symbols& truth, const SplitSpec& split,
                       int max_taps, double lambda) {
    check_taps(max_taps);
    if (static_cast<std::size_t>(states.symbols()) != truth.size())
        throw ParameterError("tune_taps: states and truth lengths differ");
    split.validate(truth.size());
    if (!(lambda > 0.0)) throw ParameterError("tune_taps: lambda must be > 0");

    const int h = max_taps / 2;
    const Eigen::Index n = states.nodes();
    const Eigen::MatrixXd z_train = tapped_rows(states, split.train_begin(), split.train, h, true);
    const Eigen::MatrixXd z_test = tapped_rows(states, split.test_begin(), split.test, h, true);
    const Eigen::Index cols = z_train.cols();
    const Eigen::Index bias = cols - 1;
    const Eigen::VectorXd y = levels_as_vector(truth).segment(static_cast<Eigen::Index>(split.train_begin()),
                                                              static_cast<Eigen::Index>(split.train));

    // Every smaller window is a contiguous column range of the widest one, so
    // one Gram matrix serves all tap counts.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(cols, cols);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(z_train.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    const Eigen::VectorXd rhs = z_train.transpose() * y;

    TapSelection best;
    bool have_best = false;
    for (int taps = 1; taps <= max_taps; taps += 2) {
        const int hh = taps / 2;
        const Eigen::Index start = (h - hh) * n;
        const Eigen::Index width = taps * n;
        const Eigen::Index m = width + 1;
        Eigen::MatrixXd a(m, m);
        a.topLeftCorner(width, width) = gram.block(start, start, width, width);
        a.block(0, width, width, 1) = gram.block(start, bias, width, 1);
        a.block(width, 0, 1, width) = gram.block(bias, start, 1, width);
        a(width, width) = gram(bias, bias);
        for (Eigen::Index i = 0; i < width; ++i) a(i, i) += lambda;
        Eigen::VectorXd b(m);
        b.head(width) = rhs.segment(start, width);
        b(width) = rhs(bias);

        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) throw SimulationError("tune_taps: normal equations not positive definite");
        const Eigen::VectorXd w = llt.solve(b);
        const Eigen::VectorXd pred = z_test.middleCols(start, width) * w.head(width) +
                                     Eigen::VectorXd::Constant(z_test.rows(), w(width));

        // Decide over the full record layout so evaluate_ber sees aligned indices.
        std::vector<int> decided_levels = truth.levels;
        const auto test_dec = decide_pam4(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())));
        std::copy(test_dec.levels.begin(), test_dec.levels.end(),
                  decided_levels.begin() + static_cast<long>(split.test_begin()));
        Pam4Symbols decided;
        decided.levels = std::move(decided_levels);
        const BerReport report = evaluate_ber(decided, truth, split);
        best.log10_ber_by_taps.push_back(report.log10_ber);

        if (!have_best || report.bit_errors < best.ber.bit_errors) {
            have_best = true;
            best.ber = report;
            best.model.weights = w;
            best.model.has_bias = true;
            best.model.taps = taps;
            best.model.lambda = lambda;
        }
    }
    return best;
}

}  // namespace elmlink
