#include <doctest.h>

#include "elmlink/errors.hpp"
#include "elmlink/readout.hpp"
#include "elmlink/transmitter.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

using namespace elmlink;

namespace {

// Ridge with an unpenalized last column, solved as an augmented least-squares
// problem by SVD (no normal equations).
Eigen::VectorXd oracle_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
    const auto n = x.rows();
    const auto p = x.cols();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + p, p);
    a.topRows(n) = x;
    for (Eigen::Index j = 0; j + 1 < p; ++j) a(n + j, j) = std::sqrt(lambda);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + p);
    b.head(n) = y;
    return a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
}

Pam4Symbols random_symbols(std::size_t count, std::uint64_t seed) {
    return gray_encode_pam4(random_bits(2 * count, seed));
}

StateMatrix random_states(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    StateMatrix s;
    s.values.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) s.values(i, j) = g(rng);
    return s;
}

}  // namespace

TEST_CASE("split bookkeeping") {
    SplitSpec sp;
    CHECK(sp.test_begin() == 17000);
    CHECK(sp.end() == 29000);
    CHECK_NOTHROW(sp.validate(29000));
    CHECK_THROWS_AS(sp.validate(28999), ParameterError);
    sp.offset = 64;
    CHECK(sp.train_begin() == 64);
    CHECK(sp.end() == 29064);
}

TEST_CASE("feature assembly") {
    const auto st = random_states(30, 20, 1);
    const auto f1 = build_features(st, 1);
    CHECK(f1.values.cols() == 21);
    CHECK(f1.has_bias);
    CHECK(f1.values.leftCols(20) == st.values);
    CHECK((f1.values.col(20).array() == 1.0).all());

    const auto f3 = build_features(st, 3);
    CHECK(f3.values.cols() == 61);
    CHECK(f3.values.row(10).segment(0, 20) == st.values.row(9));
    CHECK(f3.values.row(10).segment(20, 20) == st.values.row(10));
    CHECK(f3.values.row(10).segment(40, 20) == st.values.row(11));
    // Edge rows replicate the terminal state row.
    CHECK(f3.values.row(0).segment(0, 20) == st.values.row(0));
    CHECK(f3.values.row(29).segment(40, 20) == st.values.row(29));
    CHECK_THROWS_AS(build_features(st, 2), ParameterError);
}

TEST_CASE("ridge regression against an SVD oracle") {
    FeatureMatrix id;
    id.values = Eigen::MatrixXd::Identity(6, 6);
    Eigen::VectorXd y(6);
    y << 1, -2, 3, 0.5, -1, 2;
    const auto m = train_ridge(id, y, 0.0);
    CHECK((m.weights - y).cwiseAbs().maxCoeff() < 1e-14);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    FeatureMatrix x;
    x.values.resize(50, 10);
    x.has_bias = true;
    for (Eigen::Index i = 0; i < 50; ++i) {
        for (Eigen::Index j = 0; j < 9; ++j) x.values(i, j) = g(rng);
        x.values(i, 9) = 1.0;
    }
    Eigen::VectorXd t(50);
    for (auto& v : t) v = g(rng) + 3.0;
    for (double lambda : {0.0, 0.01, 1.0, 100.0}) {
        const auto fit = train_ridge(x, t, lambda);
        CHECK((fit.weights - oracle_ridge(x.values, t, lambda)).cwiseAbs().maxCoeff() < 1e-8);
        // Normal equation residual with the unpenalized bias.
        Eigen::VectorXd pen = Eigen::VectorXd::Constant(10, lambda);
        pen(9) = 0.0;
        const Eigen::VectorXd r = x.values.transpose() * (x.values * fit.weights - t) + pen.cwiseProduct(fit.weights);
        CHECK(r.norm() < 1e-8 * (x.values.transpose() * t).norm());
    }
    const auto big = train_ridge(x, t, 1e12);
    CHECK(big.weights.head(9).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(big.weights(9) == doctest::Approx(t.mean()).epsilon(1e-6));

    FeatureMatrix rank_def;
    rank_def.values = Eigen::MatrixXd::Ones(10, 3);
    CHECK_THROWS_AS(train_ridge(rank_def, Eigen::VectorXd::Ones(10), 0.0), SimulationError);
    CHECK_THROWS_AS(train_ridge(x, Eigen::VectorXd::Ones(3), 0.01), ParameterError);
    CHECK_THROWS_AS(train_ridge(x, t, -1.0), ParameterError);
}

TEST_CASE("pam4 decisions") {
    const std::vector<double> p{0.9, -3.7, 0.0, -2.0, 2.0, 2.0001, 7.0, -1.0};
    CHECK(decide_pam4(p).levels == std::vector<int>{1, -3, -1, -3, 1, 3, 3, -1});
    const std::vector<double> lv{-3, -1, 1, 3};
    CHECK(decide_pam4(lv).levels == std::vector<int>{-3, -1, 1, 3});
}

TEST_CASE("ber accounting") {
    SplitSpec sp;
    sp.train = 100;
    sp.buffer = 10;
    sp.test = 12000;
    const auto truth = random_symbols(sp.end(), 3);
    const auto same = evaluate_ber(truth, truth, sp);
    CHECK(same.bit_errors == 0);
    CHECK(same.bits == 24000);
    CHECK(same.hd_fec_pass);
    CHECK(std::isinf(same.log10_ber));
    CHECK(same.log10_ber_bound == doctest::Approx(std::log10(1.0 / 24000.0)));

    // One adjacent-level slip inside the test segment = one bit.
    auto one = truth;
    const std::size_t k = sp.test_begin() + 5;
    one.levels[k] = one.levels[k] == 3 ? 1 : one.levels[k] + 2;
    const auto r1 = evaluate_ber(one, truth, sp);
    CHECK(r1.bit_errors == 1);
    CHECK(r1.log10_ber == doctest::Approx(-4.3802).epsilon(1e-4));

    // Errors in the train segment are not counted.
    auto train_err = truth;
    train_err.levels[3] = -train_err.levels[3];
    CHECK(evaluate_ber(train_err, truth, sp).bit_errors == 0);

    // 1% errors -> log10 BER = -2 fails the HD-FEC limit.
    auto many = truth;
    for (std::size_t i = 0; i < 240; ++i) {
        auto& v = many.levels[sp.test_begin() + 50 * i];
        v = v == 3 ? 1 : v + 2;
    }
    const auto r2 = evaluate_ber(many, truth, sp);
    CHECK(r2.log10_ber == doctest::Approx(-2.0));
    CHECK_FALSE(r2.hd_fec_pass);

    // Same permutation of both streams leaves the count unchanged.
    std::vector<std::size_t> perm(sp.test);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
    auto pt = truth, pm = many;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        pt.levels[sp.test_begin() + i] = truth.levels[sp.test_begin() + perm[i]];
        pm.levels[sp.test_begin() + i] = many.levels[sp.test_begin() + perm[i]];
    }
    CHECK(evaluate_ber(pm, pt, sp).bit_errors == r2.bit_errors);

    auto short_truth = truth;
    short_truth.levels.pop_back();
    CHECK_THROWS_AS(evaluate_ber(truth, short_truth, sp), ParameterError);
}

TEST_CASE("tap tuning") {
    SplitSpec sp;
    sp.train = 2000;
    sp.buffer = 50;
    sp.test = 2000;
    const auto truth = random_symbols(sp.end(), 5);
    StateMatrix clean;
    clean.values.resize(static_cast<Eigen::Index>(sp.end()), 2);
    for (std::size_t k = 0; k < sp.end(); ++k) {
        clean.values(static_cast<Eigen::Index>(k), 0) = 0.1 * truth.levels[k] + 0.4;
        clean.values(static_cast<Eigen::Index>(k), 1) = 0.7;
    }
    const auto best = tune_taps(clean, truth, sp, 9);
    CHECK(best.model.taps == 1);
    CHECK(best.ber.bit_errors == 0);
    CHECK(best.log10_ber_by_taps.size() == 5);

    // A channel with ISI one symbol back needs a window.
    StateMatrix isi = clean;
    for (std::size_t k = 1; k < sp.end(); ++k)
        isi.values(static_cast<Eigen::Index>(k), 0) += 0.09 * truth.levels[k - 1];
    const auto win = tune_taps(isi, truth, sp, 61);
    CHECK(win.model.taps % 2 == 1);
    CHECK(win.model.taps >= 3);
    CHECK(win.model.taps <= 61);
    CHECK(win.ber.bit_errors == 0);
    CHECK_THROWS_AS(tune_taps(clean, truth, sp, 8), ParameterError);
}

TEST_CASE("test rows never reach the training") {
    SplitSpec sp;
    sp.train = 1500;
    sp.buffer = 40;
    sp.test = 1000;
    const auto truth = random_symbols(sp.end(), 6);
    auto st = random_states(static_cast<Eigen::Index>(sp.end()), 6, 7);
    for (std::size_t k = 0; k < sp.end(); ++k) st.values(static_cast<Eigen::Index>(k), 0) += truth.levels[k];
    const auto a = tune_taps(st, truth, sp, 1);
    auto perturbed = st;
    perturbed.values.bottomRows(static_cast<Eigen::Index>(sp.test)).array() += 5.0;
    const auto b = tune_taps(perturbed, truth, sp, 1);
    CHECK(a.model.weights == b.model.weights);
}
