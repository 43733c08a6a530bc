#pragma once

#include "elmlink/state_matrix.hpp"
#include "elmlink/transmitter.hpp"

#include <Eigen/Dense>

#include <limits>
#include <span>
#include <vector>

namespace elmlink {

/// Contiguous train -> buffer -> test segments starting at `offset` symbols
/// into the record. The buffer rows are never used.
struct SplitSpec {
    std::size_t train = 16500;
    std::size_t buffer = 500;
    std::size_t test = 12000;
    std::size_t offset = 0;

    std::size_t train_begin() const { return offset; }
    std::size_t test_begin() const { return offset + train + buffer; }
    std::size_t end() const { return test_begin() + test; }
    void validate(std::size_t record_symbols) const;
};

/// Feature rows; when `has_bias` the last column is the constant 1.
struct FeatureMatrix {
    Eigen::MatrixXd values;
    bool has_bias = false;
};

struct RidgeModel {
    Eigen::VectorXd weights;   // includes the bias weight last when has_bias
    bool has_bias = false;
    int taps = 1;
    double lambda = 0.01;

    Eigen::VectorXd predict(const FeatureMatrix& x) const;
};

inline constexpr double kHdFecLog10Ber = -2.42;

struct BerReport {
    std::size_t bit_errors = 0;
    std::size_t bits = 0;
    // -inf when no errors were counted; see log10_ber_bound for the resolution limit.
    double log10_ber = -std::numeric_limits<double>::infinity();
    double log10_ber_bound = 0.0;
    bool hd_fec_pass = true;
};

/// Row k = [states[k-h] ... states[k+h], 1] with h = (taps-1)/2; rows outside
/// the record are replaced by the nearest terminal row.
FeatureMatrix build_features(const StateMatrix& states, int taps);

/// Minimizes |Xw - y|^2 + lambda |w|^2 with the bias weight unregularized.
RidgeModel train_ridge(const FeatureMatrix& x, const Eigen::VectorXd& y, double lambda);

/// Nearest PAM-4 level; midpoints (-2, 0, +2) go to the lower level.
Pam4Symbols decide_pam4(std::span<const double> predictions);

/// Bit errors over the test segment only.
BerReport evaluate_ber(const Pam4Symbols& decided, const Pam4Symbols& truth, const SplitSpec& split);

struct TapSelection {
    RidgeModel model;
    BerReport ber;
    std::vector<double> log10_ber_by_taps;   // index i <-> taps = 2i+1
};

/// Fits one ridge readout per odd tap count up to max_taps on the train
/// segment and keeps the lowest test BER (ties -> fewer taps).
TapSelection tune_taps(const StateMatrix& states, const Pam4Symbols& truth, const SplitSpec& split,
                       int max_taps = 61, double lambda = 0.01);

Eigen::VectorXd levels_as_vector(const Pam4Symbols& symbols);

}  // namespace elmlink
