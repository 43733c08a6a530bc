#pragma once

#include <Eigen/Dense>

namespace elmlink {

/// Per-symbol node responses: one row per symbol, one column per virtual node.
struct StateMatrix {
    Eigen::MatrixXd values;

    Eigen::Index symbols() const { return values.rows(); }
    Eigen::Index nodes() const { return values.cols(); }
};

}  // namespace elmlink
