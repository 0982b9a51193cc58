#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace semitrans {

/// n observations of a scalar response and d covariates.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::MatrixXd x; // n x d
    std::vector<std::string> names; // covariate column names, size d

    Eigen::Index size() const { return y.size(); }
    Eigen::Index dim() const { return x.cols(); }
};

/// Rows of `data` selected by `index` (with repetition).
Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& index);

} // namespace semitrans
