#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "semitrans/dataset.hpp"
#include "semitrans/kernels.hpp"
#include "semitrans/smoothing.hpp"
#include "semitrans/transforms.hpp"

namespace semitrans {

/// Lower bound applied to density values that are fed into a logarithm.
inline constexpr double kDensityFloor = 1e-10;

struct ResidualSet {
    Eigen::VectorXd eps;
    double theta = 0.0;
    std::optional<double> g;
};

/// eps_i = Lambda_theta(Y_i) - m(X_i). Throws DomainError for responses
/// outside the family's domain.
ResidualSet residuals(const Dataset& data, Family family, double theta, const AdditiveFit& fit);

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
double quantile(std::span<const double> sorted, double p);

/// Rule-of-thumb bandwidth 1.06 min(sd, IQR/1.34) n^(-1/5).
double silverman_g(const Eigen::VectorXd& eps);

/// Direct O(n) kernel density estimate (1/(n g)) sum K((e - eps_i)/g).
double kde(const Eigen::VectorXd& eps, double g, double e, Kernel kernel = Kernel::Quartic,
           bool floor_for_log = false);

/// Repeated density evaluation over one residual sample. Compact kernels
/// only visit the observations inside the window of each evaluation point.
class KdeEvaluator {
public:
    KdeEvaluator(const Eigen::VectorXd& eps, double g, Kernel kernel = Kernel::Quartic);

    double operator()(double e) const;
    /// Density at each sample point; `leave_one_out` drops the point's own term.
    Eigen::VectorXd at_samples(bool leave_one_out = false) const;

    double bandwidth() const { return g_; }

private:
    double sum_window(double e) const;

    Eigen::VectorXd eps_;
    std::vector<double> sorted_;
    double g_;
    Kernel kernel_;
};

} // namespace semitrans
