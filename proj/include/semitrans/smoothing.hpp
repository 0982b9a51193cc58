#pragma once

// Local-constant kernel smoothing and the smooth backfitting estimator of an
// additive regression function m(x) = c0 + sum_a m_a(x_a).

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "semitrans/kernels.hpp"

namespace semitrans {

/// Per-coordinate regression bandwidths. When built from base values h0,
/// h_a = h0_a * n^(-1/5) and the base values are kept for reporting.
struct Bandwidths {
    Eigen::VectorXd h;
    std::optional<Eigen::VectorXd> h0;

    static Bandwidths scaled(const Eigen::VectorXd& h0, Eigen::Index n);
    static Bandwidths scaled(double h0, Eigen::Index d, Eigen::Index n);

    Eigen::Index dim() const { return h.size(); }
    void validate() const;
};

/// One additive component tabulated on an increasing grid.
struct Component {
    Eigen::VectorXd grid;
    Eigen::VectorXd values;
};

struct BackfitDiagnostics {
    int iterations = 0;
    double update_norm = 0.0;
    bool converged = true;
    /// Grid points where the marginal density estimate vanished and the
    /// nearest valid grid point was substituted.
    int singular_points = 0;
};

struct AdditiveFit {
    double c0 = 0.0;
    std::vector<Component> components;
    BackfitDiagnostics diagnostics;
};

struct BackfitOptions {
    Kernel kernel = Kernel::Quartic;
    double tol = 1e-6;
    int max_iter = 50;
    int grid_size = 50;
};

/// Nadaraya-Watson estimate at x0. An empty kernel window falls back to the
/// response of the nearest design point.
double nw_1d(std::span<const double> xs, std::span<const double> zs, double h, double x0,
             Kernel kernel = Kernel::Quartic);

/// `size` equally spaced points from lo to hi inclusive.
Eigen::VectorXd uniform_grid(double lo, double hi, int size);

/// Trapezoid quadrature weights for an increasing grid.
Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid);

/// Linear interpolation in a tabulated component, clamped to the grid ends.
double interpolate(const Component& component, double x);

double predict(const AdditiveFit& fit, Eigen::Ref<const Eigen::VectorXd> x);
/// Prediction at every row of x.
Eigen::VectorXd predict_rows(const AdditiveFit& fit, const Eigen::MatrixXd& x);

/// Everything about a smooth backfit that depends on the design X and the
/// bandwidths but not on the response: kernel weight matrices, marginal and
/// pairwise density sums on the evaluation grids. Building it once lets many
/// responses (one per transformation parameter) share the work.
class BackfitDesign {
public:
    BackfitDesign(const Eigen::MatrixXd& x, const Bandwidths& h, Kernel kernel = Kernel::Quartic,
                  int grid_size = 50);
    /// Explicit grids (one increasing vector per coordinate).
    BackfitDesign(const Eigen::MatrixXd& x, const Bandwidths& h, Kernel kernel,
                  std::vector<Eigen::VectorXd> grids);

    /// Gauss-Seidel smooth backfitting of z.
    AdditiveFit fit(const Eigen::VectorXd& z, double tol = 1e-6, int max_iter = 50) const;

    /// n x n matrix L whose row i maps z to the prediction at X_i of the
    /// backfit with observation i deleted from every kernel sum.
    Eigen::MatrixXd loo_smoother() const;

    const std::vector<Eigen::VectorXd>& grids() const { return grids_; }
    const Bandwidths& bandwidths() const { return h_; }
    Eigen::Index size() const { return x_.rows(); }
    Eigen::Index dim() const { return x_.cols(); }

private:
    struct System;
    System assemble(std::optional<Eigen::Index> dropped) const;
    void init();

    Eigen::MatrixXd x_;
    Bandwidths h_;
    Kernel kernel_;
    std::vector<Eigen::VectorXd> grids_;
    std::vector<Eigen::VectorXd> quad_;         // trapezoid weights per coordinate
    std::vector<Eigen::MatrixXd> k_;            // n x G raw kernel weights K_h(g - X_ai)
    std::vector<Eigen::MatrixXd> k_unit_;       // rows normalised to unit grid integral
    std::vector<Eigen::MatrixXd> interp_;       // n x G interpolation weights of X_ai
    std::vector<Eigen::VectorXd> mass_;         // column sums of k_
    std::vector<std::vector<Eigen::MatrixXd>> joint_; // G x G sums k_a^T k_unit_b
};

AdditiveFit smooth_backfit(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Bandwidths& h,
                           const BackfitOptions& options = {});

/// Leave-one-out residual sum of squares divided by n.
double cv_score(const Eigen::MatrixXd& loo_smoother, const Eigen::VectorXd& z);

struct CvSelection {
    std::size_t index = 0;
    Bandwidths selected;
    std::vector<double> scores;
};

/// Precomputes leave-one-out smoothers for a candidate set so that repeated
/// selection for different responses costs O(n^2) per candidate.
class CvSelector {
public:
    CvSelector(const Eigen::MatrixXd& x, std::vector<Bandwidths> candidates, Kernel kernel = Kernel::Quartic,
               int grid_size = 50);

    CvSelection select(const Eigen::VectorXd& z) const;

    const std::vector<Bandwidths>& candidates() const { return candidates_; }
    const BackfitDesign& design(std::size_t index) const { return designs_[index]; }

private:
    std::vector<Bandwidths> candidates_;
    std::vector<BackfitDesign> designs_;
    std::vector<Eigen::MatrixXd> loo_;
};

CvSelection cv_select_bandwidths(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                                 std::span<const Bandwidths> candidates, Kernel kernel = Kernel::Quartic);

/// Cartesian product of base bandwidth values over d coordinates, each
/// scaled by n^(-1/5).
std::vector<Bandwidths> bandwidth_grid(std::span<const double> h0_values, Eigen::Index d, Eigen::Index n);

} // namespace semitrans
