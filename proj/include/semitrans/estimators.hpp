#pragma once

// Profile-likelihood (PL) and distance-from-independence (MD) criteria for
// the transformation parameter, grid search over the parameter interval,
// and the estimation driver that ties them to the backfitting smoother.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "semitrans/dataset.hpp"
#include "semitrans/kernels.hpp"
#include "semitrans/residual_density.hpp"
#include "semitrans/smoothing.hpp"
#include "semitrans/transforms.hpp"

namespace semitrans {

enum class Method { PL, MD };
enum class Sense { Min, Max };

Method parse_method(std::string_view token);
std::string to_string(Method method);

struct ThetaGrid {
    double lo = -0.5;
    double hi = 1.5;
    double step = 0.0625;

    /// lo, lo + step, ... up to hi; hi is included when the step divides the range.
    std::vector<double> points() const;
    void validate() const;
};

struct CurvePoint {
    double theta;
    double value;
};

struct SkippedCell {
    double theta;
    std::string reason;
};

struct GridSearchResult {
    double theta_hat = 0.0;
    std::vector<CurvePoint> curve; // finite cells only, in grid order
    std::vector<SkippedCell> skipped;
};

/// Optimises `objective` over the grid. Cells that throw a semitrans::Error
/// or evaluate to a non-finite value are skipped; ties go to the smallest theta.
GridSearchResult grid_search(const std::function<double(double)>& objective, const ThetaGrid& grid, Sense sense);

/// How regression bandwidths are chosen for each theta.
struct BandwidthPolicy {
    enum class Kind { Fixed, PerCoordinate, CrossValidation };
    Kind kind = Kind::Fixed;
    double h0 = 0.5;                      // Fixed: same base value for every coordinate
    std::vector<double> h0_per_coord;     // PerCoordinate
    std::vector<double> cv_grid = {0.2, 0.3, 0.4, 0.5}; // CrossValidation: base values per coordinate

    static BandwidthPolicy fixed(double h0);
    static BandwidthPolicy per_coordinate(std::vector<double> h0);
    static BandwidthPolicy cross_validation(std::vector<double> grid);

    /// Short label: the h0 value(s) or "cv".
    std::string label() const;
};

struct PlOptions {
    Kernel kernel = Kernel::Quartic;
    std::optional<double> g;   // overrides the rule-of-thumb bandwidth
    bool leave_one_out = false;
    double floor = kDensityFloor;
};

struct PlEvaluation {
    double value = 0.0;
    double g = 0.0;
    int floored = 0;
};

/// sum_i [log f_eps(eps_i) + log Lambda'_theta(Y_i)] for the given fit.
PlEvaluation pl_evaluate(const Dataset& data, Family family, double theta, const AdditiveFit& fit,
                         const PlOptions& options = {});
double pl_objective(const Dataset& data, Family family, double theta, const AdditiveFit& fit,
                    Kernel kernel = Kernel::Quartic);

/// F_{X,eps}(x, e) - F_X(x) F_eps(e) for the empirical distributions.
double md_process(const Dataset& data, const ResidualSet& eps, Eigen::Ref<const Eigen::VectorXd> x, double e);

/// Empirical-measure squared norm of the independence process, evaluated at
/// the sample points. Caches the covariate dominance relation so repeated
/// evaluation for new residuals costs O(n^2).
class MdCriterion {
public:
    explicit MdCriterion(const Eigen::MatrixXd& x);

    double operator()(const Eigen::VectorXd& eps) const;

    /// 1(X_i <= X_j componentwise) as stored, indexed (i, j).
    bool dominated(Eigen::Index i, Eigen::Index j) const { return below_(i, j) != 0; }
    Eigen::Index size() const { return below_.rows(); }

private:
    Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> below_;
};

double md_objective(const Dataset& data, Family family, double theta, const AdditiveFit& fit);

struct FitOptions {
    Method method = Method::MD;
    ThetaGrid grid;
    BandwidthPolicy bandwidth;
    Kernel kernel = Kernel::Quartic;
    double tol = 1e-6;
    int max_iter = 50;
    int grid_size = 50;
    PlOptions pl; // kernel field is overwritten by `kernel`
};

struct EstimationDiagnostics {
    int floored = 0;                 // floored density values at theta_hat (PL)
    double density_floor = kDensityFloor;
    std::optional<double> g;         // residual density bandwidth at theta_hat (PL)
    std::vector<int> backfit_iterations; // per evaluated cell
    int nonconverged_cells = 0;
    int singular_points = 0;         // at theta_hat
    Bandwidths bandwidths;           // used at theta_hat
    std::vector<SkippedCell> skipped;
    bool degenerate = false;         // residuals constant at theta_hat
};

struct EstimationResult {
    double theta_hat = 0.0;
    Method method = Method::MD;
    Family family = Family::BoxCox;
    std::vector<CurvePoint> curve;
    AdditiveFit fit_at_theta_hat;
    ResidualSet residuals;
    EstimationDiagnostics diagnostics;
};

/// Bandwidth machinery for one covariate design: a fixed design, or the
/// cross-validation selector that re-picks bandwidths for each response.
class BandwidthPlan {
public:
    BandwidthPlan(const Eigen::MatrixXd& x, const BandwidthPolicy& policy, Kernel kernel, int grid_size);

    /// Design to use for response z.
    const BackfitDesign& design_for(const Eigen::VectorXd& z) const;

private:
    std::optional<BackfitDesign> fixed_;
    std::optional<CvSelector> cv_;
};

/// Estimates theta over the grid and refits the model at the optimum.
EstimationResult fit(const Dataset& data, Family family, const FitOptions& options);

/// Same, reusing a prepared bandwidth plan for data.x.
EstimationResult fit(const Dataset& data, Family family, const FitOptions& options, const BandwidthPlan& plan);

} // namespace semitrans
