#include "semitrans/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "semitrans/errors.hpp"

namespace semitrans {

namespace {

std::string lower(std::string_view token) {
    std::string out(token);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string format_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

PlEvaluation pl_from_residuals(const Eigen::VectorXd& y, Family family, double theta, const Eigen::VectorXd& eps,
                               const PlOptions& options) {
    PlEvaluation out;
    out.g = options.g ? *options.g : silverman_g(eps);
    const KdeEvaluator density(eps, out.g, options.kernel);
    const Eigen::VectorXd f = density.at_samples(options.leave_one_out);
    double total = 0.0;
    for (Eigen::Index i = 0; i < eps.size(); ++i) {
        double value = f[i];
        if (value < options.floor) {
            value = options.floor;
            ++out.floored;
        }
        total += std::log(value) + std::log(dy(family, theta, y[i]));
    }
    out.value = total;
    return out;
}

} // namespace

Method parse_method(std::string_view token) {
    const std::string t = lower(token);
    if (t == "pl") return Method::PL;
    if (t == "md") return Method::MD;
    throw InvalidValue("unknown method '" + std::string(token) + "' (expected pl|md)");
}

std::string to_string(Method method) {
    return method == Method::PL ? "pl" : "md";
}

std::vector<double> ThetaGrid::points() const {
    validate();
    std::vector<double> out;
    const double span = (hi - lo) / step;
    const auto count = static_cast<long>(std::floor(span + 1e-9)) + 1;
    out.reserve(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) out.push_back(lo + static_cast<double>(k) * step);
    return out;
}

void ThetaGrid::validate() const {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(step))
        throw InvalidValue("grid: values must be finite");
    if (!(lo < hi)) throw InvalidValue("grid: lo must be below hi");
    if (!(step > 0)) throw InvalidValue("grid: step must be positive");
}

GridSearchResult grid_search(const std::function<double(double)>& objective, const ThetaGrid& grid, Sense sense) {
    GridSearchResult out;
    bool found = false;
    double best = 0.0;
    for (double theta : grid.points()) {
        double value;
        try {
            value = objective(theta);
        } catch (const DegenerateData& e) {
            out.skipped.push_back({theta, std::string("degenerate: ") + e.what()});
            continue;
        } catch (const Error& e) {
            out.skipped.push_back({theta, e.what()});
            continue;
        }
        if (!std::isfinite(value)) {
            out.skipped.push_back({theta, "non-finite objective"});
            continue;
        }
        out.curve.push_back({theta, value});
        const bool better = sense == Sense::Min ? value < best : value > best;
        if (!found || better) {
            found = true;
            best = value;
            out.theta_hat = theta;
        }
    }
    if (!found) throw AllCellsFailed("grid search: every grid cell failed");
    return out;
}

BandwidthPolicy BandwidthPolicy::fixed(double h0) {
    BandwidthPolicy p;
    p.kind = Kind::Fixed;
    p.h0 = h0;
    return p;
}

BandwidthPolicy BandwidthPolicy::per_coordinate(std::vector<double> h0) {
    BandwidthPolicy p;
    p.kind = Kind::PerCoordinate;
    p.h0_per_coord = std::move(h0);
    return p;
}

BandwidthPolicy BandwidthPolicy::cross_validation(std::vector<double> grid) {
    BandwidthPolicy p;
    p.kind = Kind::CrossValidation;
    p.cv_grid = std::move(grid);
    return p;
}

std::string BandwidthPolicy::label() const {
    switch (kind) {
    case Kind::Fixed:
        return format_number(h0);
    case Kind::PerCoordinate: {
        std::string out;
        for (std::size_t a = 0; a < h0_per_coord.size(); ++a)
            out += (a ? ";" : "") + format_number(h0_per_coord[a]);
        return out;
    }
    case Kind::CrossValidation:
        return "cv";
    }
    return {};
}

PlEvaluation pl_evaluate(const Dataset& data, Family family, double theta, const AdditiveFit& fit,
                         const PlOptions& options) {
    const ResidualSet res = residuals(data, family, theta, fit);
    return pl_from_residuals(data.y, family, theta, res.eps, options);
}

double pl_objective(const Dataset& data, Family family, double theta, const AdditiveFit& fit, Kernel kernel) {
    PlOptions options;
    options.kernel = kernel;
    return pl_evaluate(data, family, theta, fit, options).value;
}

double md_process(const Dataset& data, const ResidualSet& eps, Eigen::Ref<const Eigen::VectorXd> x, double e) {
    const Eigen::Index n = data.size();
    if (eps.eps.size() != n) throw InvalidValue("md_process: residual count does not match data");
    double joint = 0.0, fx = 0.0, fe = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool below_x = (data.x.row(i).transpose().array() <= x.array()).all();
        const bool below_e = eps.eps[i] <= e;
        fx += below_x;
        fe += below_e;
        joint += below_x && below_e;
    }
    const double nn = static_cast<double>(n);
    return joint / nn - (fx / nn) * (fe / nn);
}

MdCriterion::MdCriterion(const Eigen::MatrixXd& x) : below_(x.rows(), x.rows()) {
    const Eigen::Index n = x.rows();
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            below_(i, j) = (x.row(i).array() <= x.row(j).array()).all() ? 1 : 0;
}

double MdCriterion::operator()(const Eigen::VectorXd& eps) const {
    const Eigen::Index n = below_.rows();
    if (eps.size() != n) throw InvalidValue("md: residual count does not match design");
    std::vector<double> sorted(eps.data(), eps.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double nn = static_cast<double>(n);
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double e = eps[j];
        const auto fe = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), e) - sorted.begin());
        long fx = 0, joint = 0;
        const unsigned char* col = below_.col(j).data();
        for (Eigen::Index i = 0; i < n; ++i) {
            fx += col[i];
            joint += col[i] & static_cast<unsigned char>(eps[i] <= e);
        }
        const double g = static_cast<double>(joint) / nn - (static_cast<double>(fx) / nn) * (fe / nn);
        total += g * g;
    }
    return total / nn;
}

double md_objective(const Dataset& data, Family family, double theta, const AdditiveFit& fit) {
    const ResidualSet res = residuals(data, family, theta, fit);
    return MdCriterion(data.x)(res.eps);
}

BandwidthPlan::BandwidthPlan(const Eigen::MatrixXd& x, const BandwidthPolicy& policy, Kernel kernel,
                             int grid_size) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    switch (policy.kind) {
    case BandwidthPolicy::Kind::Fixed:
        fixed_.emplace(x, Bandwidths::scaled(policy.h0, d, n), kernel, grid_size);
        break;
    case BandwidthPolicy::Kind::PerCoordinate: {
        if (static_cast<Eigen::Index>(policy.h0_per_coord.size()) != d)
            throw InvalidValue("h_per_coord: expected " + std::to_string(d) + " values");
        const Eigen::VectorXd h0 = Eigen::Map<const Eigen::VectorXd>(policy.h0_per_coord.data(), d);
        fixed_.emplace(x, Bandwidths::scaled(h0, n), kernel, grid_size);
        break;
    }
    case BandwidthPolicy::Kind::CrossValidation:
        cv_.emplace(x, bandwidth_grid(policy.cv_grid, d, n), kernel, grid_size);
        break;
    }
}

const BackfitDesign& BandwidthPlan::design_for(const Eigen::VectorXd& z) const {
    if (fixed_) return *fixed_;
    return cv_->design(cv_->select(z).index);
}

EstimationResult fit(const Dataset& data, Family family, const FitOptions& options) {
    if (data.size() == 0) throw EmptyData("fit: empty dataset");
    const BandwidthPlan plan(data.x, options.bandwidth, options.kernel, options.grid_size);
    return fit(data, family, options, plan);
}

EstimationResult fit(const Dataset& data, Family family, const FitOptions& options, const BandwidthPlan& plan) {
    if (data.size() == 0) throw EmptyData("fit: empty dataset");
    if (data.x.rows() != data.size()) throw InvalidValue("fit: x and y differ in length");

    PlOptions pl = options.pl;
    pl.kernel = options.kernel;
    std::optional<MdCriterion> md;
    if (options.method == Method::MD) md.emplace(data.x);

    EstimationResult result;
    result.method = options.method;
    result.family = family;
    auto& diag = result.diagnostics;
    diag.density_floor = pl.floor;

    const auto evaluate = [&](double theta) {
        const Eigen::VectorXd z = forward(family, theta, data.y);
        const AdditiveFit fitted = plan.design_for(z).fit(z, options.tol, options.max_iter);
        diag.backfit_iterations.push_back(fitted.diagnostics.iterations);
        if (!fitted.diagnostics.converged) ++diag.nonconverged_cells;
        const Eigen::VectorXd eps = z - predict_rows(fitted, data.x);
        if (options.method == Method::MD) return (*md)(eps);
        return pl_from_residuals(data.y, family, theta, eps, pl).value;
    };

    const Sense sense = options.method == Method::MD ? Sense::Min : Sense::Max;
    double theta_hat;
    try {
        GridSearchResult search = grid_search(evaluate, options.grid, sense);
        theta_hat = search.theta_hat;
        result.curve = std::move(search.curve);
        diag.skipped = std::move(search.skipped);
    } catch (const AllCellsFailed&) {
        // Constant residuals make every PL cell degenerate; report the first
        // admissible grid point with the degenerate flag instead of failing.
        std::optional<double> first;
        for (double theta : options.grid.points()) {
            try {
                static_cast<void>(forward(family, theta, data.y));
                first = theta;
                break;
            } catch (const Error&) {
            }
        }
        if (!first) throw;
        theta_hat = *first;
        diag.degenerate = true;
    }

    const Eigen::VectorXd z = forward(family, theta_hat, data.y);
    const BackfitDesign& design = plan.design_for(z);
    result.theta_hat = theta_hat;
    result.fit_at_theta_hat = design.fit(z, options.tol, options.max_iter);
    result.residuals = residuals(data, family, theta_hat, result.fit_at_theta_hat);
    diag.bandwidths = design.bandwidths();
    diag.singular_points = result.fit_at_theta_hat.diagnostics.singular_points;

    const auto& eps = result.residuals.eps;
    if (eps.maxCoeff() - eps.minCoeff() <= 1e-8) {
        diag.degenerate = true;
    } else if (options.method == Method::PL) {
        const PlEvaluation at_hat = pl_from_residuals(data.y, family, theta_hat, eps, pl);
        diag.floored = at_hat.floored;
        diag.g = at_hat.g;
        result.residuals.g = at_hat.g;
    }
    if (diag.degenerate && !(eps.maxCoeff() - eps.minCoeff() <= 1e-8)) {
        // All cells failed for a reason other than constant residuals.
        throw AllCellsFailed("fit: every grid cell failed");
    }
    return result;
}

} // namespace semitrans
