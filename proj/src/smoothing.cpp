#include "semitrans/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/LU>

#include "semitrans/errors.hpp"

namespace semitrans {

namespace {

// Marginal kernel mass below this fraction of the largest grid value is treated as zero.
constexpr double kSingularMass = 1e-10;

Eigen::Index nearest_index(const Eigen::VectorXd& grid, double x) {
    const auto* begin = grid.data();
    const auto* end = begin + grid.size();
    const auto* it = std::lower_bound(begin, end, x);
    if (it == begin) return 0;
    if (it == end) return grid.size() - 1;
    const Eigen::Index hi = it - begin;
    return (x - grid[hi - 1] <= grid[hi] - x) ? hi - 1 : hi;
}

// Index k and weight t with x ~ (1 - t) grid[k] + t grid[k + 1].
std::pair<Eigen::Index, double> bracket(const Eigen::VectorXd& grid, double x) {
    const Eigen::Index size = grid.size();
    if (size == 1 || x <= grid[0]) return {0, 0.0};
    if (x >= grid[size - 1]) return {size - 2, 1.0};
    const auto* begin = grid.data();
    const Eigen::Index k = std::upper_bound(begin, begin + size, x) - begin - 1;
    const double t = (x - grid[k]) / (grid[k + 1] - grid[k]);
    return {k, std::clamp(t, 0.0, 1.0)};
}

} // namespace

Bandwidths Bandwidths::scaled(const Eigen::VectorXd& h0, Eigen::Index n) {
    Bandwidths out;
    out.h0 = h0;
    out.h = h0 * std::pow(static_cast<double>(n), -0.2);
    out.validate();
    return out;
}

Bandwidths Bandwidths::scaled(double h0, Eigen::Index d, Eigen::Index n) {
    return scaled(Eigen::VectorXd::Constant(d, h0), n);
}

void Bandwidths::validate() const {
    if (h.size() == 0) throw InvalidValue("bandwidths: empty");
    for (Eigen::Index a = 0; a < h.size(); ++a)
        if (!(h[a] > 0) || !std::isfinite(h[a])) throw InvalidValue("bandwidths: h must be positive and finite");
}

double nw_1d(std::span<const double> xs, std::span<const double> zs, double h, double x0, Kernel kernel) {
    if (xs.empty()) throw EmptyData("nw_1d: no observations");
    if (xs.size() != zs.size()) throw InvalidValue("nw_1d: xs and zs differ in length");
    if (!(h > 0)) throw InvalidValue("nw_1d: bandwidth must be positive");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = kernel_value(kernel, (x0 - xs[i]) / h);
        num += w * zs[i];
        den += w;
    }
    if (den > 0) return num / den;
    std::size_t nearest = 0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (std::abs(xs[i] - x0) < std::abs(xs[nearest] - x0)) nearest = i;
    return zs[nearest];
}

Eigen::VectorXd uniform_grid(double lo, double hi, int size) {
    if (size < 2) throw InvalidValue("grid needs at least two points");
    Eigen::VectorXd grid(size);
    const double step = (hi - lo) / (size - 1);
    for (int k = 0; k < size; ++k) grid[k] = lo + k * step;
    grid[size - 1] = hi;
    return grid;
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
    const Eigen::Index size = grid.size();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(size);
    for (Eigen::Index k = 0; k + 1 < size; ++k) {
        const double half = 0.5 * (grid[k + 1] - grid[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    return w;
}

double interpolate(const Component& component, double x) {
    const auto [k, t] = bracket(component.grid, x);
    if (component.grid.size() == 1) return component.values[0];
    return (1 - t) * component.values[k] + t * component.values[k + 1];
}

double predict(const AdditiveFit& fit, Eigen::Ref<const Eigen::VectorXd> x) {
    double value = fit.c0;
    for (std::size_t a = 0; a < fit.components.size(); ++a)
        value += interpolate(fit.components[a], x[static_cast<Eigen::Index>(a)]);
    return value;
}

Eigen::VectorXd predict_rows(const AdditiveFit& fit, const Eigen::MatrixXd& x) {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict(fit, x.row(i).transpose());
    return out;
}

// The linear fixed-point problem m_a = P_a (b_a - sum_{b != a} Pi_ab m_b)
// for one choice of deleted observation.
struct BackfitDesign::System {
    std::vector<Eigen::VectorXi> source;              // grid point -> grid point with mass
    std::vector<Eigen::VectorXd> mass;                // marginal kernel sums
    std::vector<std::vector<Eigen::MatrixXd>> proj;   // Pi_ab
    std::vector<Eigen::VectorXd> center;              // empirical centering functional
    double weight_sum = 0.0;
    int singular = 0;
};

BackfitDesign::BackfitDesign(const Eigen::MatrixXd& x, const Bandwidths& h, Kernel kernel, int grid_size)
    : x_(x), h_(h), kernel_(kernel) {
    if (x.rows() == 0 || x.cols() == 0) throw EmptyData("backfit: empty design");
    grids_.reserve(x.cols());
    for (Eigen::Index a = 0; a < x.cols(); ++a) {
        const double lo = x.col(a).minCoeff();
        const double hi = x.col(a).maxCoeff();
        if (!(hi > lo)) throw DegenerateData("backfit: covariate " + std::to_string(a) + " is constant");
        grids_.push_back(uniform_grid(lo, hi, grid_size));
    }
    init();
}

BackfitDesign::BackfitDesign(const Eigen::MatrixXd& x, const Bandwidths& h, Kernel kernel,
                             std::vector<Eigen::VectorXd> grids)
    : x_(x), h_(h), kernel_(kernel), grids_(std::move(grids)) {
    if (x.rows() == 0 || x.cols() == 0) throw EmptyData("backfit: empty design");
    if (static_cast<Eigen::Index>(grids_.size()) != x.cols()) throw InvalidValue("backfit: one grid per coordinate");
    for (const auto& grid : grids_) {
        if (grid.size() < 2) throw InvalidValue("backfit: grid needs at least two points");
        for (Eigen::Index k = 0; k + 1 < grid.size(); ++k)
            if (!(grid[k + 1] > grid[k])) throw InvalidValue("backfit: grid must be increasing");
    }
    init();
}

void BackfitDesign::init() {
    const Eigen::Index n = x_.rows();
    const Eigen::Index d = x_.cols();
    h_.validate();
    if (h_.dim() != d) throw InvalidValue("backfit: bandwidth dimension does not match covariates");
    if (n < 2 * d) throw EmptyData("backfit: need n >= 2d observations");

    quad_.resize(d);
    k_.resize(d);
    k_unit_.resize(d);
    interp_.resize(d);
    mass_.resize(d);
    for (Eigen::Index a = 0; a < d; ++a) {
        const auto& grid = grids_[a];
        const Eigen::Index size = grid.size();
        quad_[a] = trapezoid_weights(grid);
        k_[a].resize(n, size);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index g = 0; g < size; ++g)
                k_[a](i, g) = kernel_scaled(kernel_, grid[g], x_(i, a), h_.h[a]);

        k_unit_[a] = k_[a];
        for (Eigen::Index i = 0; i < n; ++i) {
            const double integral = k_[a].row(i).dot(quad_[a]);
            if (integral > 0) {
                k_unit_[a].row(i) /= integral;
            } else {
                const Eigen::Index g = nearest_index(grid, x_(i, a));
                k_unit_[a].row(i).setZero();
                k_unit_[a](i, g) = 1.0 / quad_[a][g];
            }
        }

        interp_[a] = Eigen::MatrixXd::Zero(n, size);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto [k, t] = bracket(grid, x_(i, a));
            interp_[a](i, k) += 1 - t;
            interp_[a](i, k + 1) += t;
        }
        mass_[a] = k_[a].colwise().sum().transpose();
    }

    joint_.assign(d, std::vector<Eigen::MatrixXd>(d));
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b)
            if (a != b) joint_[a][b].noalias() = k_[a].transpose() * k_unit_[b];
}

BackfitDesign::System BackfitDesign::assemble(std::optional<Eigen::Index> dropped) const {
    const Eigen::Index n = x_.rows();
    const Eigen::Index d = x_.cols();
    System sys;
    sys.weight_sum = static_cast<double>(dropped ? n - 1 : n);
    sys.source.resize(d);
    sys.mass.resize(d);
    sys.center.resize(d);
    sys.proj.assign(d, std::vector<Eigen::MatrixXd>(d));

    for (Eigen::Index a = 0; a < d; ++a) {
        const Eigen::Index size = grids_[a].size();
        Eigen::VectorXd mass = mass_[a];
        Eigen::VectorXd center = interp_[a].colwise().sum().transpose();
        if (dropped) {
            mass -= k_[a].row(*dropped).transpose();
            center -= interp_[a].row(*dropped).transpose();
        }
        sys.center[a] = center / sys.weight_sum;

        const double cutoff = kSingularMass * mass.maxCoeff();
        Eigen::VectorXi source(size);
        std::vector<Eigen::Index> valid;
        for (Eigen::Index g = 0; g < size; ++g)
            if (mass[g] > cutoff) valid.push_back(g);
        if (valid.empty()) throw DegenerateData("backfit: marginal density vanishes on the whole grid");
        for (Eigen::Index g = 0; g < size; ++g) {
            if (mass[g] > cutoff) {
                source[g] = static_cast<int>(g);
                continue;
            }
            ++sys.singular;
            Eigen::Index best = valid.front();
            for (Eigen::Index v : valid)
                if (std::abs(v - g) < std::abs(best - g)) best = v;
            source[g] = static_cast<int>(best);
        }
        sys.source[a] = std::move(source);
        sys.mass[a] = std::move(mass);
    }

    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) {
            if (a == b) continue;
            Eigen::MatrixXd joint = joint_[a][b];
            if (dropped) joint.noalias() -= k_[a].row(*dropped).transpose() * k_unit_[b].row(*dropped);
            const Eigen::Index rows = grids_[a].size();
            Eigen::MatrixXd proj(rows, grids_[b].size());
            for (Eigen::Index g = 0; g < rows; ++g) {
                const Eigen::Index src = sys.source[a][g];
                proj.row(g) = joint.row(src).cwiseProduct(quad_[b].transpose()) / sys.mass[a][src];
            }
            sys.proj[a][b] = std::move(proj);
        }
    }
    return sys;
}

AdditiveFit BackfitDesign::fit(const Eigen::VectorXd& z, double tol, int max_iter) const {
    const Eigen::Index n = x_.rows();
    const Eigen::Index d = x_.cols();
    if (z.size() != n) throw InvalidValue("backfit: response length does not match design");
    if (!(tol > 0)) throw InvalidValue("backfit: tol must be positive");
    if (max_iter < 1) throw InvalidValue("backfit: max_iter must be at least 1");

    const System sys = assemble(std::nullopt);
    AdditiveFit out;
    out.c0 = z.mean();
    out.diagnostics.singular_points = sys.singular;

    std::vector<Eigen::VectorXd> target(d);
    for (Eigen::Index a = 0; a < d; ++a) {
        const Eigen::VectorXd weighted = k_[a].transpose() * z;
        const Eigen::Index size = grids_[a].size();
        target[a].resize(size);
        for (Eigen::Index g = 0; g < size; ++g) {
            const Eigen::Index src = sys.source[a][g];
            target[a][g] = weighted[src] / sys.mass[a][src] - out.c0;
        }
    }

    std::vector<Eigen::VectorXd> m(d);
    for (Eigen::Index a = 0; a < d; ++a) m[a] = Eigen::VectorXd::Zero(grids_[a].size());

    out.diagnostics.converged = false;
    for (int iter = 1; iter <= max_iter; ++iter) {
        double change = 0.0;
        for (Eigen::Index a = 0; a < d; ++a) {
            Eigen::VectorXd next = target[a];
            for (Eigen::Index b = 0; b < d; ++b)
                if (b != a) next.noalias() -= sys.proj[a][b] * m[b];
            next.array() -= sys.center[a].dot(next);
            change = std::max(change, (next - m[a]).cwiseAbs().maxCoeff());
            m[a] = std::move(next);
        }
        out.diagnostics.iterations = iter;
        out.diagnostics.update_norm = change;
        if (!std::isfinite(change)) break;
        if (change < tol) {
            out.diagnostics.converged = true;
            break;
        }
    }

    out.components.resize(d);
    for (Eigen::Index a = 0; a < d; ++a) out.components[a] = Component{grids_[a], std::move(m[a])};
    return out;
}

Eigen::MatrixXd BackfitDesign::loo_smoother() const {
    const Eigen::Index n = x_.rows();
    const Eigen::Index d = x_.cols();
    std::vector<Eigen::Index> offset(d + 1, 0);
    for (Eigen::Index a = 0; a < d; ++a) offset[a + 1] = offset[a] + grids_[a].size();
    const Eigen::Index dim = offset[d];

    Eigen::MatrixXd loo = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd system(dim, dim);
    Eigen::VectorXd rhs(dim);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(dim);

    for (Eigen::Index i = 0; i < n; ++i) {
        const System sys = assemble(i);
        const double others = sys.weight_sum;

        // M = I + P Pi_off with P_a = I - 1 c_a^T.
        system.setIdentity();
        for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index b = 0; b < d; ++b) {
                if (a == b) continue;
                const auto& proj = sys.proj[a][b];
                const Eigen::RowVectorXd centered = sys.center[a].transpose() * proj;
                auto block = system.block(offset[a], offset[b], proj.rows(), proj.cols());
                block = proj;
                block.rowwise() -= centered;
            }
            rhs.segment(offset[a], grids_[a].size()) = interp_[a].row(i).transpose();
        }
        lu.compute(system.transpose());
        const Eigen::VectorXd v = lu.solve(rhs);

        Eigen::VectorXd row = Eigen::VectorXd::Constant(n, 1.0 / others);
        for (Eigen::Index a = 0; a < d; ++a) {
            const Eigen::Index size = grids_[a].size();
            // u = P_a^T v_a
            const Eigen::VectorXd u = v.segment(offset[a], size) - sys.center[a] * v.segment(offset[a], size).sum();
            Eigen::VectorXd folded = Eigen::VectorXd::Zero(size);
            for (Eigen::Index g = 0; g < size; ++g) {
                const Eigen::Index src = sys.source[a][g];
                folded[src] += u[g] / sys.mass[a][src];
            }
            row.noalias() += k_[a] * folded;
            row.array() -= u.sum() / others;
        }
        row[i] = 0.0;
        loo.row(i) = row.transpose();
    }
    return loo;
}

AdditiveFit smooth_backfit(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Bandwidths& h,
                           const BackfitOptions& options) {
    const BackfitDesign design(x, h, options.kernel, options.grid_size);
    return design.fit(z, options.tol, options.max_iter);
}

double cv_score(const Eigen::MatrixXd& loo_smoother, const Eigen::VectorXd& z) {
    // Shifting by z[0] keeps constant responses exactly at zero score.
    const Eigen::VectorXd shifted = z.array() - z[0];
    const Eigen::VectorXd resid = shifted - loo_smoother * shifted;
    return resid.squaredNorm() / static_cast<double>(z.size());
}

CvSelector::CvSelector(const Eigen::MatrixXd& x, std::vector<Bandwidths> candidates, Kernel kernel, int grid_size)
    : candidates_(std::move(candidates)) {
    if (candidates_.empty()) throw EmptyGrid("cv: no candidate bandwidths");
    designs_.reserve(candidates_.size());
    loo_.reserve(candidates_.size());
    for (const auto& h : candidates_) {
        designs_.emplace_back(x, h, kernel, grid_size);
        loo_.push_back(designs_.back().loo_smoother());
    }
}

CvSelection CvSelector::select(const Eigen::VectorXd& z) const {
    CvSelection out;
    out.scores.reserve(candidates_.size());
    for (const auto& loo : loo_) out.scores.push_back(cv_score(loo, z));
    const auto lex_less = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    };
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates_.size(); ++c) {
        const double s = out.scores[c];
        const double t = out.scores[best];
        if (s < t || (s == t && lex_less(candidates_[c].h, candidates_[best].h))) best = c;
    }
    out.index = best;
    out.selected = candidates_[best];
    return out;
}

CvSelection cv_select_bandwidths(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                                 std::span<const Bandwidths> candidates, Kernel kernel) {
    const CvSelector selector(x, std::vector<Bandwidths>(candidates.begin(), candidates.end()), kernel);
    return selector.select(z);
}

std::vector<Bandwidths> bandwidth_grid(std::span<const double> h0_values, Eigen::Index d, Eigen::Index n) {
    if (h0_values.empty() || d < 1) throw EmptyGrid("cv: empty bandwidth grid");
    std::vector<double> sorted(h0_values.begin(), h0_values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<Bandwidths> out;
    std::vector<std::size_t> digits(d, 0);
    while (true) {
        Eigen::VectorXd h0(d);
        for (Eigen::Index a = 0; a < d; ++a) h0[a] = sorted[digits[a]];
        out.push_back(Bandwidths::scaled(h0, n));
        Eigen::Index pos = d - 1;
        while (pos >= 0 && ++digits[pos] == sorted.size()) digits[pos--] = 0;
        if (pos < 0) break;
    }
    return out;
}

} // namespace semitrans
