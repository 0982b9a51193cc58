#include "semitrans/inference.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"
#include "semitrans/errors.hpp"

namespace semitrans {

Resample resample(const Dataset& data, Engine& engine) {
    const Eigen::Index n = data.size();
    if (n == 0) throw EmptyData("resample: empty dataset");
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Resample out;
    out.index.resize(static_cast<std::size_t>(n));
    for (auto& i : out.index) i = pick(engine);
    out.data = take_rows(data, out.index);
    return out;
}

namespace {

// G(x_j, e) for a sample given by rows `rows` of the original design (all
// rows when empty) with residuals `eps`; x_j is original row `col`.
double process_at(const MdCriterion& below, std::span<const Eigen::Index> rows, const Eigen::VectorXd& eps,
                  Eigen::Index col, double e) {
    const Eigen::Index n = eps.size();
    long fx = 0, fe = 0, joint = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index row = rows.empty() ? i : rows[static_cast<std::size_t>(i)];
        const bool bx = below.dominated(row, col);
        const bool be = eps[i] <= e;
        fx += bx;
        fe += be;
        joint += bx && be;
    }
    const double nn = static_cast<double>(n);
    return static_cast<double>(joint) / nn - (static_cast<double>(fx) / nn) * (static_cast<double>(fe) / nn);
}

} // namespace

double recentered_md_criterion(const MdCriterion& below, const Eigen::VectorXd& original_eps,
                               std::span<const Eigen::Index> index, const Eigen::VectorXd& boot_eps,
                               RecenterPoints points) {
    const Eigen::Index n = boot_eps.size();
    if (static_cast<Eigen::Index>(index.size()) != n) throw InvalidValue("recentered md: index length mismatch");
    if (original_eps.size() != below.size()) throw InvalidValue("recentered md: original residual count mismatch");
    double total = 0.0;
    if (points == RecenterPoints::Bootstrap) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index col = index[static_cast<std::size_t>(j)];
            const double e = boot_eps[j];
            const double diff = process_at(below, index, boot_eps, col, e) - process_at(below, {}, original_eps, col, e);
            total += diff * diff;
        }
        return total / static_cast<double>(n);
    }
    const Eigen::Index m = original_eps.size();
    for (Eigen::Index k = 0; k < m; ++k) {
        const double e = original_eps[k];
        const double diff = process_at(below, index, boot_eps, k, e) - process_at(below, {}, original_eps, k, e);
        total += diff * diff;
    }
    return total / static_cast<double>(m);
}

void summarize(BootstrapResult& result) {
    result.se.reset();
    if (result.replicates.empty()) return;
    const auto count = static_cast<double>(result.replicates.size());
    if (result.replicates.size() >= 2) {
        double mean = 0.0;
        for (double r : result.replicates) mean += r;
        mean /= count;
        double ss = 0.0;
        for (double r : result.replicates) ss += (r - mean) * (r - mean);
        result.se = std::sqrt(ss / (count - 1));
    }
    std::vector<double> sorted = result.replicates;
    std::sort(sorted.begin(), sorted.end());
    const double alpha = 1.0 - result.level;
    result.ci_lo = quantile(sorted, alpha / 2);
    result.ci_hi = quantile(sorted, 1 - alpha / 2);
}

namespace {

void check_options(const BootstrapOptions& boot) {
    if (boot.B < 1) throw InvalidValue("bootstrap: B must be at least 1");
    if (!(boot.level > 0 && boot.level < 1)) throw InvalidValue("bootstrap: level must lie in (0, 1)");
}

template <typename Replicate>
BootstrapResult run_replicates(const BootstrapOptions& boot, Replicate&& replicate) {
    std::vector<std::optional<double>> draws(static_cast<std::size_t>(boot.B));
    detail::parallel_for(draws.size(), boot.threads, [&](std::size_t b) {
        Engine engine = make_engine(boot.seed, {static_cast<std::uint64_t>(b)});
        try {
            draws[b] = replicate(engine);
        } catch (const AllCellsFailed&) {
            draws[b].reset();
        } catch (const DegenerateData&) {
            draws[b].reset();
        }
    });
    BootstrapResult out;
    out.B = boot.B;
    out.level = boot.level;
    for (const auto& d : draws) {
        if (d)
            out.replicates.push_back(*d);
        else
            ++out.failures;
    }
    if (out.failures == boot.B) throw BootstrapDegenerate("bootstrap: every replicate failed");
    summarize(out);
    return out;
}

} // namespace

BootstrapResult bootstrap_md(const Dataset& data, Family family, const FitOptions& options,
                             const EstimationResult& original, const BootstrapOptions& boot) {
    check_options(boot);
    if (original.residuals.eps.size() != data.size())
        throw InvalidValue("bootstrap: original fit does not belong to this dataset");
    const MdCriterion below(data.x);
    const Eigen::VectorXd& original_eps = original.residuals.eps;

    BootstrapResult out = run_replicates(boot, [&](Engine& engine) {
        const Resample rs = resample(data, engine);
        const BandwidthPlan plan(rs.data.x, options.bandwidth, options.kernel, options.grid_size);
        const auto criterion = [&](double theta) {
            const Eigen::VectorXd z = forward(family, theta, rs.data.y);
            const AdditiveFit fitted = plan.design_for(z).fit(z, options.tol, options.max_iter);
            const Eigen::VectorXd eps = z - predict_rows(fitted, rs.data.x);
            return recentered_md_criterion(below, original_eps, rs.index, eps, boot.recenter);
        };
        return grid_search(criterion, options.grid, Sense::Min).theta_hat;
    });
    out.method = Method::MD;
    out.theta_hat = original.theta_hat;
    return out;
}

BootstrapResult bootstrap_md(const Dataset& data, Family family, const FitOptions& options,
                             const BootstrapOptions& boot) {
    FitOptions md = options;
    md.method = Method::MD;
    const EstimationResult original = fit(data, family, md);
    return bootstrap_md(data, family, md, original, boot);
}

BootstrapResult bootstrap_pl_naive(const Dataset& data, Family family, const FitOptions& options,
                                   const BootstrapOptions& boot) {
    check_options(boot);
    FitOptions pl = options;
    pl.method = Method::PL;
    const EstimationResult original = fit(data, family, pl);

    BootstrapResult out = run_replicates(boot, [&](Engine& engine) {
        const Resample rs = resample(data, engine);
        return fit(rs.data, family, pl).theta_hat;
    });
    out.method = Method::PL;
    out.theta_hat = original.theta_hat;
    out.experimental = true;
    return out;
}

} // namespace semitrans
