#pragma once

// Pairs bootstrap for the transformation parameter: the recentered MD
// bootstrap and an uncentered PL variant.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semitrans/dataset.hpp"
#include "semitrans/estimators.hpp"
#include "semitrans/random.hpp"

namespace semitrans {

/// Where the recentered bootstrap criterion is evaluated.
enum class RecenterPoints {
    Bootstrap, // the bootstrap sample's own (X*, eps*(theta)) pairs
    Original,  // the original sample's (X, eps(theta_hat)) pairs
};

struct BootstrapOptions {
    int B = 200;
    double level = 0.95;
    std::uint64_t seed = 1;
    int threads = 1;
    RecenterPoints recenter = RecenterPoints::Bootstrap;
};

struct BootstrapResult {
    Method method = Method::MD;
    double theta_hat = 0.0;          // estimate on the original sample
    std::vector<double> replicates;  // successful replicates in replicate order
    std::optional<double> se;        // unset with fewer than two replicates
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double level = 0.95;
    int B = 0;
    int failures = 0;
    bool experimental = false;
};

struct Resample {
    Dataset data;
    std::vector<Eigen::Index> index;
};

/// n pairs drawn uniformly with replacement.
Resample resample(const Dataset& data, Engine& engine);

/// Squared empirical-measure norm of G*(theta) - G(theta_hat) where G* is
/// built from the resampled rows `index` with residuals `boot_eps`, and G
/// from the original residuals `original_eps`. `below` is the original
/// sample's dominance relation.
double recentered_md_criterion(const MdCriterion& below, const Eigen::VectorXd& original_eps,
                               std::span<const Eigen::Index> index, const Eigen::VectorXd& boot_eps,
                               RecenterPoints points = RecenterPoints::Bootstrap);

BootstrapResult bootstrap_md(const Dataset& data, Family family, const FitOptions& options,
                             const EstimationResult& original, const BootstrapOptions& boot);
BootstrapResult bootstrap_md(const Dataset& data, Family family, const FitOptions& options,
                             const BootstrapOptions& boot);

/// Refits the PL estimator on each resample without recentering. Flagged experimental.
BootstrapResult bootstrap_pl_naive(const Dataset& data, Family family, const FitOptions& options,
                                   const BootstrapOptions& boot);

/// Standard error and percentile interval of a replicate vector.
void summarize(BootstrapResult& result);

} // namespace semitrans
