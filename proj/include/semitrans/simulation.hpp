#pragma once

// Box-Cox data-generating process with an additive quadratic + sine signal,
// the Monte Carlo harness over (model, theta_o, bandwidth, method, n) cells,
// and the instrumental-variable / Gaussian-likelihood baseline criteria.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semitrans/dataset.hpp"
#include "semitrans/estimators.hpp"
#include "semitrans/random.hpp"

namespace semitrans {

struct ModelConstants {
    double b0;
    double b1;
    double b2;
    double sigma;
};

/// Models 1-3; b0 = 3 sigma + b2.
ModelConstants model_constants(int model);

struct DgpSpec {
    int model = 1;
    double theta_o = 0.5;
    Eigen::Index n = 100;
    std::uint64_t seed = 1;
    /// Replaces the error scale in the signal (b0 keeps the model's value); for tests.
    std::optional<double> sigma_override;
};

struct SimulatedSample {
    Dataset data;
    Eigen::VectorXd errors;  // truncated standard normal draws
    Eigen::VectorXd signal;  // Lambda_theta_o(Y) = b0 + b1 X1^2 + b2 sin(pi X2) + sigma e
};

/// Standard normal restricted to [-bound, bound] by rejection.
double truncated_normal(Engine& engine, double bound = 3.0);

SimulatedSample simulate(const DgpSpec& spec);
Dataset generate(const DgpSpec& spec);

struct McCell {
    int model = 1;
    double theta_o = 0.0;
    std::string bandwidth;   // h0 label or "cv"
    Method method = Method::MD;
    Eigen::Index n = 100;
    int reps = 0;            // successful replications
    int failures = 0;
    std::optional<double> mean;
    std::optional<double> sd; // unset with fewer than two replications
    std::optional<double> mse;
    std::vector<double> estimates;

    bool operator==(const McCell&) const = default;
};

struct McReport {
    std::vector<McCell> cells;
    int reps = 0;
    double elapsed = 0.0; // seconds

    const McCell* find(int model, double theta_o, const std::string& bandwidth, Method method,
                       Eigen::Index n) const;
};

struct McConfig {
    std::vector<int> models = {1};
    std::vector<double> thetas = {0.0, 0.5, 1.0};
    std::vector<Method> methods = {Method::MD};
    std::vector<BandwidthPolicy> bandwidths = {BandwidthPolicy::fixed(0.3)};
    std::vector<Eigen::Index> sample_sizes = {100};
    int reps = 500;
    std::uint64_t seed = 20070101;
    int threads = 1;
    FitOptions fit; // method and bandwidth fields are overridden per cell
};

/// Seed of replication `rep` of (model, theta_o, n); shared by every method
/// and bandwidth so that cells compare on common datasets.
std::uint64_t replicate_seed(std::uint64_t master, int model, double theta_o, Eigen::Index n, int rep);

McReport run_mc(const McConfig& config);

/// Mean, sd and mse of a cell from its estimates.
void summarize(McCell& cell);

struct BaselineOptions {
    ThetaGrid grid;
    BandwidthPolicy bandwidth = BandwidthPolicy::fixed(0.3);
    Kernel kernel = Kernel::Quartic;
    double tol = 1e-6;
    int max_iter = 50;
    int grid_size = 50;
    std::optional<Eigen::MatrixXd> instruments; // n x q; default [1, X]
    std::optional<Eigen::MatrixXd> weight;      // q x q symmetric positive definite; default identity
    bool normalized = false; // divide by the sample variance of Lambda_theta(Y)
};

/// Minimises eps' Z W Z' eps over the grid.
GridSearchResult baseline_q3(const Dataset& data, Family family, const BaselineOptions& options = {});

/// Maximises mean log Lambda'_theta(Y) - log(eps' eps / n) over the grid.
GridSearchResult baseline_q4(const Dataset& data, Family family, const BaselineOptions& options = {});

} // namespace semitrans
