#include "semitrans/simulation.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

#include "parallel.hpp"
#include "semitrans/errors.hpp"
#include "semitrans/transforms.hpp"

namespace semitrans {

ModelConstants model_constants(int model) {
    double b1, b2, sigma;
    switch (model) {
    case 1: b1 = 5.0; b2 = 2.0; sigma = 1.5; break;
    case 2: b1 = 3.5; b2 = 1.5; sigma = 1.0; break;
    case 3: b1 = 2.5; b2 = 1.0; sigma = 0.5; break;
    default: throw InvalidValue("model must be 1, 2 or 3 (got " + std::to_string(model) + ")");
    }
    return {3.0 * sigma + b2, b1, b2, sigma};
}

double truncated_normal(Engine& engine, double bound) {
    std::normal_distribution<double> normal;
    while (true) {
        const double e = normal(engine);
        if (std::abs(e) <= bound) return e;
    }
}

SimulatedSample simulate(const DgpSpec& spec) {
    if (spec.n < 1) throw EmptyData("generate: n must be at least 1");
    const ModelConstants c = model_constants(spec.model);
    const double sigma = spec.sigma_override.value_or(c.sigma);
    Engine engine(spec.seed);
    std::uniform_real_distribution<double> uniform(-0.5, 0.5);

    SimulatedSample out;
    auto& data = out.data;
    data.y.resize(spec.n);
    data.x.resize(spec.n, 2);
    data.names = {"x1", "x2"};
    out.errors.resize(spec.n);
    out.signal.resize(spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
        const double x1 = uniform(engine);
        const double x2 = uniform(engine);
        const double e = truncated_normal(engine);
        const double z = c.b0 + c.b1 * x1 * x1 + c.b2 * std::sin(std::numbers::pi * x2) + e * sigma;
        data.x(i, 0) = x1;
        data.x(i, 1) = x2;
        out.errors[i] = e;
        out.signal[i] = z;
        data.y[i] = inverse(Family::BoxCox, spec.theta_o, z);
    }
    return out;
}

Dataset generate(const DgpSpec& spec) {
    return simulate(spec).data;
}

std::uint64_t replicate_seed(std::uint64_t master, int model, double theta_o, Eigen::Index n, int rep) {
    return derive_seed(master, {static_cast<std::uint64_t>(model), std::bit_cast<std::uint64_t>(theta_o),
                                static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)});
}

const McCell* McReport::find(int model, double theta_o, const std::string& bandwidth, Method method,
                             Eigen::Index n) const {
    for (const auto& cell : cells)
        if (cell.model == model && cell.theta_o == theta_o && cell.bandwidth == bandwidth && cell.method == method &&
            cell.n == n)
            return &cell;
    return nullptr;
}

void summarize(McCell& cell) {
    cell.reps = static_cast<int>(cell.estimates.size());
    cell.mean.reset();
    cell.sd.reset();
    cell.mse.reset();
    if (cell.estimates.empty()) return;
    const auto r = static_cast<double>(cell.estimates.size());
    double mean = 0.0, mse = 0.0;
    for (double t : cell.estimates) {
        mean += t;
        mse += (t - cell.theta_o) * (t - cell.theta_o);
    }
    mean /= r;
    cell.mean = mean;
    cell.mse = mse / r;
    if (cell.estimates.size() >= 2) {
        double ss = 0.0;
        for (double t : cell.estimates) ss += (t - mean) * (t - mean);
        cell.sd = std::sqrt(ss / (r - 1));
    }
}

McReport run_mc(const McConfig& config) {
    if (config.reps < 1) throw InvalidValue("simulate: reps must be at least 1");
    if (config.models.empty() || config.thetas.empty() || config.methods.empty() || config.bandwidths.empty() ||
        config.sample_sizes.empty())
        throw InvalidValue("simulate: every cell dimension needs at least one value");
    const auto start = std::chrono::steady_clock::now();

    struct Job {
        int model;
        double theta_o;
        Eigen::Index n;
        int rep;
    };
    std::vector<Job> jobs;
    for (int model : config.models)
        for (double theta_o : config.thetas)
            for (Eigen::Index n : config.sample_sizes)
                for (int rep = 0; rep < config.reps; ++rep) jobs.push_back({model, theta_o, n, rep});

    const std::size_t per_job = config.bandwidths.size() * config.methods.size();
    // NaN marks a failed fit.
    std::vector<std::vector<double>> outcome(jobs.size(), std::vector<double>(per_job));

    detail::parallel_for(jobs.size(), config.threads, [&](std::size_t k) {
        const Job& job = jobs[k];
        DgpSpec spec;
        spec.model = job.model;
        spec.theta_o = job.theta_o;
        spec.n = job.n;
        spec.seed = replicate_seed(config.seed, job.model, job.theta_o, job.n, job.rep);
        const Dataset data = generate(spec);
        std::size_t slot = 0;
        for (const auto& policy : config.bandwidths) {
            std::optional<BandwidthPlan> plan;
            try {
                plan.emplace(data.x, policy, config.fit.kernel, config.fit.grid_size);
            } catch (const DegenerateData&) {
            }
            for (Method method : config.methods) {
                double estimate = std::nan("");
                if (plan) {
                    FitOptions options = config.fit;
                    options.method = method;
                    options.bandwidth = policy;
                    try {
                        estimate = fit(data, Family::BoxCox, options, *plan).theta_hat;
                    } catch (const AllCellsFailed&) {
                    }
                }
                outcome[k][slot++] = estimate;
            }
        }
    });

    McReport report;
    report.reps = config.reps;
    std::map<std::tuple<int, double, Eigen::Index, std::size_t>, McCell> cells;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const Job& job = jobs[k];
        std::size_t slot = 0;
        for (const auto& policy : config.bandwidths) {
            for (Method method : config.methods) {
                auto& cell = cells[{job.model, job.theta_o, job.n, slot}];
                cell.model = job.model;
                cell.theta_o = job.theta_o;
                cell.n = job.n;
                cell.bandwidth = policy.label();
                cell.method = method;
                const double estimate = outcome[k][slot++];
                if (std::isnan(estimate))
                    ++cell.failures;
                else
                    cell.estimates.push_back(estimate);
            }
        }
    }
    // Cells ordered by model, method, bandwidth, n, theta_o.
    for (int model : config.models)
        for (std::size_t slot = 0; slot < per_job; ++slot)
            for (Eigen::Index n : config.sample_sizes)
                for (double theta_o : config.thetas) {
                    McCell cell = cells.at({model, theta_o, n, slot});
                    summarize(cell);
                    report.cells.push_back(std::move(cell));
                }
    report.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

namespace {

struct BaselineCell {
    Eigen::VectorXd z;
    Eigen::VectorXd eps;
};

template <typename Criterion>
GridSearchResult run_baseline(const Dataset& data, Family family, const BaselineOptions& options, Sense sense,
                              Criterion&& criterion) {
    const BandwidthPlan plan(data.x, options.bandwidth, options.kernel, options.grid_size);
    const auto objective = [&](double theta) {
        BaselineCell cell;
        cell.z = forward(family, theta, data.y);
        const AdditiveFit fitted = plan.design_for(cell.z).fit(cell.z, options.tol, options.max_iter);
        cell.eps = cell.z - predict_rows(fitted, data.x);
        double value = criterion(theta, cell);
        if (options.normalized) {
            const double var = (cell.z.array() - cell.z.mean()).square().sum() / static_cast<double>(cell.z.size() - 1);
            if (!(var > 0)) throw DegenerateData("baseline: transformed response has zero variance");
            value = criterion.normalize(value, var);
        }
        return value;
    };
    return grid_search(objective, options.grid, sense);
}

struct Q3 {
    Eigen::MatrixXd instruments;
    Eigen::MatrixXd weight;
    double operator()(double, const BaselineCell& cell) const {
        const Eigen::VectorXd moment = instruments.transpose() * cell.eps;
        return moment.dot(weight * moment);
    }
    static double normalize(double value, double var) { return value / var; }
};

struct Q4 {
    const Dataset* data;
    Family family;
    double operator()(double theta, const BaselineCell& cell) const {
        const auto n = static_cast<double>(cell.eps.size());
        double jacobian = 0.0;
        for (Eigen::Index i = 0; i < data->size(); ++i) jacobian += std::log(dy(family, theta, data->y[i]));
        const double rss = cell.eps.squaredNorm() / n;
        if (!(rss > 0)) throw DegenerateData("q4: zero residual sum of squares");
        return jacobian / n - std::log(rss);
    }
    // log(RSS / (n var)) = log(RSS / n) - log(var)
    static double normalize(double value, double var) { return value + std::log(var); }
};

} // namespace

GridSearchResult baseline_q3(const Dataset& data, Family family, const BaselineOptions& options) {
    const Eigen::Index n = data.size();
    Q3 q3;
    if (options.instruments) {
        q3.instruments = *options.instruments;
        if (q3.instruments.rows() != n) throw InvalidValue("q3: instruments need n rows");
    } else {
        q3.instruments.resize(n, data.dim() + 1);
        q3.instruments.col(0).setOnes();
        q3.instruments.rightCols(data.dim()) = data.x;
    }
    const Eigen::Index q = q3.instruments.cols();
    q3.weight = options.weight ? *options.weight : Eigen::MatrixXd::Identity(q, q);
    if (q3.weight.rows() != q || q3.weight.cols() != q) throw InvalidValue("q3: weight must be q x q");
    return run_baseline(data, family, options, Sense::Min, q3);
}

GridSearchResult baseline_q4(const Dataset& data, Family family, const BaselineOptions& options) {
    return run_baseline(data, family, options, Sense::Max, Q4{&data, family});
}

} // namespace semitrans
