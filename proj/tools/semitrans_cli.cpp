// Command-line front end: fit, bootstrap, simulate, cv.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 estimation failure.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "semitrans/errors.hpp"
#include "semitrans/io.hpp"

namespace fs = std::filesystem;
using namespace semitrans;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kEstimation = 4 };

struct Binding {
    CLI::Option* option;
    std::string key;
    std::string value;
};

class Flags {
public:
    void add(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
        bindings_.push_back(std::make_unique<Binding>());
        Binding& b = *bindings_.back();
        b.key = key;
        b.option = app->add_option(name, b.value, help);
    }
    void add_switch(CLI::App* app, const std::string& name, const std::string& key, const std::string& value,
                    const std::string& help) {
        bindings_.push_back(std::make_unique<Binding>());
        Binding& b = *bindings_.back();
        b.key = key;
        b.value = value;
        b.option = app->add_flag(name, help);
    }
    void apply(RunConfig& config) const {
        for (const auto& b : bindings_)
            if (b->option->count() > 0) apply_setting(config, b->key, b->value);
    }

private:
    std::vector<std::unique_ptr<Binding>> bindings_;
};

fs::path with_suffix(const std::string& stem, const std::string& suffix) {
    std::string base = stem;
    for (const char* ext : {".json", ".csv"})
        if (base.size() > std::string(ext).size() && base.ends_with(ext)) base.resize(base.size() - std::string(ext).size());
    return fs::path(base + suffix);
}

void add_fit_flags(CLI::App* app, Flags& flags) {
    flags.add(app, "--data", "data", "Input CSV with a 'y' column and covariate columns");
    flags.add(app, "--method", "method", "pl | md");
    flags.add(app, "--transform", "transform", "boxcox | zellner | arcsinh");
    flags.add(app, "--grid", "grid", "lo,hi,step of the parameter grid");
    flags.add(app, "--h0", "h0", "Base bandwidth; h = h0 n^(-1/5) for every coordinate");
    flags.add(app, "--h-per-coord", "h_per_coord", "Comma-separated base bandwidths, one per covariate");
    flags.add_switch(app, "--cv", "cv", "true", "Select bandwidths by leave-one-out cross-validation at each theta");
    flags.add(app, "--cv-grid", "cv_grid", "Comma-separated base bandwidth candidates per coordinate");
    flags.add(app, "--kernel", "kernel", "quartic | gaussian");
    flags.add(app, "--g", "g", "Fixed residual density bandwidth (PL)");
}

void print_fit(const EstimationResult& r) {
    std::cout << std::setprecision(6) << "method      " << to_string(r.method) << '\n'
              << "transform   " << to_string(r.family) << '\n'
              << "theta_hat   " << r.theta_hat << '\n'
              << "cells       " << r.curve.size() << " evaluated, " << r.diagnostics.skipped.size() << " skipped\n";
    if (r.diagnostics.degenerate) std::cout << "warning     residuals are degenerate\n";
}

int run_fit(const RunConfig& config) {
    if (config.data.empty()) throw InvalidValue("fit: --data is required");
    const Dataset data = load_csv(config.data);
    const EstimationResult result = fit(data, config.family, fit_options(config));
    print_fit(result);
    if (!config.out.empty()) {
        emit_report(result, ReportFormat::Json, with_suffix(config.out, ".json"));
        emit_report(result, ReportFormat::Csv, with_suffix(config.out, ".curve.csv"));
    }
    return kOk;
}

int run_bootstrap(const RunConfig& config) {
    if (config.data.empty()) throw InvalidValue("bootstrap: --data is required");
    const Dataset data = load_csv(config.data);
    const FitOptions options = fit_options(config);
    const BootstrapOptions boot = bootstrap_options(config);
    const BootstrapResult result = config.method == Method::PL ? bootstrap_pl_naive(data, config.family, options, boot)
                                                               : bootstrap_md(data, config.family, options, boot);
    std::cout << std::setprecision(6) << "method      " << to_string(result.method)
              << (result.experimental ? " (experimental, uncentered)" : "") << '\n'
              << "theta_hat   " << result.theta_hat << '\n'
              << "replicates  " << result.replicates.size() << " of " << result.B << '\n'
              << "se          " << (result.se ? std::to_string(*result.se) : std::string("NA")) << '\n'
              << "ci          [" << result.ci_lo << ", " << result.ci_hi << "] at level " << result.level << '\n';
    if (!config.out.empty()) {
        emit_report(result, ReportFormat::Json, with_suffix(config.out, ".json"));
        emit_report(result, ReportFormat::Csv, with_suffix(config.out, ".replicates.csv"));
    }
    return kOk;
}

int run_simulate(const RunConfig& config) {
    const McReport report = run_mc(mc_config(config));
    std::cout << mc_csv(report);
    std::cout << std::setprecision(6) << "elapsed " << report.elapsed << " s\n";
    if (!config.out.empty()) {
        emit_report(report, ReportFormat::Json, with_suffix(config.out, ".json"));
        emit_report(report, ReportFormat::Csv, with_suffix(config.out, ".csv"));
    }
    return kOk;
}

int run_cv(const RunConfig& config) {
    if (config.data.empty()) throw InvalidValue("cv: --data is required");
    const Dataset data = load_csv(config.data);
    const Eigen::VectorXd z = forward(config.family, config.theta, data.y);
    const auto candidates = bandwidth_grid(config.bandwidth.cv_grid, data.dim(), data.size());
    const CvSelection sel = cv_select_bandwidths(data.x, z, candidates, config.kernel);

    nlohmann::json doc;
    doc["theta"] = config.theta;
    doc["selected_index"] = sel.index;
    nlohmann::json rows = nlohmann::json::array();
    std::cout << std::setprecision(6) << "h0" << std::string(18, ' ') << "cv\n";
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const auto& h0 = *candidates[c].h0;
        std::string label;
        for (Eigen::Index a = 0; a < h0.size(); ++a) label += (a ? "," : "") + std::to_string(h0[a]).substr(0, 5);
        std::cout << std::left << std::setw(20) << label << sel.scores[c] << (c == sel.index ? "  *" : "") << '\n';
        rows.push_back({{"h0", std::vector<double>(h0.data(), h0.data() + h0.size())},
                        {"h", std::vector<double>(candidates[c].h.data(), candidates[c].h.data() + h0.size())},
                        {"cv", sel.scores[c]}});
    }
    doc["candidates"] = rows;
    if (!config.out.empty()) write_atomic(with_suffix(config.out, ".json"), doc.dump(2) + "\n");
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiparametric transformation model estimation"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags flags;
    std::string config_path;
    app.add_option("--config", config_path, "Flat key = value configuration file; flags override it");
    flags.add(&app, "--seed", "seed", "Master random seed");
    flags.add(&app, "--threads", "threads", "Worker threads for replications");
    flags.add(&app, "--out", "out", "Output path stem");

    auto* fit_cmd = app.add_subcommand("fit", "Estimate theta by grid search");
    add_fit_flags(fit_cmd, flags);

    auto* boot_cmd = app.add_subcommand("bootstrap", "Pairs bootstrap standard errors and percentile interval");
    add_fit_flags(boot_cmd, flags);
    flags.add(boot_cmd, "--B", "B", "Number of bootstrap replicates");
    flags.add(boot_cmd, "--level", "level", "Confidence level of the percentile interval");
    flags.add(boot_cmd, "--recenter", "recenter", "bootstrap | original evaluation points (MD)");

    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study on the built-in data-generating process");
    flags.add(sim_cmd, "--models", "models", "Comma-separated model numbers (1,2,3)");
    flags.add(sim_cmd, "--thetas", "thetas", "Comma-separated true parameters");
    flags.add(sim_cmd, "--methods", "methods", "Comma-separated methods (pl,md)");
    flags.add(sim_cmd, "--h0-list", "h0_list", "Comma-separated base bandwidths");
    flags.add_switch(sim_cmd, "--cv", "cv", "true", "Cross-validated bandwidths instead of --h0-list");
    flags.add(sim_cmd, "--cv-grid", "cv_grid", "Base bandwidth candidates for --cv");
    flags.add(sim_cmd, "--n", "n", "Comma-separated sample sizes");
    flags.add(sim_cmd, "--reps", "reps", "Replications per cell");
    flags.add(sim_cmd, "--grid", "grid", "lo,hi,step of the parameter grid");
    flags.add(sim_cmd, "--kernel", "kernel", "quartic | gaussian");

    auto* cv_cmd = app.add_subcommand("cv", "Cross-validation scores of candidate bandwidths at one theta");
    flags.add(cv_cmd, "--data", "data", "Input CSV");
    flags.add(cv_cmd, "--transform", "transform", "boxcox | zellner | arcsinh");
    flags.add(cv_cmd, "--theta", "theta", "Parameter at which the response is transformed");
    flags.add(cv_cmd, "--cv-grid", "cv_grid", "Comma-separated base bandwidth candidates per coordinate");
    flags.add(cv_cmd, "--kernel", "kernel", "quartic | gaussian");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) {
            try {
                config = parse_config_file(config_path);
            } catch (const IoError& e) {
                throw ConfigError(e.what());
            }
        }
        flags.apply(config);
        if (fit_cmd->parsed()) return run_fit(config);
        if (boot_cmd->parsed()) return run_bootstrap(config);
        if (sim_cmd->parsed()) return run_simulate(config);
        if (cv_cmd->parsed()) return run_cv(config);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const AllCellsFailed& e) {
        std::cerr << "estimation failed: " << e.what() << '\n';
        return kEstimation;
    } catch (const BootstrapDegenerate& e) {
        std::cerr << "estimation failed: " << e.what() << '\n';
        return kEstimation;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
