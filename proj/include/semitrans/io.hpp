#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "semitrans/dataset.hpp"
#include "semitrans/estimators.hpp"
#include "semitrans/inference.hpp"
#include "semitrans/simulation.hpp"

namespace semitrans {

/// Reads a comma-separated file with a header row. The column named `y`
/// (any case) is the response; every other column is a covariate in file order.
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(std::string_view text);

struct RunConfig {
    Family family = Family::BoxCox;
    Method method = Method::MD;
    ThetaGrid grid;
    BandwidthPolicy bandwidth = BandwidthPolicy::fixed(0.5);
    Kernel kernel = Kernel::Quartic;
    std::uint64_t seed = 1;
    int B = 200;
    double level = 0.95;
    int threads = 1;
    std::optional<double> g;
    std::string g_rule = "silverman";
    bool density_leave_one_out = false;
    RecenterPoints recenter = RecenterPoints::Bootstrap;
    double tol = 1e-6;
    int max_iter = 50;

    std::string data;  // input CSV
    std::string out;   // output path stem

    // cv subcommand: parameter at which the response is transformed
    double theta = 1.0;

    // simulate subcommand
    std::vector<int> models = {1};
    std::vector<double> thetas = {0.0, 0.5, 1.0};
    std::vector<Method> methods = {Method::MD};
    std::vector<double> h0_list = {0.3};
    bool sim_cv = false;
    std::vector<Eigen::Index> sample_sizes = {100};
    int reps = 500;
};

/// Sets one `key = value` entry. Throws UnknownKey or InvalidValue.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Flat `key = value` text; blank lines and lines starting with '#' are ignored.
RunConfig parse_config_text(std::string_view text, RunConfig base = {});
RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base = {});

FitOptions fit_options(const RunConfig& config);
BootstrapOptions bootstrap_options(const RunConfig& config);
McConfig mc_config(const RunConfig& config);

nlohmann::json to_json(const AdditiveFit& fit);
nlohmann::json to_json(const EstimationResult& result);
nlohmann::json to_json(const BootstrapResult& result);
nlohmann::json to_json(const McReport& report);
McReport mc_report_from_json(const nlohmann::json& doc);

std::string curve_csv(const EstimationResult& result);
std::string replicates_csv(const BootstrapResult& result);
/// Mean, sd and mse rows stacked per (model, method, bandwidth, n), one column per theta_o.
std::string mc_csv(const McReport& report);

/// Writes through a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);

enum class ReportFormat { Json, Csv };

void emit_report(const EstimationResult& result, ReportFormat format, const std::filesystem::path& path);
void emit_report(const BootstrapResult& result, ReportFormat format, const std::filesystem::path& path);
void emit_report(const McReport& report, ReportFormat format, const std::filesystem::path& path);

} // namespace semitrans
