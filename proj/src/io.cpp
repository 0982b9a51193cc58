#include "semitrans/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unistd.h>

#include "semitrans/errors.hpp"

namespace semitrans {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(s.substr(start)));
            return out;
        }
        out.push_back(trim(s.substr(start, pos - start)));
        start = pos + 1;
    }
}

// Locale-independent; rejects trailing garbage and non-finite values.
std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(value)) return std::nullopt;
    return value;
}

double parse_real(std::string_view key, std::string_view value) {
    const auto v = to_double(value);
    if (!v) throw InvalidValue(std::string(key) + ": expected a finite number, got '" + std::string(value) + "'");
    return *v;
}

long long parse_integer(std::string_view key, std::string_view value) {
    value = trim(value);
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
        throw InvalidValue(std::string(key) + ": expected an integer, got '" + std::string(value) + "'");
    return out;
}

std::vector<double> parse_real_list(std::string_view key, std::string_view value) {
    std::vector<double> out;
    for (auto part : split(value, ',')) out.push_back(parse_real(key, part));
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    const std::string v = lower(trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidValue(std::string(key) + ": expected true|false, got '" + std::string(value) + "'");
}

template <typename F>
auto rethrow_as_invalid(std::string_view key, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw InvalidValue(std::string(key) + ": " + e.what());
    }
}

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> number_or_null(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::string format6(const std::optional<double>& v) {
    if (!v) return "NA";
    std::ostringstream os;
    os << std::setprecision(6) << *v;
    return os.str();
}

std::string format17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace

Dataset parse_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    {
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            std::string_view line = text.substr(start, end - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            lines.push_back(line);
            start = end + 1;
        }
    }
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
    if (first == lines.size()) throw ParseError("csv: missing header row");

    const auto header = split(lines[first], ',');
    std::optional<std::size_t> y_col;
    std::vector<std::size_t> x_cols;
    Dataset data;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (lower(header[c]) == "y") {
            if (y_col) throw ParseError("csv: more than one 'y' column");
            y_col = c;
        } else {
            x_cols.push_back(c);
            data.names.emplace_back(header[c]);
        }
    }
    if (!y_col) throw MissingColumn("csv: no column named 'y'");
    if (x_cols.empty()) throw ParseError("csv: no covariate columns");

    std::vector<std::vector<double>> rows;
    for (std::size_t l = first + 1; l < lines.size(); ++l) {
        if (trim(lines[l]).empty()) continue;
        const auto cells = split(lines[l], ',');
        const std::size_t row_no = l + 1; // 1-based file line
        if (cells.size() != header.size())
            throw ParseError("csv: line " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                             " fields, expected " + std::to_string(header.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = to_double(cells[c]);
            if (!v)
                throw NonNumericCell("csv: non-numeric cell '" + std::string(cells[c]) + "' at line " +
                                     std::to_string(row_no) + ", column " + std::to_string(c + 1) + " (" +
                                     std::string(header[c]) + ")");
            row[c] = *v;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("csv: no data rows");

    const auto n = static_cast<Eigen::Index>(rows.size());
    data.y.resize(n);
    data.x.resize(n, static_cast<Eigen::Index>(x_cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        data.y[i] = rows[i][*y_col];
        for (std::size_t a = 0; a < x_cols.size(); ++a) data.x(i, static_cast<Eigen::Index>(a)) = rows[i][x_cols[a]];
    }
    return data;
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str());
}

void apply_setting(RunConfig& config, std::string_view raw_key, std::string_view value) {
    const std::string key = lower(trim(raw_key));
    value = trim(value);
    rethrow_as_invalid(key, [&] {
        if (key == "transform" || key == "family") {
            config.family = parse_family(value);
        } else if (key == "method") {
            config.method = parse_method(value);
        } else if (key == "grid") {
            const auto parts = parse_real_list(key, value);
            if (parts.size() != 3) throw InvalidValue("grid: expected lo,hi,step");
            ThetaGrid grid{parts[0], parts[1], parts[2]};
            grid.validate();
            config.grid = grid;
        } else if (key == "h0") {
            const double h0 = parse_real(key, value);
            if (!(h0 > 0)) throw InvalidValue("h0: must be positive");
            const auto cv_grid = config.bandwidth.cv_grid;
            config.bandwidth = BandwidthPolicy::fixed(h0);
            config.bandwidth.cv_grid = cv_grid;
        } else if (key == "h_per_coord") {
            auto values = parse_real_list(key, value);
            for (double h : values)
                if (!(h > 0)) throw InvalidValue("h_per_coord: values must be positive");
            const auto cv_grid = config.bandwidth.cv_grid;
            config.bandwidth = BandwidthPolicy::per_coordinate(std::move(values));
            config.bandwidth.cv_grid = cv_grid;
        } else if (key == "cv") {
            if (parse_bool(key, value)) {
                config.bandwidth.kind = BandwidthPolicy::Kind::CrossValidation;
                config.sim_cv = true;
            } else {
                if (config.bandwidth.kind == BandwidthPolicy::Kind::CrossValidation)
                    config.bandwidth.kind = BandwidthPolicy::Kind::Fixed;
                config.sim_cv = false;
            }
        } else if (key == "cv_grid") {
            auto values = parse_real_list(key, value);
            for (double h : values)
                if (!(h > 0)) throw InvalidValue("cv_grid: values must be positive");
            config.bandwidth.cv_grid = std::move(values);
        } else if (key == "kernel") {
            config.kernel = parse_kernel(value);
        } else if (key == "seed") {
            const long long s = parse_integer(key, value);
            if (s < 0) throw InvalidValue("seed: must be non-negative");
            config.seed = static_cast<std::uint64_t>(s);
        } else if (key == "b") {
            const long long b = parse_integer(key, value);
            if (b < 1) throw InvalidValue("B: must be at least 1");
            config.B = static_cast<int>(b);
        } else if (key == "level") {
            const double level = parse_real(key, value);
            if (!(level > 0 && level < 1)) throw InvalidValue("level: must lie in (0, 1)");
            config.level = level;
        } else if (key == "threads") {
            const long long t = parse_integer(key, value);
            if (t < 1) throw InvalidValue("threads: must be at least 1");
            config.threads = static_cast<int>(t);
        } else if (key == "g") {
            const double g = parse_real(key, value);
            if (!(g > 0)) throw InvalidValue("g: must be positive");
            config.g = g;
        } else if (key == "g_rule") {
            if (lower(value) != "silverman") throw InvalidValue("g_rule: only 'silverman' is supported");
            config.g_rule = "silverman";
        } else if (key == "density_loo") {
            config.density_leave_one_out = parse_bool(key, value);
        } else if (key == "recenter") {
            const std::string v = lower(value);
            if (v == "bootstrap")
                config.recenter = RecenterPoints::Bootstrap;
            else if (v == "original")
                config.recenter = RecenterPoints::Original;
            else
                throw InvalidValue("recenter: expected bootstrap|original");
        } else if (key == "tol") {
            const double tol = parse_real(key, value);
            if (!(tol > 0)) throw InvalidValue("tol: must be positive");
            config.tol = tol;
        } else if (key == "max_iter") {
            const long long m = parse_integer(key, value);
            if (m < 1) throw InvalidValue("max_iter: must be at least 1");
            config.max_iter = static_cast<int>(m);
        } else if (key == "data") {
            config.data = std::string(value);
        } else if (key == "out") {
            config.out = std::string(value);
        } else if (key == "theta") {
            config.theta = parse_real(key, value);
        } else if (key == "models") {
            std::vector<int> models;
            for (auto part : split(value, ',')) {
                const long long m = parse_integer(key, part);
                if (m < 1 || m > 3) throw InvalidValue("models: values must be 1, 2 or 3");
                models.push_back(static_cast<int>(m));
            }
            config.models = std::move(models);
        } else if (key == "thetas") {
            config.thetas = parse_real_list(key, value);
        } else if (key == "methods") {
            std::vector<Method> methods;
            for (auto part : split(value, ',')) methods.push_back(parse_method(part));
            config.methods = std::move(methods);
        } else if (key == "h0_list") {
            auto values = parse_real_list(key, value);
            for (double h : values)
                if (!(h > 0)) throw InvalidValue("h0_list: values must be positive");
            config.h0_list = std::move(values);
            config.sim_cv = false;
        } else if (key == "n") {
            std::vector<Eigen::Index> sizes;
            for (auto part : split(value, ',')) {
                const long long n = parse_integer(key, part);
                if (n < 4) throw InvalidValue("n: must be at least 4");
                sizes.push_back(static_cast<Eigen::Index>(n));
            }
            config.sample_sizes = std::move(sizes);
        } else if (key == "reps") {
            const long long r = parse_integer(key, value);
            if (r < 1) throw InvalidValue("reps: must be at least 1");
            config.reps = static_cast<int>(r);
        } else {
            throw UnknownKey("unknown configuration key '" + std::string(raw_key) + "'");
        }
        return 0;
    });
}

RunConfig parse_config_text(std::string_view text, RunConfig base) {
    std::size_t start = 0;
    int line_no = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = trim(text.substr(start, end - start));
        ++line_no;
        start = end + 1;
        if (line.empty() || line.front() == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw InvalidValue("config line " + std::to_string(line_no) + ": expected key = value");
        apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), std::move(base));
}

FitOptions fit_options(const RunConfig& config) {
    FitOptions options;
    options.method = config.method;
    options.grid = config.grid;
    options.bandwidth = config.bandwidth;
    options.kernel = config.kernel;
    options.tol = config.tol;
    options.max_iter = config.max_iter;
    options.pl.g = config.g;
    options.pl.leave_one_out = config.density_leave_one_out;
    return options;
}

BootstrapOptions bootstrap_options(const RunConfig& config) {
    BootstrapOptions boot;
    boot.B = config.B;
    boot.level = config.level;
    boot.seed = config.seed;
    boot.threads = config.threads;
    boot.recenter = config.recenter;
    return boot;
}

McConfig mc_config(const RunConfig& config) {
    McConfig mc;
    mc.models = config.models;
    mc.thetas = config.thetas;
    mc.methods = config.methods;
    mc.sample_sizes = config.sample_sizes;
    mc.reps = config.reps;
    mc.seed = config.seed;
    mc.threads = config.threads;
    mc.fit = fit_options(config);
    mc.bandwidths.clear();
    if (config.sim_cv) {
        mc.bandwidths.push_back(BandwidthPolicy::cross_validation(config.bandwidth.cv_grid));
    } else {
        for (double h0 : config.h0_list) mc.bandwidths.push_back(BandwidthPolicy::fixed(h0));
    }
    return mc;
}

nlohmann::json to_json(const AdditiveFit& fit) {
    nlohmann::json components = nlohmann::json::array();
    for (const auto& c : fit.components)
        components.push_back({{"grid", std::vector<double>(c.grid.data(), c.grid.data() + c.grid.size())},
                              {"values", std::vector<double>(c.values.data(), c.values.data() + c.values.size())}});
    return {{"c0", fit.c0},
            {"components", components},
            {"iterations", fit.diagnostics.iterations},
            {"update_norm", fit.diagnostics.update_norm},
            {"converged", fit.diagnostics.converged},
            {"singular_points", fit.diagnostics.singular_points}};
}

nlohmann::json to_json(const EstimationResult& result) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : result.curve) curve.push_back({{"theta", p.theta}, {"value", p.value}});
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& s : result.diagnostics.skipped) skipped.push_back({{"theta", s.theta}, {"reason", s.reason}});
    const auto& d = result.diagnostics;
    const auto& h = d.bandwidths;
    nlohmann::json bandwidths = {{"h", std::vector<double>(h.h.data(), h.h.data() + h.h.size())}};
    if (h.h0) bandwidths["h0"] = std::vector<double>(h.h0->data(), h.h0->data() + h.h0->size());
    const auto& eps = result.residuals.eps;
    return {{"theta_hat", result.theta_hat},
            {"method", to_string(result.method)},
            {"transform", to_string(result.family)},
            {"curve", curve},
            {"fit", to_json(result.fit_at_theta_hat)},
            {"residuals",
             {{"theta", result.residuals.theta},
              {"g", optional_number(result.residuals.g)},
              {"eps", std::vector<double>(eps.data(), eps.data() + eps.size())}}},
            {"diagnostics",
             {{"floored_density_count", d.floored},
              {"density_floor", d.density_floor},
              {"g", optional_number(d.g)},
              {"backfit_iterations", d.backfit_iterations},
              {"nonconverged_cells", d.nonconverged_cells},
              {"singular_points", d.singular_points},
              {"bandwidths", bandwidths},
              {"skipped", skipped},
              {"degenerate", d.degenerate}}}};
}

nlohmann::json to_json(const BootstrapResult& result) {
    return {{"method", to_string(result.method)},
            {"theta_hat", result.theta_hat},
            {"B", result.B},
            {"level", result.level},
            {"replicates", result.replicates},
            {"se", optional_number(result.se)},
            {"ci", {result.ci_lo, result.ci_hi}},
            {"failures", result.failures},
            {"experimental", result.experimental}};
}

nlohmann::json to_json(const McReport& report) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : report.cells)
        cells.push_back({{"model", c.model},
                         {"theta_o", c.theta_o},
                         {"bandwidth", c.bandwidth},
                         {"method", to_string(c.method)},
                         {"n", c.n},
                         {"reps", c.reps},
                         {"failures", c.failures},
                         {"mean", optional_number(c.mean)},
                         {"sd", optional_number(c.sd)},
                         {"mse", optional_number(c.mse)},
                         {"estimates", c.estimates}});
    return {{"reps", report.reps}, {"elapsed_seconds", report.elapsed}, {"cells", cells}};
}

McReport mc_report_from_json(const nlohmann::json& doc) {
    McReport report;
    try {
        report.reps = doc.at("reps").get<int>();
        report.elapsed = doc.at("elapsed_seconds").get<double>();
        for (const auto& c : doc.at("cells")) {
            McCell cell;
            cell.model = c.at("model").get<int>();
            cell.theta_o = c.at("theta_o").get<double>();
            cell.bandwidth = c.at("bandwidth").get<std::string>();
            cell.method = parse_method(c.at("method").get<std::string>());
            cell.n = c.at("n").get<Eigen::Index>();
            cell.reps = c.at("reps").get<int>();
            cell.failures = c.at("failures").get<int>();
            cell.mean = number_or_null(c.at("mean"));
            cell.sd = number_or_null(c.at("sd"));
            cell.mse = number_or_null(c.at("mse"));
            cell.estimates = c.at("estimates").get<std::vector<double>>();
            report.cells.push_back(std::move(cell));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("mc report: ") + e.what());
    }
    return report;
}

std::string curve_csv(const EstimationResult& result) {
    std::ostringstream os;
    os << "theta,value\n";
    for (const auto& p : result.curve) os << format17(p.theta) << ',' << format17(p.value) << '\n';
    return os.str();
}

std::string replicates_csv(const BootstrapResult& result) {
    std::ostringstream os;
    os << "replicate,theta\n";
    for (std::size_t b = 0; b < result.replicates.size(); ++b) os << b << ',' << format17(result.replicates[b]) << '\n';
    return os.str();
}

std::string mc_csv(const McReport& report) {
    std::vector<double> thetas;
    for (const auto& c : report.cells)
        if (std::find(thetas.begin(), thetas.end(), c.theta_o) == thetas.end()) thetas.push_back(c.theta_o);
    std::sort(thetas.begin(), thetas.end());

    using Key = std::tuple<int, std::string, std::string, Eigen::Index>;
    std::vector<Key> groups;
    std::map<Key, std::map<double, const McCell*>> table;
    for (const auto& c : report.cells) {
        const Key key{c.model, to_string(c.method), c.bandwidth, c.n};
        if (!table.count(key)) groups.push_back(key);
        table[key][c.theta_o] = &c;
    }

    std::ostringstream os;
    os << "model,method,bandwidth,n,stat";
    for (double t : thetas) os << ",theta_o=" << t;
    os << '\n';
    const std::pair<const char*, std::optional<double> McCell::*> stats[] = {
        {"mean", &McCell::mean}, {"sd", &McCell::sd}, {"mse", &McCell::mse}};
    for (const auto& key : groups) {
        for (const auto& [name, member] : stats) {
            os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << std::get<3>(key)
               << ',' << name;
            for (double t : thetas) {
                const auto& row = table[key];
                const auto it = row.find(t);
                os << ',' << (it == row.end() ? std::string("NA") : format6(it->second->*member));
            }
            os << '\n';
        }
    }
    return os.str();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
    }
}

void emit_report(const EstimationResult& result, ReportFormat format, const std::filesystem::path& path) {
    write_atomic(path, format == ReportFormat::Json ? to_json(result).dump(2) + "\n" : curve_csv(result));
}

void emit_report(const BootstrapResult& result, ReportFormat format, const std::filesystem::path& path) {
    write_atomic(path, format == ReportFormat::Json ? to_json(result).dump(2) + "\n" : replicates_csv(result));
}

void emit_report(const McReport& report, ReportFormat format, const std::filesystem::path& path) {
    write_atomic(path, format == ReportFormat::Json ? to_json(report).dump(2) + "\n" : mc_csv(report));
}

} // namespace semitrans
