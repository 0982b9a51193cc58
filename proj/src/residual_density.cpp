#include "semitrans/residual_density.hpp"

#include <algorithm>
#include <cmath>

#include "semitrans/errors.hpp"

namespace semitrans {

ResidualSet residuals(const Dataset& data, Family family, double theta, const AdditiveFit& fit) {
    ResidualSet out;
    out.theta = theta;
    out.eps.resize(data.size());
    for (Eigen::Index i = 0; i < data.size(); ++i)
        out.eps[i] = forward(family, theta, data.y[i]) - predict(fit, data.x.row(i).transpose());
    return out;
}

double quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw EmptyData("quantile of empty sample");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double silverman_g(const Eigen::VectorXd& eps) {
    const Eigen::Index n = eps.size();
    if (n < 2) throw DegenerateData("silverman: need at least two residuals");
    const double mean = eps.mean();
    const double sd = std::sqrt((eps.array() - mean).square().sum() / static_cast<double>(n - 1));
    if (!(sd > 0)) throw DegenerateData("silverman: residuals have zero spread");
    std::vector<double> sorted(eps.data(), eps.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    // Heavily tied samples can have IQR = 0; sd alone is used then.
    const double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
    return 1.06 * spread * std::pow(static_cast<double>(n), -0.2);
}

double kde(const Eigen::VectorXd& eps, double g, double e, Kernel kernel, bool floor_for_log) {
    if (!(g > 0)) throw InvalidValue("kde: bandwidth must be positive");
    if (eps.size() == 0) throw EmptyData("kde: no residuals");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < eps.size(); ++i) sum += kernel_value(kernel, (e - eps[i]) / g);
    const double value = sum / (static_cast<double>(eps.size()) * g);
    return floor_for_log ? std::max(value, kDensityFloor) : value;
}

KdeEvaluator::KdeEvaluator(const Eigen::VectorXd& eps, double g, Kernel kernel)
    : eps_(eps), sorted_(eps.data(), eps.data() + eps.size()), g_(g), kernel_(kernel) {
    if (!(g > 0)) throw InvalidValue("kde: bandwidth must be positive");
    if (eps.size() == 0) throw EmptyData("kde: no residuals");
    std::sort(sorted_.begin(), sorted_.end());
}

double KdeEvaluator::sum_window(double e) const {
    const double radius = kernel_radius(kernel_) * g_;
    auto first = sorted_.begin();
    auto last = sorted_.end();
    if (std::isfinite(radius)) {
        first = std::lower_bound(sorted_.begin(), sorted_.end(), e - radius);
        last = std::upper_bound(first, sorted_.end(), e + radius);
    }
    double sum = 0.0;
    for (auto it = first; it != last; ++it) sum += kernel_value(kernel_, (e - *it) / g_);
    return sum;
}

double KdeEvaluator::operator()(double e) const {
    return sum_window(e) / (static_cast<double>(sorted_.size()) * g_);
}

Eigen::VectorXd KdeEvaluator::at_samples(bool leave_one_out) const {
    const Eigen::Index n = eps_.size();
    Eigen::VectorXd out(n);
    const double self = kernel_value(kernel_, 0.0);
    const double denom = static_cast<double>(leave_one_out ? n - 1 : n) * g_;
    for (Eigen::Index i = 0; i < n; ++i) {
        double sum = sum_window(eps_[i]);
        if (leave_one_out) sum = std::max(sum - self, 0.0);
        out[i] = denom > 0 ? sum / denom : 0.0;
    }
    return out;
}

} // namespace semitrans
