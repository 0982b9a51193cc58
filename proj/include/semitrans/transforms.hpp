#pragma once

// Parametric response transformations Lambda_theta(y) with their inverses
// and first derivatives in y and in theta.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "semitrans/errors.hpp"

namespace semitrans {

enum class Family { BoxCox, ZellnerRevankar, Arcsinh };

/// Parses "boxcox" | "zellner" | "arcsinh" (case-insensitive).
Family parse_family(std::string_view token);
std::string to_string(Family family);

/// Closed parameter interval; the default matches the estimation grid.
struct ThetaBounds {
    double lo = -0.5;
    double hi = 1.5;
};

/// A transformation parameter that is known to lie in its bounds.
class Theta {
public:
    explicit Theta(double value, ThetaBounds bounds = {}) : value_(value), bounds_(bounds) {
        if (!std::isfinite(value) || value < bounds.lo || value > bounds.hi)
            throw ParameterError("theta = " + std::to_string(value) + " outside [" +
                                 std::to_string(bounds.lo) + ", " + std::to_string(bounds.hi) + "]");
    }
    double value() const { return value_; }
    const ThetaBounds& bounds() const { return bounds_; }
    operator double() const { return value_; }

private:
    double value_;
    ThetaBounds bounds_;
};

namespace detail {

// Below this |theta| the Box-Cox and arcsinh maps use their series forms.
inline constexpr double kSeriesSwitch = 1e-6;

template <typename Scalar>
[[noreturn]] void throw_domain(Family family, Scalar theta, Scalar y) {
    throw DomainError(to_string(family) + ": y = " + std::to_string(double(y)) +
                      " outside the domain at theta = " + std::to_string(double(theta)));
}

// Upper end of the increasing branch of ln y + theta y^2 (theta < 0).
template <typename Scalar>
Scalar zellner_ymax(Scalar theta) {
    return std::sqrt(Scalar(-0.5) / theta);
}

template <typename Scalar>
void check_domain(Family family, Scalar theta, Scalar y) {
    switch (family) {
    case Family::BoxCox:
        if (!(y > 0) || !std::isfinite(y)) throw_domain(family, theta, y);
        return;
    case Family::ZellnerRevankar:
        if (!(y > 0) || !std::isfinite(y)) throw_domain(family, theta, y);
        if (theta < 0 && !(y < zellner_ymax(theta))) throw_domain(family, theta, y);
        return;
    case Family::Arcsinh:
        if (!std::isfinite(y)) throw_domain(family, theta, y);
        return;
    }
}

// (u e^u - e^u + 1) / u^2 = sum_{k>=2} (k-1) u^{k-2} / k!
template <typename Scalar>
Scalar boxcox_dtheta_series(Scalar u) {
    Scalar sum = Scalar(0.5);
    Scalar power = Scalar(1);
    Scalar factorial = Scalar(2);
    for (int k = 3; k < 30; ++k) {
        power *= u;
        factorial *= k;
        const Scalar term = Scalar(k - 1) * power / factorial;
        sum += term;
        if (std::abs(term) <= std::numeric_limits<Scalar>::epsilon() * std::abs(sum)) break;
    }
    return sum;
}

} // namespace detail

template <typename Scalar>
Scalar forward(Family family, Scalar theta, Scalar y) {
    detail::check_domain(family, theta, y);
    switch (family) {
    case Family::BoxCox: {
        const Scalar log_y = std::log(y);
        if (std::abs(theta) < detail::kSeriesSwitch) {
            const Scalar u = theta * log_y;
            return log_y * (Scalar(1) + u / 2 + u * u / 6);
        }
        return std::expm1(theta * log_y) / theta;
    }
    case Family::ZellnerRevankar:
        return std::log(y) + theta * y * y;
    case Family::Arcsinh:
        if (std::abs(theta) < detail::kSeriesSwitch) return y - theta * theta * y * y * y / 6;
        return std::asinh(theta * y) / theta;
    }
    return Scalar(0);
}

/// Lambda'_theta(y), strictly positive on the domain.
template <typename Scalar>
Scalar dy(Family family, Scalar theta, Scalar y) {
    detail::check_domain(family, theta, y);
    switch (family) {
    case Family::BoxCox:
        return std::exp((theta - 1) * std::log(y));
    case Family::ZellnerRevankar:
        return 1 / y + 2 * theta * y;
    case Family::Arcsinh:
        return 1 / std::hypot(Scalar(1), theta * y);
    }
    return Scalar(0);
}

/// d Lambda_theta(y) / d theta.
template <typename Scalar>
Scalar dtheta(Family family, Scalar theta, Scalar y) {
    detail::check_domain(family, theta, y);
    switch (family) {
    case Family::BoxCox: {
        const Scalar log_y = std::log(y);
        const Scalar u = theta * log_y;
        if (std::abs(theta) < detail::kSeriesSwitch || std::abs(u) < Scalar(0.1))
            return log_y * log_y * detail::boxcox_dtheta_series(u);
        const Scalar y_theta = std::exp(u);
        return (theta * y_theta * log_y - std::expm1(u)) / (theta * theta);
    }
    case Family::ZellnerRevankar:
        return y * y;
    case Family::Arcsinh: {
        const Scalar t = theta * y;
        if (std::abs(t) < Scalar(1e-3)) {
            const Scalar y3 = y * y * y;
            return -theta * y3 / 3 + Scalar(0.3) * theta * theta * theta * y3 * y * y;
        }
        return (t / std::hypot(Scalar(1), t) - std::asinh(t)) / (theta * theta);
    }
    }
    return Scalar(0);
}

namespace detail {

template <typename Scalar>
Scalar zellner_inverse(Scalar theta, Scalar z) {
    const auto f = [theta](Scalar y) { return std::log(y) + theta * y * y; };
    Scalar lo, hi;
    if (theta >= 0) {
        hi = std::exp(z);
        lo = hi;
        int shrink = 0;
        while (f(lo) > z) {
            hi = lo;
            lo *= Scalar(0.5);
            if (++shrink > 2000 || !(lo > 0)) throw ConvergenceError("zellner inverse: cannot bracket");
        }
    } else {
        const Scalar y_max = zellner_ymax(theta);
        const Scalar z_max = std::log(y_max) - Scalar(0.5);
        if (!(z < z_max))
            throw RangeError("zellner: z = " + std::to_string(double(z)) + " above the range at theta = " +
                             std::to_string(double(theta)));
        lo = std::exp(z);
        hi = y_max;
    }
    if (f(lo) == z) return lo;
    if (f(hi) == z) return hi;

    Scalar y = Scalar(0.5) * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const Scalar g = f(y) - z;
        if (g == 0) return y;
        if (g < 0)
            lo = y;
        else
            hi = y;
        const Scalar slope = 1 / y + 2 * theta * y;
        Scalar next = y - g / slope;
        if (!(next > lo && next < hi)) next = Scalar(0.5) * (lo + hi);
        const Scalar step = std::abs(next - y);
        y = next;
        if (step <= Scalar(1e-12) * std::max(Scalar(1), y) || hi - lo <= Scalar(1e-12) * std::max(Scalar(1), y))
            return y;
    }
    throw ConvergenceError("zellner inverse: no convergence in 200 iterations");
}

} // namespace detail

template <typename Scalar>
Scalar inverse(Family family, Scalar theta, Scalar z) {
    if (!std::isfinite(z)) throw RangeError("inverse: non-finite z");
    switch (family) {
    case Family::BoxCox: {
        if (theta == 0) return std::exp(z);
        const Scalar base = theta * z;
        if (!(base > -1))
            throw RangeError("boxcox: 1 + theta z <= 0 (theta = " + std::to_string(double(theta)) +
                             ", z = " + std::to_string(double(z)) + ")");
        const Scalar y = std::exp(std::log1p(base) / theta);
        if (!std::isfinite(y) || !(y > 0)) throw RangeError("boxcox: inverse overflows");
        return y;
    }
    case Family::ZellnerRevankar:
        return detail::zellner_inverse(theta, z);
    case Family::Arcsinh:
        if (std::abs(theta) < detail::kSeriesSwitch) {
            // Fixed-point on y = z + theta^2 y^3 / 6; two passes reach machine precision here.
            Scalar y = z;
            for (int k = 0; k < 3; ++k) y = z + theta * theta * y * y * y / 6;
            return y;
        }
        {
            const Scalar y = std::sinh(theta * z) / theta;
            if (!std::isfinite(y)) throw RangeError("arcsinh: inverse overflows");
            return y;
        }
    }
    return Scalar(0);
}

/// Elementwise application over an Eigen vector expression.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> forward(Family family, typename Derived::Scalar theta,
                                                                   const Eigen::MatrixBase<Derived>& y) {
    using Scalar = typename Derived::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = forward<Scalar>(family, theta, y.derived().coeff(i));
    return out;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> dy(Family family, typename Derived::Scalar theta,
                                                              const Eigen::MatrixBase<Derived>& y) {
    using Scalar = typename Derived::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = dy<Scalar>(family, theta, y.derived().coeff(i));
    return out;
}

} // namespace semitrans
