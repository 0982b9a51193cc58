#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

namespace semitrans {

enum class Kernel { Quartic, Gaussian };

Kernel parse_kernel(std::string_view token);
std::string to_string(Kernel kernel);

/// K(u): quartic (15/16)(1 - u^2)^2 on |u| <= 1, or the standard normal density.
template <typename Scalar>
Scalar kernel_value(Kernel kernel, Scalar u) {
    switch (kernel) {
    case Kernel::Quartic: {
        const Scalar a = 1 - u * u;
        return a > 0 ? Scalar(15) / 16 * a * a : Scalar(0);
    }
    case Kernel::Gaussian:
        return std::exp(-u * u / 2) / std::sqrt(2 * std::numbers::pi_v<Scalar>);
    }
    return Scalar(0);
}

/// Scaled kernel K((x - x0) / h) / h.
template <typename Scalar>
Scalar kernel_scaled(Kernel kernel, Scalar x, Scalar x0, Scalar h) {
    return kernel_value(kernel, (x - x0) / h) / h;
}

/// Half-width of the support in units of h; infinite for the Gaussian.
inline double kernel_radius(Kernel kernel) {
    return kernel == Kernel::Quartic ? 1.0 : HUGE_VAL;
}

} // namespace semitrans
