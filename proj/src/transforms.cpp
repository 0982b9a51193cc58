#include "semitrans/kernels.hpp"
#include "semitrans/transforms.hpp"

#include <algorithm>
#include <cctype>

namespace semitrans {

namespace {

std::string lower_trimmed(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

} // namespace

Family parse_family(std::string_view token) {
    const std::string t = lower_trimmed(token);
    if (t == "boxcox") return Family::BoxCox;
    if (t == "zellner") return Family::ZellnerRevankar;
    if (t == "arcsinh") return Family::Arcsinh;
    throw InvalidValue("unknown transform '" + std::string(token) + "' (expected boxcox|zellner|arcsinh)");
}

std::string to_string(Family family) {
    switch (family) {
    case Family::BoxCox: return "boxcox";
    case Family::ZellnerRevankar: return "zellner";
    case Family::Arcsinh: return "arcsinh";
    }
    return {};
}

Kernel parse_kernel(std::string_view token) {
    const std::string t = lower_trimmed(token);
    if (t == "quartic") return Kernel::Quartic;
    if (t == "gaussian") return Kernel::Gaussian;
    throw InvalidValue("unknown kernel '" + std::string(token) + "' (expected quartic|gaussian)");
}

std::string to_string(Kernel kernel) {
    return kernel == Kernel::Quartic ? "quartic" : "gaussian";
}

} // namespace semitrans
