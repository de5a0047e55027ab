#include "rdp/common.hpp"

#include <cmath>

namespace rdp {

std::vector<int> elements(Mask s) {
    std::vector<int> out;
    out.reserve(popcount(s));
    while (s != 0) {
        out.push_back(std::countr_zero(s));
        s &= s - 1;
    }
    return out;
}

Mask mask_from(std::span<const int> indices, int n) {
    Mask s = 0;
    for (int i : indices) {
        if (i < 0 || i >= n) {
            throw ValidationError("concept index " + std::to_string(i + 1) + " outside [1, " + std::to_string(n) + "]");
        }
        s |= bit(i);
    }
    return s;
}

std::string format_set(Mask s) {
    std::string out = "{";
    bool first = true;
    for (int i : elements(s)) {
        if (!first) out += ',';
        out += std::to_string(i + 1);
        first = false;
    }
    return out + "}";
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace rdp
