#pragma once

#include <bit>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdp {

/// Raised when an input violates a documented precondition or invariant.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation fails at run time (e.g. training diverges).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Subset of concepts {0..n-1} as a fixed-width bitmask (n <= 63).
using Mask = std::uint64_t;

inline constexpr int kMaxConcepts = 63;

inline int popcount(Mask s) { return std::popcount(s); }

inline bool contains(Mask s, int i) { return (s >> i) & 1u; }

inline Mask bit(int i) { return Mask{1} << i; }

/// Elements of `s` in ascending order, 0-based.
std::vector<int> elements(Mask s);

/// Builds a mask from 0-based indices. Throws on index outside [0, n).
Mask mask_from(std::span<const int> indices, int n);

/// Human-readable 1-based set notation, e.g. "{1,3}".
std::string format_set(Mask s);

using Vector = std::vector<double>;

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace rdp
