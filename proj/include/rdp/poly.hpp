#pragma once

// Cosine tables between learned atoms and ground-truth concepts, and the
// polysemanticity metric P(C) = (1/m) sum_i (1 - max_l c_il^2).

#include <vector>

#include "rdp/common.hpp"
#include "rdp/dgp.hpp"

namespace rdp::sae {
struct SaeParams;
}

namespace rdp::poly {

/// Rows with source norm below this are treated as dead atoms.
inline constexpr double kZeroRowNorm = 1e-12;

struct CosineTable {
    Matrix cosines;              // m x n, entries in [-1, 1]
    std::vector<bool> zero_row;  // dead-atom flags; flagged rows are all zero

    std::size_t atoms() const { return cosines.rows; }
    std::size_t concepts() const { return cosines.cols; }
};

/// atoms: m x d, one atom per row.
CosineTable cosine_table(const Matrix& atoms, const dgp::ConceptBasis& basis);

/// Dead rows contribute 0 to the sum; the divisor stays m.
double polysemanticity(const CosineTable& table);

/// P(C_enc) + P(C_dec), in [0, 2].
double joint_polysemanticity(const sae::SaeParams& params, const dgp::ConceptBasis& basis);

/// Index of max_l c_il^2; values within 1e-12 of the maximum tie and the
/// lowest concept index wins.
std::size_t dominant_concept(std::span<const double> cosine_row);

/// Gradient of P with respect to each atom row, holding each row's dominant
/// concept fixed. Dead rows receive zero gradient.
Matrix poly_subgradient(const Matrix& atoms, const dgp::ConceptBasis& basis);

}  // namespace rdp::poly
