#include "rdp/poly.hpp"

#include <algorithm>
#include <cmath>

#include "rdp/sae.hpp"

namespace rdp::poly {

namespace {

constexpr double kTieTolerance = 1e-12;

void check_dims(const Matrix& atoms, const dgp::ConceptBasis& basis) {
    if (atoms.cols != basis.dim()) {
        throw ValidationError("atom dimension " + std::to_string(atoms.cols) + " does not match basis dimension " +
                              std::to_string(basis.dim()));
    }
}

}  // namespace

CosineTable cosine_table(const Matrix& atoms, const dgp::ConceptBasis& basis) {
    check_dims(atoms, basis);
    const std::size_t m = atoms.rows;
    const std::size_t n = basis.size();
    CosineTable table{Matrix(m, n, 0.0), std::vector<bool>(m, false)};
    for (std::size_t i = 0; i < m; ++i) {
        const auto row = atoms.row(i);
        const double row_norm = norm(row);
        if (row_norm < kZeroRowNorm) {
            table.zero_row[i] = true;
            continue;
        }
        for (std::size_t l = 0; l < n; ++l) {
            const auto v = basis.direction(l);
            const double c = dot(row, v) / (row_norm * norm(v));
            table.cosines(i, l) = std::clamp(c, -1.0, 1.0);
        }
    }
    return table;
}

std::size_t dominant_concept(std::span<const double> cosine_row) {
    double best = -1.0;
    for (double c : cosine_row) best = std::max(best, c * c);
    for (std::size_t l = 0; l < cosine_row.size(); ++l) {
        if (cosine_row[l] * cosine_row[l] >= best - kTieTolerance) return l;
    }
    return 0;
}

double polysemanticity(const CosineTable& table) {
    const std::size_t m = table.atoms();
    if (m == 0) throw ValidationError("polysemanticity: table has no atoms");
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (table.zero_row[i]) continue;
        double best = 0.0;
        for (double c : table.cosines.row(i)) best = std::max(best, c * c);
        acc += 1.0 - best;
    }
    return acc / static_cast<double>(m);
}

double joint_polysemanticity(const sae::SaeParams& params, const dgp::ConceptBasis& basis) {
    return polysemanticity(cosine_table(params.w_enc, basis)) + polysemanticity(cosine_table(params.w_dec, basis));
}

Matrix poly_subgradient(const Matrix& atoms, const dgp::ConceptBasis& basis) {
    check_dims(atoms, basis);
    const std::size_t m = atoms.rows;
    const std::size_t d = atoms.cols;
    Matrix grad(m, d, 0.0);
    if (m == 0) return grad;
    const auto table = cosine_table(atoms, basis);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (table.zero_row[i]) continue;
        const auto row = atoms.row(i);
        const double row_norm = norm(row);
        const std::size_t l = dominant_concept(table.cosines.row(i));
        const auto v = basis.direction(l);
        const double v_norm = norm(v);
        // c = <a,u>/|a| with u = v/|v|;  dc/da = (u - c a/|a|) / |a|;  d(1 - c^2) = -2c dc.
        const double c = dot(row, v) / (row_norm * v_norm);
        auto g = grad.row(i);
        for (std::size_t k = 0; k < d; ++k) {
            const double dc = (v[k] / v_norm - c * row[k] / row_norm) / row_norm;
            g[k] = -2.0 * c * dc * scale;
        }
    }
    return grad;
}

}  // namespace rdp::poly
