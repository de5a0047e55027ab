#pragma once

// Concept bases, concept-subset distributions and sampling of observations
// x = sum_{l in S} v_l.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdp/common.hpp"
#include "rdp/rng.hpp"

namespace rdp::dgp {

enum class BasisMode { orthonormal, random_unit };

std::string to_string(BasisMode mode);
BasisMode parse_basis_mode(const std::string& text);

/// n unit concept directions in R^d. Row l of `directions` is v_l.
class ConceptBasis {
public:
    ConceptBasis(std::size_t d, BasisMode mode, Matrix directions);

    std::size_t dim() const { return d_; }
    std::size_t size() const { return directions_.rows; }
    BasisMode mode() const { return mode_; }

    std::span<const double> direction(std::size_t l) const { return directions_.row(l); }
    const Matrix& directions() const { return directions_; }

    /// x(S) = sum of the directions indexed by `active`.
    Vector synthesize(Mask active) const;

private:
    std::size_t d_;
    BasisMode mode_;
    Matrix directions_;
};

/// Orthonormal mode: Gram-Schmidt on seeded Gaussian draws (requires n <= d).
/// Random-unit mode: independent seeded unit vectors.
ConceptBasis make_basis(std::size_t d, std::size_t n, BasisMode mode, std::uint64_t seed);

struct Event {
    Mask set = 0;
    double p = 0.0;

    bool operator==(const Event&) const = default;
};

inline constexpr int kDefaultEnumerationCap = 20;

/// Law of the active-concept subset S.
class ConceptPmf {
public:
    enum class Kind { explicit_support, bernoulli };

    /// Validates: probabilities nonnegative and summing to 1 within 1e-12,
    /// subsets distinct and within [n].
    static ConceptPmf make_explicit(int n, std::vector<Event> support);

    /// Validates every p_l in [0, 1].
    static ConceptPmf make_bernoulli(std::vector<double> probs);

    int size() const { return n_; }
    Kind kind() const { return kind_; }
    const std::vector<Event>& support() const { return support_; }
    const std::vector<double>& bernoulli_probs() const { return probs_; }

    /// P(c_l = 1).
    double marginal(int l) const;

    /// True if enumerate_events would succeed under `cap`.
    bool enumerable(int cap = kDefaultEnumerationCap) const;

private:
    ConceptPmf(int n, Kind kind, std::vector<Event> support, std::vector<double> probs);

    int n_;
    Kind kind_;
    std::vector<Event> support_;
    std::vector<double> probs_;
};

/// E||c||_0: sum_S p_S |S| (explicit) or sum_l p_l (bernoulli).
double expected_sparsity(const ConceptPmf& pmf);

/// Full support in ascending bitmask order. Bernoulli laws expand to the
/// product measure over all 2^n subsets and are rejected when n > cap.
std::vector<Event> enumerate_events(const ConceptPmf& pmf, int cap = kDefaultEnumerationCap);

struct Sample {
    Vector x;
    Mask active = 0;
};

/// Draws the active set from the pmf and assembles x as the exact column sum.
Sample sample(const ConceptPmf& pmf, const ConceptBasis& basis, Rng& rng);

/// Draws only the active set.
Mask sample_set(const ConceptPmf& pmf, Rng& rng);

}  // namespace rdp::dgp
