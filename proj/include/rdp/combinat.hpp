#pragma once

// Exact machinery for the aligned-atom toy model: binary atoms over an
// orthonormal concept basis, so every code is a map S -> S_hat and squared
// error is the symmetric-difference size |S xor S_hat|.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdp/common.hpp"
#include "rdp/dgp.hpp"

namespace rdp::combinat {

/// Subset of latent atoms {0..m-1}.
using AtomSet = std::uint32_t;

inline constexpr int kMaxWidth = 16;
/// Margin below which two losses are reported as indifferent.
inline constexpr double kStrictMargin = 1e-12;

/// A width-m code whose atoms are subsets of [n] and which activates at most
/// K atoms per event.
class AlignedCode {
public:
    enum class Selector { optimal, family };

    /// Per event, the <= K atoms minimizing |S xor union|; ties prefer fewer
    /// atoms, then the lexicographically smallest index list.
    static AlignedCode optimal(int n, std::vector<Mask> atoms, int k);

    /// Explicit rule table: table[S] is the active atom set for event S.
    /// Must cover all 2^n events and activate at most K atoms each.
    static AlignedCode family(int n, std::vector<Mask> atoms, int k, std::vector<AtomSet> table, std::string label = {});

    int concepts() const { return n_; }
    int width() const { return static_cast<int>(atoms_.size()); }
    int cap() const { return k_; }
    Selector selector() const { return selector_; }
    const std::vector<Mask>& atoms() const { return atoms_; }
    const std::vector<AtomSet>& rule_table() const { return table_; }
    const std::string& label() const { return label_; }

    /// Active atoms for an event.
    AtomSet select(Mask event) const;

    /// S_hat: union of the selected atoms.
    Mask reconstruct(Mask event) const;

    bool operator==(const AlignedCode& other) const {
        return n_ == other.n_ && k_ == other.k_ && selector_ == other.selector_ && atoms_ == other.atoms_ &&
               table_ == other.table_;
    }

private:
    AlignedCode(int n, std::vector<Mask> atoms, int k, Selector selector, std::vector<AtomSet> table, std::string label);

    int n_;
    std::vector<Mask> atoms_;
    int k_;
    Selector selector_;
    std::vector<AtomSet> table_;
    std::string label_;
    // Optimal selector: atom subsets of size <= K in (size, lexicographic) order.
    std::vector<std::pair<AtomSet, Mask>> candidates_;
};

/// Union of the atoms in `active`.
Mask atom_union(const std::vector<Mask>& atoms, AtomSet active);

Mask reconstruct_set(const AlignedCode& code, Mask event);

struct CodeValue {
    double distortion = 0.0;
    double rate = 0.0;
};

/// E[|S| + |S_hat| - 2|S cap S_hat|] and E[#active atoms] over the events.
CodeValue evaluate(const AlignedCode& code, const std::vector<dgp::Event>& events);

double closed_form_loss(const AlignedCode& code, const dgp::ConceptPmf& pmf);
double code_rate(const AlignedCode& code, const dgp::ConceptPmf& pmf);

/// P of the binary atoms on an orthonormal basis: (1/m) sum over nonempty atoms of (1 - 1/|A|).
double code_polysemanticity(const AlignedCode& code);

/// True when every atom is empty or a singleton.
bool is_monosemantic(const AlignedCode& code);

inline constexpr int kBruteForceMaxConcepts = 6;
inline constexpr int kBruteForceMaxWidth = 4;

struct BruteForceResult {
    AlignedCode code;
    double distortion = 0.0;
    double rate = 0.0;
    std::size_t dictionaries = 0;
};

/// Exhaustive search over dictionaries (multisets of m atoms) with the optimal
/// selector at cap K. Minimizes distortion; ties go to lower rate, then the
/// lexicographically smallest dictionary. monosemantic_only restricts atoms to
/// singletons and the empty set.
BruteForceResult brute_force_optimum(const dgp::ConceptPmf& pmf, int m, int k, bool monosemantic_only);

/// A monosemantic omission code: concepts I are represented, and at most
/// `cap` of the active represented concepts are written per event.
struct OmissionCode {
    Mask represented = 0;
    int cap = 0;
    double distortion = 0.0;
    double rate = 0.0;
};

inline constexpr int kOmissionMaxConcepts = 12;

/// Every omission code with |I| <= m and cap in [0, |I|], evaluated in closed
/// form: D = E[|S| - min(cap, |S cap I|)], R = E[min(cap, |S cap I|)].
std::vector<OmissionCode> omission_codes(const dgp::ConceptPmf& pmf, int m);

/// The AlignedCode equivalent of an omission code (singleton atoms for I,
/// empty padding up to width m, optimal selector).
AlignedCode omission_aligned_code(int n, int m, Mask represented, int cap);

struct FrontierStep {
    double distortion = 0.0;  // D threshold at which this rate becomes attainable
    double rate = 0.0;        // minimal monosemantic rate for D0 in [distortion, next)
};

struct FrontierStaircase {
    std::vector<FrontierStep> steps;  // increasing distortion, decreasing rate
    double infeasible_below = 0.0;
    double expected_sparsity = 0.0;

    /// R*(D0, 0); nullopt below the feasibility threshold.
    std::optional<double> min_rate(double d0) const;
};

/// Exact P = 0 frontier over width-m aligned codes.
FrontierStaircase monosemantic_frontier(const dgp::ConceptPmf& pmf, int m);

/// min over |I| = min(m, n) of sum_{l not in I} P(c_l = 1).
double min_omitted_mass(const dgp::ConceptPmf& pmf, int m);

struct RateTaxReport {
    int k = 0;
    int m = 0;
    double expected_sparsity = 0.0;
    double d_infinity = 0.0;
    double polysemantic_rate = 0.0;
    std::optional<AlignedCode> polysemantic_optimum;
    bool optimum_is_monosemantic = false;
    bool monosemantic_feasible = false;       // condition (i): Theta_M(D_inf) nonempty
    bool monosemantic_rate_exceeds_k = false; // condition (ii): R <= k implies D > D_inf
    std::optional<double> delta;              // max D over Theta_M(D_inf)
    std::optional<double> bound;              // E||c||_0 - delta
    std::size_t monosemantic_codes_checked = 0;
    double min_monosemantic_rate = 0.0;       // over Theta_M(D_inf), when nonempty

    bool assumptions_hold() const { return monosemantic_feasible && monosemantic_rate_exceeds_k; }
};

RateTaxReport rate_tax(const dgp::ConceptPmf& pmf, int m, int k);

/// Named two-atom codes on three concepts. Indices are 0-based.
///   monosemantic M(a,b): atom {a} fires on c_a, atom {b} on c_b
///   hedged H(ab,c):      atom {a,b} fires on c_a and c_b, atom {c} on c_c
///   split S(ab,f):       atom {a,b} fires on c_a and c_b, atom {f} on c_f and not the other
struct FamilySpec {
    enum class Kind { monosemantic, hedged, split };
    Kind kind = Kind::monosemantic;
    int a = 0;
    int b = 1;
    int c = 2;

    static FamilySpec monosemantic(int a, int b) { return {Kind::monosemantic, a, b, -1}; }
    static FamilySpec hedged(int a, int b, int c) { return {Kind::hedged, a, b, c}; }
    static FamilySpec split(int a, int b, int fallback) { return {Kind::split, a, b, fallback}; }

    /// "M(2,3)", "H(12,3)", "S(12,1)" (1-based).
    std::string label() const;
    static FamilySpec parse(const std::string& text);
};

/// When more than K atoms fire, the K giving the smallest symmetric
/// difference are kept (ties: lowest atom indices).
AlignedCode family_code(const FamilySpec& spec, int k, int n = 3);

enum class Verdict { holds, fails, indifferent };
std::string to_string(Verdict v);

struct PredicateRow {
    int k = 0;
    std::array<int, 3> ijk{};      // 0-based (i, j, k) assignment
    std::string relation;          // e.g. "p_ij + p_ijk > p_j + p_jk"
    FamilySpec monosemantic;       // theta_M^{jk}
    FamilySpec polysemantic;       // competitor
    double lhs = 0.0;
    double rhs = 0.0;
    Verdict verdict = Verdict::indifferent;
    double loss_monosemantic = 0.0;
    double loss_polysemantic = 0.0;
};

/// Every three-concept inequality for the given K under all 6 index
/// assignments, with both numeric sides and the family losses.
std::vector<PredicateRow> three_concept_predicates(const dgp::ConceptPmf& pmf3, int k);

/// Clip activations on absent concepts, then merge latents sharing a concept.
/// Input atoms must be singletons or empty. Returns the input unchanged when
/// it already has neither spurious nor duplicate activations.
AlignedCode tied_dominate(const AlignedCode& code);

}  // namespace rdp::combinat
