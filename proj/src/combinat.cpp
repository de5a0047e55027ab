#include "rdp/combinat.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <functional>
#include <map>

#include "rdp/parallel.hpp"

namespace rdp::combinat {

namespace {

constexpr int kFamilyMaxConcepts = 20;

std::size_t event_count(int n) { return std::size_t{1} << n; }

// All subsets of {0..m-1} with at most k elements, by size then lexicographic index list.
std::vector<AtomSet> bounded_subsets(int m, int k) {
    std::vector<AtomSet> out;
    std::vector<int> combo;
    for (int size = 0; size <= std::min(k, m); ++size) {
        combo.resize(static_cast<std::size_t>(size));
        for (int i = 0; i < size; ++i) combo[static_cast<std::size_t>(i)] = i;
        for (;;) {
            AtomSet s = 0;
            for (int i : combo) s |= AtomSet{1} << i;
            out.push_back(s);
            int pos = size - 1;
            while (pos >= 0 && combo[static_cast<std::size_t>(pos)] == m - size + pos) --pos;
            if (pos < 0) break;
            ++combo[static_cast<std::size_t>(pos)];
            for (int i = pos + 1; i < size; ++i) {
                combo[static_cast<std::size_t>(i)] = combo[static_cast<std::size_t>(i - 1)] + 1;
            }
        }
    }
    return out;
}

std::vector<dgp::Event> positive_events(const dgp::ConceptPmf& pmf, int cap = dgp::kDefaultEnumerationCap) {
    auto events = dgp::enumerate_events(pmf, cap);
    std::erase_if(events, [](const dgp::Event& e) { return e.p == 0.0; });
    return events;
}

bool strictly_less(double a, double b) { return a < b - kStrictMargin; }

// Lower distortion wins; then lower rate; otherwise the incumbent stays.
bool improves(const CodeValue& candidate, const CodeValue& incumbent) {
    if (strictly_less(candidate.distortion, incumbent.distortion)) return true;
    if (strictly_less(incumbent.distortion, candidate.distortion)) return false;
    return strictly_less(candidate.rate, incumbent.rate);
}

}  // namespace

AlignedCode::AlignedCode(int n, std::vector<Mask> atoms, int k, Selector selector, std::vector<AtomSet> table,
                         std::string label)
    : n_(n), atoms_(std::move(atoms)), k_(k), selector_(selector), table_(std::move(table)), label_(std::move(label)) {
    if (n_ <= 0 || n_ > kMaxConcepts) throw ValidationError("aligned code: n must be in [1, 63]");
    const int m = width();
    if (m == 0 || m > kMaxWidth) throw ValidationError("aligned code: width must be in [1, 16]");
    if (k_ < 0 || k_ > m) throw ValidationError("aligned code: K must be in [0, m]");
    const Mask universe = bit(n_) - 1;
    for (Mask a : atoms_) {
        if ((a & ~universe) != 0) throw ValidationError("aligned code: atom " + format_set(a) + " outside [n]");
    }
    if (selector_ == Selector::optimal) {
        for (AtomSet s : bounded_subsets(m, k_)) candidates_.emplace_back(s, atom_union(atoms_, s));
        return;
    }
    if (n_ > kFamilyMaxConcepts) throw ValidationError("aligned code: rule tables support n <= 20");
    if (table_.size() != event_count(n_)) throw ValidationError("aligned code: rule table must cover all 2^n events");
    const AtomSet atom_universe = (AtomSet{1} << m) - 1;
    for (AtomSet s : table_) {
        if ((s & ~atom_universe) != 0) throw ValidationError("aligned code: rule table references a missing atom");
        if (std::popcount(s) > k_) throw ValidationError("aligned code: rule table activates more than K atoms");
    }
}

AlignedCode AlignedCode::optimal(int n, std::vector<Mask> atoms, int k) {
    return AlignedCode(n, std::move(atoms), k, Selector::optimal, {}, {});
}

AlignedCode AlignedCode::family(int n, std::vector<Mask> atoms, int k, std::vector<AtomSet> table, std::string label) {
    return AlignedCode(n, std::move(atoms), k, Selector::family, std::move(table), std::move(label));
}

AtomSet AlignedCode::select(Mask event) const {
    if (selector_ == Selector::family) return table_.at(static_cast<std::size_t>(event));
    // candidates_ is ordered by (size, lexicographic), so the first strict minimum wins ties.
    AtomSet best = 0;
    int best_cost = std::numeric_limits<int>::max();
    for (const auto& [set, uni] : candidates_) {
        const int cost = popcount(event ^ uni);
        if (cost < best_cost) {
            best_cost = cost;
            best = set;
            if (cost == 0) break;
        }
    }
    return best;
}

Mask AlignedCode::reconstruct(Mask event) const { return atom_union(atoms_, select(event)); }

Mask atom_union(const std::vector<Mask>& atoms, AtomSet active) {
    Mask out = 0;
    while (active != 0) {
        out |= atoms[static_cast<std::size_t>(std::countr_zero(active))];
        active &= active - 1;
    }
    return out;
}

Mask reconstruct_set(const AlignedCode& code, Mask event) { return code.reconstruct(event); }

CodeValue evaluate(const AlignedCode& code, const std::vector<dgp::Event>& events) {
    CodeValue v;
    for (const auto& e : events) {
        const AtomSet active = code.select(e.set);
        const Mask s_hat = atom_union(code.atoms(), active);
        v.distortion += e.p * (popcount(e.set) + popcount(s_hat) - 2 * popcount(e.set & s_hat));
        v.rate += e.p * std::popcount(active);
    }
    return v;
}

double closed_form_loss(const AlignedCode& code, const dgp::ConceptPmf& pmf) {
    if (pmf.size() != code.concepts()) throw ValidationError("closed_form_loss: pmf.n does not match code.n");
    return evaluate(code, dgp::enumerate_events(pmf)).distortion;
}

double code_rate(const AlignedCode& code, const dgp::ConceptPmf& pmf) {
    if (pmf.size() != code.concepts()) throw ValidationError("code_rate: pmf.n does not match code.n");
    return evaluate(code, dgp::enumerate_events(pmf)).rate;
}

double code_polysemanticity(const AlignedCode& code) {
    double acc = 0.0;
    for (Mask a : code.atoms()) {
        if (a != 0) acc += 1.0 - 1.0 / popcount(a);
    }
    return acc / code.width();
}

bool is_monosemantic(const AlignedCode& code) {
    return std::all_of(code.atoms().begin(), code.atoms().end(), [](Mask a) { return popcount(a) <= 1; });
}

BruteForceResult brute_force_optimum(const dgp::ConceptPmf& pmf, int m, int k, bool monosemantic_only) {
    const int n = pmf.size();
    if (n > kBruteForceMaxConcepts || m > kBruteForceMaxWidth || m < 1) {
        throw ValidationError("brute_force_optimum: search space cap exceeded (need n <= 6, 1 <= m <= 4; got n=" +
                              std::to_string(n) + ", m=" + std::to_string(m) + ")");
    }
    if (k < 0 || k > m) throw ValidationError("brute_force_optimum: K must be in [0, m]");
    const auto events = positive_events(pmf);

    std::vector<Mask> alphabet;
    if (monosemantic_only) {
        alphabet.push_back(0);
        for (int l = 0; l < n; ++l) alphabet.push_back(bit(l));
    } else {
        for (Mask s = 0; s < bit(n); ++s) alphabet.push_back(s);
    }
    const std::size_t a = alphabet.size();

    struct Best {
        std::vector<Mask> dictionary;
        CodeValue value;
        std::size_t count = 0;
    };
    // One partition per leading atom; each walks nondecreasing index sequences in lexicographic order.
    std::vector<Best> partial(a);
    parallel_for(a, [&](std::size_t first) {
        Best& best = partial[first];
        std::vector<std::size_t> idx(static_cast<std::size_t>(m), first);
        std::vector<Mask> dict(static_cast<std::size_t>(m));
        for (;;) {
            for (std::size_t i = 0; i < idx.size(); ++i) dict[i] = alphabet[idx[i]];
            const CodeValue v = evaluate(AlignedCode::optimal(n, dict, k), events);
            if (best.count == 0 || improves(v, best.value)) {
                best.dictionary = dict;
                best.value = v;
            }
            ++best.count;
            int pos = m - 1;
            while (pos >= 1 && idx[static_cast<std::size_t>(pos)] == a - 1) --pos;
            if (pos < 1) break;
            const std::size_t next = idx[static_cast<std::size_t>(pos)] + 1;
            for (int i = pos; i < m; ++i) idx[static_cast<std::size_t>(i)] = next;
        }
    });

    std::size_t total = 0;
    const Best* winner = nullptr;
    for (const auto& b : partial) {
        total += b.count;
        if (winner == nullptr || improves(b.value, winner->value)) winner = &b;
    }
    return {AlignedCode::optimal(n, winner->dictionary, k), winner->value.distortion, winner->value.rate, total};
}

std::vector<OmissionCode> omission_codes(const dgp::ConceptPmf& pmf, int m) {
    const int n = pmf.size();
    if (n > kOmissionMaxConcepts) {
        throw ValidationError("omission_codes: n=" + std::to_string(n) + " exceeds the cap of " +
                              std::to_string(kOmissionMaxConcepts));
    }
    if (m < 1) throw ValidationError("omission_codes: width must be positive");
    const auto events = positive_events(pmf);
    const int max_represented = std::min(m, n);
    std::vector<OmissionCode> out;
    for (Mask rep = 0; rep < bit(n); ++rep) {
        const int size = popcount(rep);
        if (size > max_represented) continue;
        for (int cap = 0; cap <= size; ++cap) {
            OmissionCode code{rep, cap, 0.0, 0.0};
            for (const auto& e : events) {
                const int written = std::min(cap, popcount(e.set & rep));
                code.distortion += e.p * (popcount(e.set) - written);
                code.rate += e.p * written;
            }
            out.push_back(code);
        }
    }
    return out;
}

AlignedCode omission_aligned_code(int n, int m, Mask represented, int cap) {
    std::vector<Mask> atoms;
    for (int l : elements(represented)) atoms.push_back(bit(l));
    if (static_cast<int>(atoms.size()) > m) throw ValidationError("omission code: |I| exceeds width");
    atoms.resize(static_cast<std::size_t>(m), 0);
    return AlignedCode::optimal(n, std::move(atoms), cap);
}

std::optional<double> FrontierStaircase::min_rate(double d0) const {
    std::optional<double> best;
    for (const auto& step : steps) {
        if (step.distortion > d0 + kStrictMargin) break;
        best = step.rate;
    }
    return best;
}

FrontierStaircase monosemantic_frontier(const dgp::ConceptPmf& pmf, int m) {
    auto codes = omission_codes(pmf, m);
    std::sort(codes.begin(), codes.end(), [](const OmissionCode& x, const OmissionCode& y) {
        return x.distortion < y.distortion || (x.distortion == y.distortion && x.rate < y.rate);
    });
    FrontierStaircase stairs;
    stairs.expected_sparsity = dgp::expected_sparsity(pmf);
    for (const auto& c : codes) {
        if (!stairs.steps.empty() && c.distortion <= stairs.steps.back().distortion + kStrictMargin) {
            stairs.steps.back().rate = std::min(stairs.steps.back().rate, c.rate);
            continue;
        }
        if (!stairs.steps.empty() && c.rate >= stairs.steps.back().rate) continue;  // not on the lower envelope
        stairs.steps.push_back({c.distortion, c.rate});
    }
    stairs.infeasible_below = stairs.steps.front().distortion;
    return stairs;
}

double min_omitted_mass(const dgp::ConceptPmf& pmf, int m) {
    const int n = pmf.size();
    std::vector<double> marginals(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) marginals[static_cast<std::size_t>(l)] = pmf.marginal(l);
    // Representing the m most frequent concepts omits the least mass.
    std::sort(marginals.begin(), marginals.end(), std::greater<>());
    double omitted = 0.0;
    for (std::size_t l = static_cast<std::size_t>(std::min(m, n)); l < marginals.size(); ++l) omitted += marginals[l];
    return omitted;
}

RateTaxReport rate_tax(const dgp::ConceptPmf& pmf, int m, int k) {
    RateTaxReport report;
    report.k = k;
    report.m = m;
    report.expected_sparsity = dgp::expected_sparsity(pmf);
    const auto optimum = brute_force_optimum(pmf, m, k, false);
    report.d_infinity = optimum.distortion;
    report.polysemantic_rate = optimum.rate;
    report.polysemantic_optimum = optimum.code;
    report.optimum_is_monosemantic = is_monosemantic(optimum.code);

    const double d_inf = report.d_infinity;
    bool cheap_code_beats = false;
    double delta = -1.0;
    double min_rate = std::numeric_limits<double>::infinity();
    const auto codes = omission_codes(pmf, m);
    report.monosemantic_codes_checked = codes.size();
    for (const auto& c : codes) {
        if (c.distortion <= d_inf + kStrictMargin) {
            report.monosemantic_feasible = true;
            delta = std::max(delta, c.distortion);
            min_rate = std::min(min_rate, c.rate);
        }
        // Condition (ii) requires D > D_inf strictly for every code with R <= k.
        if (c.rate <= k + kStrictMargin && !(c.distortion > d_inf + kStrictMargin)) cheap_code_beats = true;
    }
    report.monosemantic_rate_exceeds_k = !cheap_code_beats;
    if (report.monosemantic_feasible) {
        report.delta = delta;
        report.bound = report.expected_sparsity - delta;
        report.min_monosemantic_rate = min_rate;
    }
    return report;
}

std::string FamilySpec::label() const {
    const auto one = [](int i) { return std::to_string(i + 1); };
    switch (kind) {
        case Kind::monosemantic: return "M(" + one(a) + "," + one(b) + ")";
        case Kind::hedged: return "H(" + one(a) + one(b) + "," + one(c) + ")";
        case Kind::split: return "S(" + one(a) + one(b) + "," + one(c) + ")";
    }
    return {};
}

FamilySpec FamilySpec::parse(const std::string& text) {
    std::string digits;
    for (char ch : text) {
        if (std::isdigit(static_cast<unsigned char>(ch))) digits += ch;
    }
    const auto fail = [&] { return ValidationError("unknown family name '" + text + "' (expected M(j,k), H(ij,k) or S(ij,i))"); };
    if (text.empty() || digits.size() < 2 || digits.size() > 3) throw fail();
    const auto idx = [&](std::size_t i) { return digits[i] - '1'; };
    const char head = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    if (head == 'M' && digits.size() == 2) return monosemantic(idx(0), idx(1));
    if (head == 'H' && digits.size() == 3) return hedged(idx(0), idx(1), idx(2));
    if (head == 'S' && digits.size() == 3) {
        if (idx(2) != idx(0) && idx(2) != idx(1)) throw fail();
        return split(idx(0), idx(1), idx(2));
    }
    throw fail();
}

AlignedCode family_code(const FamilySpec& spec, int k, int n) {
    const auto check = [n](int i) {
        if (i < 0 || i >= n) throw ValidationError("family code: concept index out of range");
    };
    check(spec.a);
    check(spec.b);
    if (spec.kind != FamilySpec::Kind::monosemantic) check(spec.c);
    if (spec.a == spec.b) throw ValidationError("family code: repeated concept index");

    std::vector<Mask> atoms;
    std::function<AtomSet(Mask)> fires;
    const Mask pair = bit(spec.a) | bit(spec.b);
    switch (spec.kind) {
        case FamilySpec::Kind::monosemantic:
            atoms = {bit(spec.a), bit(spec.b)};
            fires = [=](Mask s) { return AtomSet(contains(s, spec.a) ? 1u : 0u) | (contains(s, spec.b) ? 2u : 0u); };
            break;
        case FamilySpec::Kind::hedged:
            if (spec.c == spec.a || spec.c == spec.b) throw ValidationError("family code: hedged atoms overlap");
            atoms = {pair, bit(spec.c)};
            fires = [=](Mask s) { return AtomSet((s & pair) == pair ? 1u : 0u) | (contains(s, spec.c) ? 2u : 0u); };
            break;
        case FamilySpec::Kind::split: {
            if (spec.c != spec.a && spec.c != spec.b) throw ValidationError("family code: split fallback must be in the pair");
            const int other = spec.c == spec.a ? spec.b : spec.a;
            atoms = {pair, bit(spec.c)};
            fires = [=](Mask s) {
                return AtomSet((s & pair) == pair ? 1u : 0u) | (contains(s, spec.c) && !contains(s, other) ? 2u : 0u);
            };
            break;
        }
    }
    if (k < 0 || k > 2) throw ValidationError("family code: K must be in [0, 2]");

    const auto subsets = bounded_subsets(2, k);
    std::vector<AtomSet> table(event_count(n));
    for (Mask s = 0; s < bit(n); ++s) {
        const AtomSet fired = fires(s);
        if (std::popcount(fired) <= k) {
            table[static_cast<std::size_t>(s)] = fired;
            continue;
        }
        // Over budget: keep the best K-subset of the fired atoms.
        AtomSet best = 0;
        int best_cost = std::numeric_limits<int>::max();
        for (AtomSet cand : subsets) {
            if ((cand & ~fired) != 0 || std::popcount(cand) != k) continue;
            const int cost = popcount(s ^ atom_union(atoms, cand));
            if (cost < best_cost) {
                best_cost = cost;
                best = cand;
            }
        }
        table[static_cast<std::size_t>(s)] = best;
    }
    return AlignedCode::family(n, std::move(atoms), k, std::move(table), spec.label());
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::holds: return "holds";
        case Verdict::fails: return "fails";
        case Verdict::indifferent: return "indifferent";
    }
    return {};
}

namespace {

// Roles of the three concepts in an inequality: i, j, k.
enum Role : unsigned { I = 1, J = 2, K = 4 };

struct Term {
    double coef;
    unsigned roles;
};

struct Relation {
    const char* text;
    std::vector<Term> lhs;
    std::vector<Term> rhs;
    FamilySpec (*competitor)(int i, int j, int k);
};

const std::vector<Relation>& relations(int k_cap) {
    static const std::vector<Relation> k2 = {
        {"p_ij + p_ijk > p_j + p_jk", {{1, I | J}, {1, I | J | K}}, {{1, J}, {1, J | K}},
         [](int i, int j, int k) { return FamilySpec::hedged(i, j, k); }},
        {"p_i + p_ijk > p_j + p_k", {{1, I}, {1, I | J | K}}, {{1, J}, {1, K}},
         [](int i, int j, int k) { return FamilySpec::hedged(j, k, i); }},
        {"p_i + p_ij > p_j + p_k + 2 p_jk", {{1, I}, {1, I | J}}, {{1, J}, {1, K}, {2, J | K}},
         [](int i, int j, int) { return FamilySpec::split(i, j, i); }},
        {"p_ij > p_k + p_ik + p_jk", {{1, I | J}}, {{1, K}, {1, I | K}, {1, J | K}},
         [](int i, int j, int) { return FamilySpec::split(i, j, j); }},
    };
    static const std::vector<Relation> k1 = {
        {"p_ij + p_ijk > p_j", {{1, I | J}, {1, I | J | K}}, {{1, J}},
         [](int i, int j, int k) { return FamilySpec::hedged(i, j, k); }},
        {"p_i + p_jk + p_ijk > p_j + p_k", {{1, I}, {1, J | K}, {1, I | J | K}}, {{1, J}, {1, K}},
         [](int i, int j, int k) { return FamilySpec::hedged(j, k, i); }},
        {"p_i + p_ij + p_ijk > p_j + p_k + p_jk", {{1, I}, {1, I | J}, {1, I | J | K}}, {{1, J}, {1, K}, {1, J | K}},
         [](int i, int j, int) { return FamilySpec::split(i, j, i); }},
        {"p_ij + p_ijk > p_k + p_ik", {{1, I | J}, {1, I | J | K}}, {{1, K}, {1, I | K}},
         [](int i, int j, int) { return FamilySpec::split(i, j, j); }},
        {"p_jk + p_ijk > p_k + p_ik", {{1, J | K}, {1, I | J | K}}, {{1, K}, {1, I | K}},
         [](int, int j, int k) { return FamilySpec::split(j, k, j); }},
    };
    if (k_cap == 1) return k1;
    if (k_cap == 2) return k2;
    throw ValidationError("three_concept_predicates: K must be 1 or 2");
}

}  // namespace

std::vector<PredicateRow> three_concept_predicates(const dgp::ConceptPmf& pmf3, int k) {
    if (pmf3.size() != 3) throw ValidationError("three_concept_predicates: pmf must have n = 3");
    const auto& rels = relations(k);
    std::array<double, 8> mass{};
    for (const auto& e : dgp::enumerate_events(pmf3)) mass[static_cast<std::size_t>(e.set)] += e.p;

    std::vector<PredicateRow> rows;
    std::array<int, 3> perm{0, 1, 2};
    do {
        const auto to_mask = [&](unsigned roles) {
            Mask s = 0;
            for (int r = 0; r < 3; ++r) {
                if (roles & (1u << r)) s |= bit(perm[static_cast<std::size_t>(r)]);
            }
            return s;
        };
        const auto side = [&](const std::vector<Term>& terms) {
            double acc = 0.0;
            for (const auto& t : terms) acc += t.coef * mass[static_cast<std::size_t>(to_mask(t.roles))];
            return acc;
        };
        const auto mono = FamilySpec::monosemantic(perm[1], perm[2]);
        const double loss_mono = closed_form_loss(family_code(mono, k), pmf3);
        for (const auto& rel : rels) {
            PredicateRow row;
            row.k = k;
            row.ijk = perm;
            row.relation = rel.text;
            row.monosemantic = mono;
            row.polysemantic = rel.competitor(perm[0], perm[1], perm[2]);
            row.lhs = side(rel.lhs);
            row.rhs = side(rel.rhs);
            const double margin = row.lhs - row.rhs;
            row.verdict = margin > kStrictMargin ? Verdict::holds
                          : margin < -kStrictMargin ? Verdict::fails
                                                    : Verdict::indifferent;
            row.loss_monosemantic = loss_mono;
            row.loss_polysemantic = closed_form_loss(family_code(row.polysemantic, k), pmf3);
            rows.push_back(std::move(row));
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return rows;
}

AlignedCode tied_dominate(const AlignedCode& code) {
    if (!is_monosemantic(code)) throw ValidationError("tied_dominate: every atom must be a singleton or empty");
    const int n = code.concepts();
    const int m = code.width();
    if (n > kFamilyMaxConcepts) throw ValidationError("tied_dominate: n exceeds 20");
    const auto& atoms = code.atoms();

    std::vector<AtomSet> active(event_count(n));
    bool spurious = false;
    for (Mask s = 0; s < bit(n); ++s) {
        const AtomSet a = code.select(s);
        active[static_cast<std::size_t>(s)] = a;
        for (int r : elements(a)) {
            if ((atoms[static_cast<std::size_t>(r)] & s) == 0) spurious = true;
        }
    }
    bool duplicates = false;
    std::map<int, int> latent_of;  // concept -> merged latent, in first-occurrence order
    std::vector<Mask> merged;
    for (Mask a : atoms) {
        if (a == 0) continue;
        const int concept_index = std::countr_zero(a);
        if (latent_of.contains(concept_index)) {
            duplicates = true;
            continue;
        }
        latent_of[concept_index] = static_cast<int>(merged.size());
        merged.push_back(a);
    }
    if (!spurious && !duplicates) return code;

    merged.resize(static_cast<std::size_t>(m), 0);
    std::vector<AtomSet> table(event_count(n), 0);
    for (Mask s = 0; s < bit(n); ++s) {
        AtomSet out = 0;
        for (int r : elements(active[static_cast<std::size_t>(s)])) {
            const Mask atom = atoms[static_cast<std::size_t>(r)];
            if ((atom & s) == 0) continue;  // clip: concept absent (or dead latent)
            out |= AtomSet{1} << latent_of.at(std::countr_zero(atom));
        }
        table[static_cast<std::size_t>(s)] = out;
    }
    const std::string label = code.label().empty() ? "tied" : "tied(" + code.label() + ")";
    return AlignedCode::family(n, std::move(merged), code.cap(), std::move(table), label);
}

}  // namespace rdp::combinat
