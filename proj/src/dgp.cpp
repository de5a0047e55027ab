#include "rdp/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rdp::dgp {

namespace {

constexpr double kUnitTolerance = 1e-9;
constexpr double kMassTolerance = 1e-12;
constexpr double kDegenerateResidual = 1e-8;

Vector gaussian_vector(std::size_t d, Rng& rng) {
    Vector g(d);
    for (double& v : g) v = rng.normal();
    return g;
}

}  // namespace

std::string to_string(BasisMode mode) {
    return mode == BasisMode::orthonormal ? "orthonormal" : "random-unit";
}

BasisMode parse_basis_mode(const std::string& text) {
    if (text == "orthonormal") return BasisMode::orthonormal;
    if (text == "random-unit" || text == "random_unit") return BasisMode::random_unit;
    throw ValidationError("unknown basis mode '" + text + "' (expected orthonormal or random-unit)");
}

ConceptBasis::ConceptBasis(std::size_t d, BasisMode mode, Matrix directions)
    : d_(d), mode_(mode), directions_(std::move(directions)) {
    if (d_ == 0 || directions_.rows == 0) throw ValidationError("basis needs d > 0 and n > 0");
    if (directions_.cols != d_) throw ValidationError("basis direction length does not match d");
    for (std::size_t l = 0; l < directions_.rows; ++l) {
        if (std::abs(norm(directions_.row(l)) - 1.0) > kUnitTolerance) {
            throw ValidationError("basis direction " + std::to_string(l + 1) + " is not unit norm");
        }
    }
    if (mode_ == BasisMode::orthonormal) {
        if (directions_.rows > d_) throw ValidationError("orthonormal basis requires n <= d");
        for (std::size_t a = 0; a < directions_.rows; ++a) {
            for (std::size_t b = a + 1; b < directions_.rows; ++b) {
                if (std::abs(dot(directions_.row(a), directions_.row(b))) > kUnitTolerance) {
                    throw ValidationError("orthonormal basis directions are not orthogonal");
                }
            }
        }
    }
}

Vector ConceptBasis::synthesize(Mask active) const {
    Vector x(d_, 0.0);
    for (int l : elements(active)) {
        if (static_cast<std::size_t>(l) >= size()) throw ValidationError("active set exceeds basis size");
        const auto v = direction(static_cast<std::size_t>(l));
        for (std::size_t k = 0; k < d_; ++k) x[k] += v[k];
    }
    return x;
}

ConceptBasis make_basis(std::size_t d, std::size_t n, BasisMode mode, std::uint64_t seed) {
    if (d == 0 || n == 0) throw ValidationError("make_basis: d and n must be positive");
    if (n > static_cast<std::size_t>(kMaxConcepts)) throw ValidationError("make_basis: n exceeds 63 concepts");
    if (mode == BasisMode::orthonormal && n > d) {
        throw ValidationError("make_basis: orthonormal mode requires n <= d (got n=" + std::to_string(n) +
                              ", d=" + std::to_string(d) + ")");
    }
    Rng rng(seed);
    Matrix dirs(n, d);
    for (std::size_t l = 0; l < n; ++l) {
        Vector g;
        double len = 0.0;
        for (;;) {
            g = gaussian_vector(d, rng);
            if (mode == BasisMode::orthonormal) {
                // Two passes of modified Gram-Schmidt keep the residual orthogonal to round-off.
                for (int pass = 0; pass < 2; ++pass) {
                    for (std::size_t prev = 0; prev < l; ++prev) {
                        const auto q = dirs.row(prev);
                        const double proj = dot(g, q);
                        for (std::size_t k = 0; k < d; ++k) g[k] -= proj * q[k];
                    }
                }
            }
            len = norm(g);
            if (len >= kDegenerateResidual) break;
        }
        auto out = dirs.row(l);
        for (std::size_t k = 0; k < d; ++k) out[k] = g[k] / len;
    }
    return ConceptBasis(d, mode, std::move(dirs));
}

ConceptPmf::ConceptPmf(int n, Kind kind, std::vector<Event> support, std::vector<double> probs)
    : n_(n), kind_(kind), support_(std::move(support)), probs_(std::move(probs)) {}

ConceptPmf ConceptPmf::make_explicit(int n, std::vector<Event> support) {
    if (n <= 0 || n > kMaxConcepts) throw ValidationError("pmf: n must be in [1, 63]");
    if (support.empty()) throw ValidationError("pmf: explicit support is empty");
    const Mask universe = n == 64 ? ~Mask{0} : (bit(n) - 1);
    double total = 0.0;
    for (const auto& e : support) {
        if (!(e.p >= 0.0) || !std::isfinite(e.p)) throw ValidationError("pmf: negative or non-finite probability");
        if ((e.set & ~universe) != 0) throw ValidationError("pmf: subset " + format_set(e.set) + " outside [n]");
        total += e.p;
    }
    if (std::abs(total - 1.0) > kMassTolerance) {
        throw ValidationError("pmf: probabilities sum to " + std::to_string(total) + ", expected 1");
    }
    std::sort(support.begin(), support.end(), [](const Event& a, const Event& b) { return a.set < b.set; });
    for (std::size_t i = 1; i < support.size(); ++i) {
        if (support[i].set == support[i - 1].set) {
            throw ValidationError("pmf: duplicate subset " + format_set(support[i].set));
        }
    }
    return ConceptPmf(n, Kind::explicit_support, std::move(support), {});
}

ConceptPmf ConceptPmf::make_bernoulli(std::vector<double> probs) {
    if (probs.empty() || probs.size() > static_cast<std::size_t>(kMaxConcepts)) {
        throw ValidationError("pmf: bernoulli needs 1..63 probabilities");
    }
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("pmf: bernoulli probability outside [0, 1]");
    }
    const int n = static_cast<int>(probs.size());
    return ConceptPmf(n, Kind::bernoulli, {}, std::move(probs));
}

double ConceptPmf::marginal(int l) const {
    if (kind_ == Kind::bernoulli) return probs_.at(static_cast<std::size_t>(l));
    double acc = 0.0;
    for (const auto& e : support_) {
        if (contains(e.set, l)) acc += e.p;
    }
    return acc;
}

bool ConceptPmf::enumerable(int cap) const { return kind_ == Kind::explicit_support || n_ <= cap; }

double expected_sparsity(const ConceptPmf& pmf) {
    if (pmf.kind() == ConceptPmf::Kind::bernoulli) {
        const auto& p = pmf.bernoulli_probs();
        return std::accumulate(p.begin(), p.end(), 0.0);
    }
    double acc = 0.0;
    for (const auto& e : pmf.support()) acc += e.p * popcount(e.set);
    return acc;
}

std::vector<Event> enumerate_events(const ConceptPmf& pmf, int cap) {
    if (pmf.kind() == ConceptPmf::Kind::explicit_support) return pmf.support();
    const int n = pmf.size();
    if (n > cap) {
        throw ValidationError("enumerate_events: bernoulli pmf with n=" + std::to_string(n) +
                              " exceeds the enumeration cap " + std::to_string(cap));
    }
    const auto& probs = pmf.bernoulli_probs();
    const std::size_t count = std::size_t{1} << n;
    std::vector<Event> events(count);
    events[0] = {0, 1.0};
    // Product measure built one concept at a time: events [0, 2^l) extend to [2^l, 2^{l+1}).
    for (int l = 0; l < n; ++l) {
        const std::size_t half = std::size_t{1} << l;
        for (std::size_t s = 0; s < half; ++s) {
            const double base = events[s].p;
            events[s + half] = {static_cast<Mask>(s + half), base * probs[l]};
            events[s].p = base * (1.0 - probs[l]);
        }
    }
    return events;
}

Mask sample_set(const ConceptPmf& pmf, Rng& rng) {
    if (pmf.kind() == ConceptPmf::Kind::bernoulli) {
        Mask s = 0;
        const auto& probs = pmf.bernoulli_probs();
        for (std::size_t l = 0; l < probs.size(); ++l) {
            if (rng.bernoulli(probs[l])) s |= bit(static_cast<int>(l));
        }
        return s;
    }
    const double u = rng.uniform();
    double acc = 0.0;
    const auto& support = pmf.support();
    for (const auto& e : support) {
        acc += e.p;
        if (u < acc) return e.set;
    }
    // u landed in the round-off gap above the cumulative sum: last positive-mass event.
    for (auto it = support.rbegin(); it != support.rend(); ++it) {
        if (it->p > 0.0) return it->set;
    }
    return support.back().set;
}

Sample sample(const ConceptPmf& pmf, const ConceptBasis& basis, Rng& rng) {
    if (static_cast<std::size_t>(pmf.size()) != basis.size()) {
        throw ValidationError("sample: pmf.n does not match basis.n");
    }
    Sample s;
    s.active = sample_set(pmf, rng);
    s.x = basis.synthesize(s.active);
    return s;
}

}  // namespace rdp::dgp
