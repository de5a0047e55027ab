#pragma once

// Seeded generators shared by the unit and acceptance tests.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "rdp/dgp.hpp"
#include "rdp/rng.hpp"

namespace rdp::testing {

/// Explicit pmf on n concepts with random mass on a random subset of events.
/// `density` is the chance that each event receives mass; the empty set always does.
inline dgp::ConceptPmf random_explicit_pmf(int n, Rng& rng, double density = 1.0) {
    std::vector<dgp::Event> support;
    double total = 0.0;
    for (Mask s = 0; s < (Mask{1} << n); ++s) {
        if (s != 0 && !rng.bernoulli(density)) continue;
        const double w = -std::log(1.0 - rng.uniform());
        support.push_back({s, w});
        total += w;
    }
    for (auto& e : support) e.p /= total;
    // Put the rounding residue on the largest event so the sum is 1 to the last bit we can manage.
    double acc = 0.0;
    std::size_t big = 0;
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (support[i].p > support[big].p) big = i;
    }
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (i != big) acc += support[i].p;
    }
    support[big].p = 1.0 - acc;
    return dgp::ConceptPmf::make_explicit(n, std::move(support));
}

inline dgp::ConceptPmf random_bernoulli_pmf(int n, Rng& rng, double lo = 0.02, double hi = 0.9) {
    std::vector<double> p(static_cast<std::size_t>(n));
    for (auto& v : p) v = lo + (hi - lo) * rng.uniform();
    return dgp::ConceptPmf::make_bernoulli(std::move(p));
}

/// Either kind, chosen at random.
inline dgp::ConceptPmf random_pmf(int n, Rng& rng) {
    if (rng.bernoulli(0.5)) return random_bernoulli_pmf(n, rng);
    return random_explicit_pmf(n, rng, 0.3 + 0.7 * rng.uniform());
}

/// Fresh empty directory under the system temp dir.
inline std::string temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("rdp_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace rdp::testing
