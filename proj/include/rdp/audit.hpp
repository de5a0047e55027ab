#pragma once

// Consistency statistics for polysemanticity proxies over a sweep of SAEs:
// violation rate V on dominated pairs and the sign-flipped Spearman rho.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rdp::audit {

struct AuditRecord {
    std::string sae_id;
    double rate = 0.0;
    double distortion = 0.0;
    std::map<std::string, double> proxies;  // missing proxies are simply absent
};

/// Ordered pairs (i, j), 0-based, with R_i <= R_j, D_i <= D_j and (R_i, D_i) != (R_j, D_j).
std::vector<std::pair<std::size_t, std::size_t>> dominated_pairs(const std::vector<AuditRecord>& records);

/// Fraction of dominated pairs with P_i < P_j (strict). Pairs where either
/// record lacks the proxy are skipped; nullopt when no pair remains.
std::optional<double> violation_rate(const std::vector<AuditRecord>& records, const std::string& proxy);

/// Average ranks (1-based), ties sharing the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values);

/// Pearson correlation; nullopt when either vector is constant or n < 2.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

/// -Spearman(rank(R) + rank(D), P) over records carrying the proxy. nullopt
/// when fewer than 3 such records or either vector is constant.
std::optional<double> rdp_rank_correlation(const std::vector<AuditRecord>& records, const std::string& proxy);

inline constexpr double kRandomBaseline = 0.5;

struct ProxyStats {
    std::string proxy;
    int orientation = 1;              // +1: higher means more polysemantic; -1: higher means more interpretable
    std::optional<double> violation;  // V
    std::optional<double> rho;
    std::size_t dominated_pairs = 0;  // pairs where both records carry the proxy
    std::size_t records = 0;          // records carrying the proxy
};

struct AuditReport {
    std::size_t records = 0;
    std::size_t dominated_pairs = 0;
    std::vector<ProxyStats> ranking;  // V ascending; undefined V last, then by name
    double random_baseline = kRandomBaseline;
};

/// Applies each orientation (multiplying proxy values by it) before computing
/// V and rho. Proxies missing from `orientation` default to +1.
AuditReport audit_report(const std::vector<AuditRecord>& records, const std::vector<std::string>& proxies,
                         const std::map<std::string, int>& orientation = {});

/// Records after multiplying each proxy by its orientation.
std::vector<AuditRecord> oriented(const std::vector<AuditRecord>& records, const std::map<std::string, int>& orientation);

}  // namespace rdp::audit
