#include "rdp/audit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rdp/common.hpp"

namespace rdp::audit {

std::vector<std::pair<std::size_t, std::size_t>> dominated_pairs(const std::vector<AuditRecord>& records) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (std::size_t j = 0; j < records.size(); ++j) {
            const auto& a = records[i];
            const auto& b = records[j];
            if (a.rate <= b.rate && a.distortion <= b.distortion && (a.rate != b.rate || a.distortion != b.distortion)) {
                out.emplace_back(i, j);
            }
        }
    }
    return out;
}

std::optional<double> violation_rate(const std::vector<AuditRecord>& records, const std::string& proxy) {
    std::size_t pairs = 0;
    std::size_t violations = 0;
    for (const auto& [i, j] : dominated_pairs(records)) {
        const auto pi = records[i].proxies.find(proxy);
        const auto pj = records[j].proxies.find(proxy);
        if (pi == records[i].proxies.end() || pj == records[j].proxies.end()) continue;
        ++pairs;
        if (pi->second < pj->second) ++violations;
    }
    if (pairs == 0) return std::nullopt;
    return static_cast<double>(violations) / static_cast<double>(pairs);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
        i = j;
    }
    return ranks;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("pearson: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) return std::nullopt;
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> rdp_rank_correlation(const std::vector<AuditRecord>& records, const std::string& proxy) {
    std::vector<double> r, d, p;
    for (const auto& rec : records) {
        const auto it = rec.proxies.find(proxy);
        if (it == rec.proxies.end()) continue;
        r.push_back(rec.rate);
        d.push_back(rec.distortion);
        p.push_back(it->second);
    }
    if (p.size() < 3) return std::nullopt;
    const auto rank_r = average_ranks(r);
    const auto rank_d = average_ranks(d);
    std::vector<double> joint(rank_r.size());
    for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = rank_r[i] + rank_d[i];
    const auto corr = pearson(average_ranks(joint), average_ranks(p));
    if (!corr) return std::nullopt;
    return -*corr;
}

std::vector<AuditRecord> oriented(const std::vector<AuditRecord>& records, const std::map<std::string, int>& orientation) {
    for (const auto& [name, o] : orientation) {
        if (o != 1 && o != -1) throw ValidationError("orientation for '" + name + "' must be +1 or -1");
    }
    auto out = records;
    for (auto& rec : out) {
        for (auto& [name, v] : rec.proxies) {
            const auto it = orientation.find(name);
            if (it != orientation.end() && it->second == -1) v = -v;
        }
    }
    return out;
}

AuditReport audit_report(const std::vector<AuditRecord>& records, const std::vector<std::string>& proxies,
                         const std::map<std::string, int>& orientation) {
    for (const auto& rec : records) {
        if (!std::isfinite(rec.rate) || !std::isfinite(rec.distortion)) {
            throw ValidationError("audit: record '" + rec.sae_id + "' has non-finite R or D");
        }
    }
    const auto recs = oriented(records, orientation);
    const auto pairs = dominated_pairs(recs);
    AuditReport report;
    report.records = recs.size();
    report.dominated_pairs = pairs.size();
    for (const auto& name : proxies) {
        ProxyStats s;
        s.proxy = name;
        const auto it = orientation.find(name);
        s.orientation = it == orientation.end() ? 1 : it->second;
        for (const auto& rec : recs) s.records += rec.proxies.contains(name) ? 1 : 0;
        for (const auto& [i, j] : pairs) {
            if (recs[i].proxies.contains(name) && recs[j].proxies.contains(name)) ++s.dominated_pairs;
        }
        s.violation = violation_rate(recs, name);
        s.rho = rdp_rank_correlation(recs, name);
        report.ranking.push_back(std::move(s));
    }
    std::stable_sort(report.ranking.begin(), report.ranking.end(), [](const ProxyStats& a, const ProxyStats& b) {
        if (a.violation.has_value() != b.violation.has_value()) return a.violation.has_value();
        if (a.violation && *a.violation != *b.violation) return *a.violation < *b.violation;
        return a.proxy < b.proxy;
    });
    return report;
}

}  // namespace rdp::audit
