#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "audit_fixture.hpp"
#include "oracles.hpp"
#include "rdp/audit.hpp"
#include "support.hpp"

using namespace rdp;
using audit::AuditRecord;

namespace {

AuditRecord rec(double r, double d, double p, std::string id = {}) { return {std::move(id), r, d, {{"x", p}}}; }

std::vector<AuditRecord> random_records(Rng& rng, std::size_t n, bool coarse) {
    std::vector<AuditRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto draw = [&] { return coarse ? static_cast<double>(rng.below(4)) : rng.uniform(); };
        out.push_back(rec(draw(), draw(), draw(), "s" + std::to_string(i)));
    }
    return out;
}

void transform(std::vector<AuditRecord>& records, int which) {
    for (auto& r : records) {
        double& v = r.proxies.at("x");
        switch (which) {
            case 0: v = 3.0 * v - 7.0; break;
            case 1: v = std::exp(v); break;
            case 2: v = v * v * v; break;
            default: v = std::atan(v) + 10.0; break;
        }
    }
}

}  // namespace

TEST_CASE("dominated pair examples") {
    const auto two = audit::dominated_pairs({rec(1, 1, 0), rec(2, 2, 0)});
    CHECK(two == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
    CHECK(audit::dominated_pairs({rec(1, 1, 0), rec(1, 1, 0), rec(1, 1, 0)}).empty());
    CHECK(audit::dominated_pairs({rec(1, 2, 0), rec(2, 1, 0)}).empty());
}

TEST_CASE("property: dominated pairs match pairwise enumeration") {
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        const auto records = random_records(rng, t < 100 ? 5 : 2 + rng.below(12), t % 2 == 0);
        std::vector<std::pair<std::size_t, std::size_t>> want;
        for (std::size_t i = 0; i < records.size(); ++i) {
            for (std::size_t j = 0; j < records.size(); ++j) {
                const auto &a = records[i], &b = records[j];
                if (a.rate <= b.rate && a.distortion <= b.distortion && (a.rate != b.rate || a.distortion != b.distortion)) {
                    want.emplace_back(i, j);
                }
            }
        }
        auto got = audit::dominated_pairs(records);
        std::sort(got.begin(), got.end());
        CHECK(got == want);
        CHECK(got.size() <= records.size() * (records.size() - 1));
    }
}

TEST_CASE("violation rate examples") {
    CHECK(audit::violation_rate({rec(1, 1, 0.2), rec(2, 2, 0.5)}, "x") == 1.0);
    CHECK(audit::violation_rate({rec(1, 1, 0.5), rec(2, 2, 0.2)}, "x") == 0.0);
    // Pairs (0,1) and (2,1); only the first is inverted.
    const std::vector<AuditRecord> three{rec(1, 1, 0.3), rec(2, 2, 0.5), rec(2, 0.5, 0.7)};
    CHECK(audit::dominated_pairs(three).size() == 2);
    CHECK(audit::violation_rate(three, "x") == 0.5);
    // Proxy ties are not violations.
    CHECK(audit::violation_rate({rec(1, 1, 0.3), rec(2, 2, 0.3)}, "x") == 0.0);
    CHECK_FALSE(audit::violation_rate({rec(1, 2, 0.3), rec(2, 1, 0.5)}, "x").has_value());
    CHECK_FALSE(audit::violation_rate({rec(1, 1, 0.3), rec(2, 2, 0.5)}, "missing").has_value());
}

TEST_CASE("violation rate skips records missing the proxy") {
    std::vector<AuditRecord> r{rec(1, 1, 0.2), rec(2, 2, 0.5), {"gap", 3, 3, {}}};
    CHECK(audit::violation_rate(r, "x") == 1.0);
}

TEST_CASE("average ranks") {
    CHECK(audit::average_ranks({3, 1, 2}) == std::vector<double>{3, 1, 2});
    CHECK(audit::average_ranks({5, 5, 1, 5}) == std::vector<double>{3, 3, 1, 3});
    CHECK(audit::average_ranks({}).empty());
}

TEST_CASE("pearson edge cases") {
    CHECK_FALSE(audit::pearson({1, 1, 1}, {1, 2, 3}).has_value());
    CHECK_FALSE(audit::pearson({1}, {2}).has_value());
    CHECK(*audit::pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
    CHECK(*audit::pearson({1, 2, 3}, {6, 4, 2}) == doctest::Approx(-1.0));
}

TEST_CASE("rank correlation examples") {
    std::vector<AuditRecord> down, up;
    for (int i = 0; i < 6; ++i) {
        down.push_back(rec(i, i, 10.0 - i));
        up.push_back(rec(i, i, i));
    }
    CHECK(*audit::rdp_rank_correlation(down, "x") == doctest::Approx(1.0));
    CHECK(*audit::rdp_rank_correlation(up, "x") == doctest::Approx(-1.0));

    // One proxy tie: ranks (6, 4.5, 4.5, 3, 2, 1) against 1..6 give sqrt(34/35).
    std::vector<AuditRecord> tie;
    const double p[] = {0.6, 0.5, 0.5, 0.3, 0.2, 0.1};
    for (int i = 0; i < 6; ++i) tie.push_back(rec(i + 1, i + 1, p[i]));
    CHECK(*audit::rdp_rank_correlation(tie, "x") == doctest::Approx(std::sqrt(34.0 / 35.0)).epsilon(1e-14));

    CHECK_FALSE(audit::rdp_rank_correlation({rec(1, 1, 1), rec(2, 2, 0)}, "x").has_value());
    CHECK_FALSE(audit::rdp_rank_correlation({rec(1, 1, 1), rec(2, 2, 1), rec(3, 3, 1)}, "x").has_value());
    CHECK_FALSE(audit::rdp_rank_correlation({rec(1, 1, 1), rec(1, 1, 2), rec(1, 1, 3)}, "x").has_value());
}

TEST_CASE("ten-record fixture") {
    const auto records = testing::audit_fixture();
    CHECK(audit::dominated_pairs(records).size() == testing::kFixturePairs);
    CHECK(*audit::violation_rate(records, "proxy") == doctest::Approx(testing::kFixtureV).epsilon(1e-15));
    CHECK(*audit::rdp_rank_correlation(records, "proxy") == doctest::Approx(testing::fixture_rho()).epsilon(1e-14));
}

TEST_CASE("faithful proxy built from exact toy codes") {
    Rng rng(2);
    const auto pmf = testing::random_explicit_pmf(3, rng);
    const auto pts = testing::all_code_values(pmf, 2, testing::full_alphabet(3));
    std::vector<double> rates, dists;
    for (const auto& p : pts) {
        rates.push_back(p.rate);
        dists.push_back(p.distortion);
    }
    const auto rr = audit::average_ranks(rates), rd = audit::average_ranks(dists);
    std::vector<AuditRecord> records;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        // Tighter joint budget, more polysemantic: the ordering the theory predicts.
        const double by_sum = 10.0 - pts[i].rate - pts[i].distortion;
        const double by_rank = 1.0 / (rr[i] + rd[i]);
        records.push_back({"c" + std::to_string(i), pts[i].rate, pts[i].distortion,
                           {{"sum", by_sum}, {"rank", by_rank}, {"neg", -by_rank}}});
    }
    REQUIRE(!audit::dominated_pairs(records).empty());
    CHECK(*audit::violation_rate(records, "sum") == 0.0);
    CHECK(*audit::violation_rate(records, "rank") == 0.0);
    CHECK(*audit::rdp_rank_correlation(records, "rank") == doctest::Approx(1.0));
    CHECK(*audit::violation_rate(records, "neg") == 1.0);
    CHECK(*audit::rdp_rank_correlation(records, "neg") == doctest::Approx(-1.0));
}

TEST_CASE("property: order and monotone transformation invariance") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        auto records = random_records(rng, 3 + rng.below(15), t % 2 == 0);
        const auto v = audit::violation_rate(records, "x");
        const auto rho = audit::rdp_rank_correlation(records, "x");
        auto shuffled = records;
        for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
        auto moved = records;
        transform(moved, t % 4);
        for (const auto* other : {&shuffled, &moved}) {
            const auto v2 = audit::violation_rate(*other, "x");
            const auto rho2 = audit::rdp_rank_correlation(*other, "x");
            REQUIRE(v.has_value() == v2.has_value());
            REQUIRE(rho.has_value() == rho2.has_value());
            if (v) CHECK(*v2 == doctest::Approx(*v).epsilon(1e-15));
            if (rho) CHECK(*rho2 == doctest::Approx(*rho).epsilon(1e-12).scale(1));
        }
    }
}

TEST_CASE("property: negation flips V and rho") {
    Rng rng(4);
    for (int t = 0; t < 100; ++t) {
        auto records = random_records(rng, 3 + rng.below(15), t % 2 == 0);
        for (auto& r : records) r.proxies["x"] = rng.uniform();  // continuous proxy: no ties
        auto neg = records;
        for (auto& r : neg) r.proxies["x"] = -r.proxies["x"];
        const auto v = audit::violation_rate(records, "x");
        if (v) CHECK(*audit::violation_rate(neg, "x") == doctest::Approx(1.0 - *v));
        const auto rho = audit::rdp_rank_correlation(records, "x");
        if (rho) CHECK(*audit::rdp_rank_correlation(neg, "x") == doctest::Approx(-*rho).scale(1));
        if (v) CHECK((*v >= 0.0 && *v <= 1.0));
        if (rho) CHECK((*rho >= -1.0 - 1e-12 && *rho <= 1.0 + 1e-12));
    }
}

TEST_CASE("report ranking and orientation") {
    std::vector<AuditRecord> r;
    for (int i = 0; i < 4; ++i) {
        r.push_back({"s" + std::to_string(i), double(i), double(i), {{"good", 10.0 - i}, {"bad", double(i)}, {"interp", double(i)}}});
    }
    r[0].proxies["lonely"] = 1.0;
    const auto rep = audit::audit_report(r, {"bad", "good", "interp", "lonely"}, {{"interp", -1}});
    CHECK(rep.records == 4);
    CHECK(rep.dominated_pairs == 6);
    CHECK(rep.random_baseline == 0.5);
    REQUIRE(rep.ranking.size() == 4);
    CHECK(rep.ranking[0].proxy == "good");
    CHECK(rep.ranking[1].proxy == "interp");
    CHECK(rep.ranking[1].orientation == -1);
    CHECK(rep.ranking[1].violation == 0.0);
    CHECK(*rep.ranking[1].rho == doctest::Approx(1.0));
    CHECK(rep.ranking[2].proxy == "bad");
    CHECK(rep.ranking[2].violation == 1.0);
    CHECK(rep.ranking[3].proxy == "lonely");
    CHECK_FALSE(rep.ranking[3].violation.has_value());
    CHECK_FALSE(rep.ranking[3].rho.has_value());
    CHECK(rep.ranking[3].records == 1);
    CHECK(rep.ranking[3].dominated_pairs == 0);
}

TEST_CASE("oriented multiplies proxy values") {
    const auto out = audit::oriented({rec(1, 1, 0.25)}, {{"x", -1}});
    CHECK(out[0].proxies.at("x") == -0.25);
}
