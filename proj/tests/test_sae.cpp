#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "rdp/combinat.hpp"
#include "rdp/poly.hpp"
#include "rdp/sae.hpp"
#include "support.hpp"

using namespace rdp;

namespace {

sae::SaeParams identity_code(const dgp::ConceptBasis& basis, std::size_t k) {
    return sae::init(basis.size(), basis.dim(), sae::Activation::topk(k), sae::InitScheme::near_monosemantic, 0.0,
                     &basis, 0, true);
}

sae::TrainConfig fig3_config(std::uint64_t seed, double lambda) {
    sae::TrainConfig cfg;
    cfg.width = 3;
    cfg.activation = sae::Activation::topk(2);
    cfg.init = sae::InitScheme::near_monosemantic;
    cfg.noise_scale = 0.05;
    cfg.lambda = lambda;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("noise-free near-monosemantic init copies the basis") {
    const auto basis = dgp::make_basis(4, 4, dgp::BasisMode::orthonormal, 3);
    const auto p = sae::init(3, 4, sae::Activation::topk(2), sae::InitScheme::near_monosemantic, 0.0, &basis, 5);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t c = 0; c < 4; ++c) CHECK(p.w_dec(i, c) == doctest::Approx(basis.direction(i)[c]).scale(1));
    }
    CHECK(poly::joint_polysemanticity(p, basis) < 1e-12);
}

TEST_CASE("random unit rows are deterministic") {
    const auto a = sae::init(5, 4, sae::Activation::topk(2), sae::InitScheme::random_unit_rows, 0.0, nullptr, 42);
    const auto b = sae::init(5, 4, sae::Activation::topk(2), sae::InitScheme::random_unit_rows, 0.0, nullptr, 42);
    CHECK(a == b);
    for (std::size_t i = 0; i < 5; ++i) CHECK(norm(a.w_dec.row(i)) == doctest::Approx(1.0));
}

TEST_CASE("slightly noisy init is nearly monosemantic") {
    const auto basis = dgp::make_basis(4, 4, dgp::BasisMode::orthonormal, 3);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = sae::init(3, 4, sae::Activation::topk(2), sae::InitScheme::near_monosemantic, 0.05, &basis, seed);
        CHECK(poly::joint_polysemanticity(p, basis) < 0.02);
    }
}

TEST_CASE("init rejects scheme and basis mismatches") {
    const auto basis = dgp::make_basis(4, 2, dgp::BasisMode::orthonormal, 3);
    CHECK_THROWS_AS(sae::init(3, 4, sae::Activation::topk(1), sae::InitScheme::near_monosemantic, 0.0, &basis, 0),
                    ValidationError);
    CHECK_THROWS_AS(sae::init(2, 4, sae::Activation::topk(1), sae::InitScheme::near_monosemantic, 0.0, nullptr, 0),
                    ValidationError);
    CHECK_THROWS_AS(sae::init(2, 4, sae::Activation::topk(3), sae::InitScheme::random_unit_rows, 0.0, nullptr, 0),
                    ValidationError);
}

TEST_CASE("identity code reproduces a concept") {
    const auto basis = dgp::make_basis(4, 4, dgp::BasisMode::orthonormal, 8);
    const auto p = identity_code(basis, 1);
    const auto v1 = basis.direction(0);
    const auto out = sae::forward(p, v1);
    CHECK(out.z[0] == doctest::Approx(1.0));
    for (std::size_t i = 1; i < 4; ++i) CHECK(out.z[i] == 0.0);
    CHECK(squared_distance(out.x_hat, v1) < 1e-24);
}

TEST_CASE("zero input gives zero code") {
    const auto p = sae::init(3, 4, sae::Activation::relu(), sae::InitScheme::random_unit_rows, 0.0, nullptr, 1);
    const Vector x(4, 0.0);
    const auto out = sae::forward(p, x);
    for (double v : out.z) CHECK(v == 0.0);
    for (double v : out.x_hat) CHECK(v == 0.0);
}

TEST_CASE("topk ties go to the lowest latent") {
    const std::vector<double> pre{0.5, 0.5, 0.1};
    const auto z = sae::activate(pre, sae::Activation::topk(1));
    CHECK(z == Vector{0.5, 0.0, 0.0});
    const std::vector<double> neg{-1.0, -2.0, 0.3};
    CHECK(sae::activate(neg, sae::Activation::topk(2)) == Vector{0.0, 0.0, 0.3});
    CHECK(sae::activate(neg, sae::Activation::relu()) == Vector{0.0, 0.0, 0.3});
}

TEST_CASE("property: topk never exceeds K active latents") {
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t m = 1 + rng.below(8);
        const std::size_t k = 1 + rng.below(m);
        std::vector<double> pre(m);
        for (auto& v : pre) v = rng.bernoulli(0.2) ? 0.5 : rng.normal();
        const auto z = sae::activate(pre, sae::Activation::topk(k));
        CHECK(sae::active_count(z) <= k);
        for (std::size_t i = 0; i < m; ++i) CHECK((z[i] == 0.0 || z[i] == pre[i]));
    }
}

TEST_CASE("rate is exactly K when every input saturates the cap") {
    const auto basis = dgp::make_basis(3, 3, dgp::BasisMode::orthonormal, 1);
    auto p = sae::init(4, 3, sae::Activation::topk(3), sae::InitScheme::random_unit_rows, 0.0, nullptr, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < 3; ++c) p.w_enc(i, c) = (1.0 + 0.1 * static_cast<double>(i)) * basis.direction(0)[c];
    }
    const auto pmf = dgp::ConceptPmf::make_explicit(3, {{0b001, 0.5}, {0b011, 0.5}});
    CHECK(sae::rate(p, pmf, basis, sae::MeasureSpec::exact()) == 3.0);
}

TEST_CASE("zero inputs have zero rate") {
    const auto basis = dgp::make_basis(3, 3, dgp::BasisMode::orthonormal, 1);
    const auto p = sae::init(4, 3, sae::Activation::relu(), sae::InitScheme::random_unit_rows, 0.0, nullptr, 2);
    const auto pmf = dgp::ConceptPmf::make_explicit(3, {{0, 1.0}});
    CHECK(sae::rate(p, pmf, basis, sae::MeasureSpec::exact()) == 0.0);
}

TEST_CASE("identity code has zero distortion and zero decoder has distortion E|c|") {
    const auto basis = dgp::make_basis(5, 4, dgp::BasisMode::orthonormal, 6);
    const auto pmf = dgp::ConceptPmf::make_bernoulli({0.1, 0.4, 0.3, 0.7});
    auto p = identity_code(basis, 4);
    CHECK(sae::distortion(p, pmf, basis, sae::MeasureSpec::exact()) < 1e-20);
    CHECK(sae::rate(p, pmf, basis, sae::MeasureSpec::exact()) == doctest::Approx(1.5));
    for (auto& v : p.w_dec.data) v = 0.0;
    p.tied = false;
    CHECK(sae::distortion(p, pmf, basis, sae::MeasureSpec::exact()) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("exact relu measurement agrees with monte carlo") {
    const auto basis = dgp::make_basis(4, 3, dgp::BasisMode::random_unit, 12);
    auto p = sae::init(5, 4, sae::Activation::relu(), sae::InitScheme::random_unit_rows, 0.0, nullptr, 13);
    p.b_enc = {0.1, -0.2, 0.0, 0.05, -0.1};
    Rng rng(3);
    const auto pmf = testing::random_explicit_pmf(3, rng);
    REQUIRE(dgp::enumerate_events(pmf).size() == 8);
    const auto exact = sae::measure(p, pmf, basis, sae::MeasureSpec::exact());
    const auto mc = sae::measure(p, pmf, basis, sae::MeasureSpec::monte_carlo(100000, 77));
    CHECK(std::abs(exact.rate - mc.rate) <= 3 * mc.rate_stderr);
    CHECK(std::abs(exact.distortion - mc.distortion) <= 3 * mc.distortion_stderr);
    CHECK(mc.rate_stderr > 0.0);
}

TEST_CASE("measurement needs enumerable pmfs in exact mode") {
    const auto basis = dgp::make_basis(6, 21, dgp::BasisMode::random_unit, 1);
    const auto p = sae::init(3, 6, sae::Activation::topk(1), sae::InitScheme::random_unit_rows, 0.0, nullptr, 1);
    const auto pmf = dgp::ConceptPmf::make_bernoulli(std::vector<double>(21, 0.01));
    CHECK_THROWS_AS(sae::rate(p, pmf, basis, sae::MeasureSpec::exact()), ValidationError);
    CHECK_NOTHROW(sae::rate(p, pmf, basis, sae::MeasureSpec::monte_carlo(1000, 2)));
}

TEST_CASE("training learns a complete code on singleton events") {
    const auto basis = dgp::make_basis(4, 4, dgp::BasisMode::orthonormal, 21);
    const auto pmf = dgp::ConceptPmf::make_explicit(4, {{1, 0.25}, {2, 0.25}, {4, 0.25}, {8, 0.25}});
    // The exact optimum over aligned codes reaches zero distortion.
    CHECK(combinat::brute_force_optimum(pmf, 4, 1, false).distortion == 0.0);
    sae::TrainConfig cfg;
    cfg.width = 4;
    cfg.activation = sae::Activation::topk(1);
    cfg.init = sae::InitScheme::near_monosemantic;
    cfg.noise_scale = 0.3;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        cfg.tied = true;
        const auto tied = sae::train(pmf, basis, cfg).params;
        CHECK(sae::distortion(tied, pmf, basis, sae::MeasureSpec::exact()) < 1e-3);
        CHECK(poly::joint_polysemanticity(tied, basis) < 0.05);
        // Untied: only the decoder is pulled into alignment; off-support
        // encoder components never receive gradient.
        cfg.tied = false;
        const auto untied = sae::train(pmf, basis, cfg).params;
        CHECK(sae::distortion(untied, pmf, basis, sae::MeasureSpec::exact()) < 1e-3);
        CHECK(poly::polysemanticity(poly::cosine_table(untied.w_dec, basis)) < 0.05);
    }
}

TEST_CASE("trace is strictly increasing and training is deterministic") {
    const auto basis = dgp::make_basis(4, 4, dgp::BasisMode::orthonormal, 3);
    const auto pmf = dgp::ConceptPmf::make_bernoulli({0.2, 0.2, 0.2, 0.2});
    auto cfg = fig3_config(4, 0.0);
    cfg.steps = 300;
    const auto a = sae::train(pmf, basis, cfg);
    const auto b = sae::train(pmf, basis, cfg);
    CHECK(a.params == b.params);
    REQUIRE(a.trace.size() >= 2);
    CHECK(a.trace.front().step == 0);
    CHECK(a.trace.back().step == cfg.steps);
    for (std::size_t i = 1; i < a.trace.size(); ++i) CHECK(a.trace[i].step > a.trace[i - 1].step);
}

TEST_CASE("fig3 dynamics and the penalty effect across seeds") {
    const auto basis = dgp::make_basis(4, 4, dgp::BasisMode::orthonormal, 3);
    const auto pmf = dgp::ConceptPmf::make_bernoulli({0.2, 0.2, 0.2, 0.2});
    const double floor = combinat::monosemantic_frontier(pmf, 3).infeasible_below;
    CHECK(floor == doctest::Approx(0.2));
    for (std::uint64_t seed = 0; seed < 7; ++seed) {
        const auto free = sae::train(pmf, basis, fig3_config(seed, 0.0));
        const auto pen = sae::train(pmf, basis, fig3_config(seed, 100.0));
        const auto& first = free.trace.front();
        const auto& last = free.trace.back();
        CHECK(last.p_joint > first.p_joint);
        CHECK(last.distortion < first.distortion);
        const double d_free = sae::distortion(free.params, pmf, basis, sae::MeasureSpec::exact());
        const double d_pen = sae::distortion(pen.params, pmf, basis, sae::MeasureSpec::exact());
        CHECK(d_free < floor);
        CHECK(poly::joint_polysemanticity(pen.params, basis) < poly::joint_polysemanticity(free.params, basis));
        CHECK(d_pen >= d_free);
    }
}

TEST_CASE("trained fig3 model: exact and monte carlo agree") {
    const auto basis = dgp::make_basis(4, 4, dgp::BasisMode::orthonormal, 3);
    const auto pmf = dgp::ConceptPmf::make_bernoulli({0.2, 0.2, 0.2, 0.2});
    const auto model = sae::train(pmf, basis, fig3_config(1, 0.0)).params;
    const auto exact = sae::measure(model, pmf, basis, sae::MeasureSpec::exact());
    const auto mc = sae::measure(model, pmf, basis, sae::MeasureSpec::monte_carlo(100000, 5));
    CHECK(std::abs(exact.distortion - mc.distortion) <= 3 * mc.distortion_stderr);
    CHECK(std::abs(exact.rate - mc.rate) <= 3 * mc.rate_stderr + 1e-12);
}

TEST_CASE("tied training keeps the tied invariants") {
    const auto basis = dgp::make_basis(4, 4, dgp::BasisMode::orthonormal, 3);
    const auto pmf = dgp::ConceptPmf::make_bernoulli({0.2, 0.2, 0.2, 0.2});
    auto cfg = fig3_config(2, 1.0);
    cfg.tied = true;
    cfg.steps = 200;
    const auto r = sae::train(pmf, basis, cfg);
    CHECK(r.params.tied);
    CHECK(r.params.w_enc == r.params.w_dec);
    CHECK_NOTHROW(r.params.validate());
}

TEST_CASE("divergent training reports a runtime failure") {
    const auto basis = dgp::make_basis(4, 4, dgp::BasisMode::orthonormal, 3);
    const auto pmf = dgp::ConceptPmf::make_bernoulli({0.9, 0.9, 0.9, 0.9});
    sae::TrainConfig cfg;
    cfg.width = 4;
    cfg.activation = sae::Activation::relu();
    cfg.learning_rate = 1e300;
    cfg.steps = 50;
    cfg.train_biases = true;
    CHECK_THROWS_AS(sae::train(pmf, basis, cfg), RuntimeFailure);
}

TEST_CASE("train config validation") {
    sae::TrainConfig cfg;
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.activation = sae::Activation::topk(4);
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("pack and unpack round trip") {
    auto p = sae::init(3, 5, sae::Activation::topk(2), sae::InitScheme::random_unit_rows, 0.0, nullptr, 9);
    p.b_enc = {1, 2, 3};
    const auto flat = sae::pack(p);
    CHECK(flat.size() == 2 * 15 + 3 + 5);
    auto q = sae::init(3, 5, sae::Activation::topk(2), sae::InitScheme::random_unit_rows, 0.0, nullptr, 10);
    sae::unpack(flat, q);
    CHECK(q == p);
}

TEST_CASE("gradient matches finite differences at stable points") {
    Rng rng(123);
    int checked = 0;
    for (int attempt = 0; attempt < 2000 && checked < 25; ++attempt) {
        const auto r = testing::gradient_check_once(rng);
        if (!r) continue;
        ++checked;
        CHECK(r->relative_error < 1e-4);
    }
    CHECK(checked == 25);
}
