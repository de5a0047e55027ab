#include "rdp/frontier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "rdp/poly.hpp"

namespace rdp::frontier {

std::string to_string(PolyKind kind) { return kind == PolyKind::joint ? "joint" : "decoder"; }

void SweepGrid::validate() const {
    if (ks.empty() || lambdas.empty() || seeds == 0) throw ValidationError("sweep grid: every axis must be nonempty");
    base.validate();
    for (int k : ks) {
        if (k < 1 || static_cast<std::size_t>(k) > base.width) {
            throw ValidationError("sweep grid: K=" + std::to_string(k) + " outside [1, width]");
        }
    }
    for (double l : lambdas) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("sweep grid: lambda must be finite and >= 0");
    }
    if (basis.size() != static_cast<std::size_t>(pmf.size())) {
        throw ValidationError("sweep grid: basis and pmf disagree on n");
    }
}

std::vector<double> default_lambdas() { return {0.0, 1.0, 3.0, 10.0, 30.0, 100.0}; }

sae::TrainConfig cell_config(const SweepGrid& grid, int k, double lambda, std::size_t seed_index) {
    sae::TrainConfig cfg = grid.base;
    cfg.activation = sae::Activation::topk(static_cast<std::size_t>(k));
    cfg.lambda = lambda;
    cfg.seed = derive_seed(grid.base_seed, seed_index);
    return cfg;
}

namespace {

std::string format_lambda(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace

SweepPoint run_cell(const SweepGrid& grid, int k, double lambda, std::size_t seed_index) {
    const sae::TrainConfig cfg = cell_config(grid, k, lambda, seed_index);
    SweepPoint point;
    point.run_id = "k" + std::to_string(k) + "_l" + format_lambda(lambda) + "_s" + std::to_string(seed_index);
    point.k = k;
    point.lambda = lambda;
    point.seed_index = seed_index;
    point.seed = cfg.seed;
    try {
        const auto result = sae::train(grid.pmf, grid.basis, cfg);
        const auto spec = grid.pmf.enumerable()
                              ? sae::MeasureSpec::exact()
                              : sae::MeasureSpec::monte_carlo(kSweepMonteCarloSamples, derive_seed(cfg.seed, 3));
        const auto m = sae::measure(result.params, grid.pmf, grid.basis, spec);
        point.rate = m.rate;
        point.distortion = m.distortion;
        point.poly = poly::joint_polysemanticity(result.params, grid.basis);
        if (!std::isfinite(point.rate) || !std::isfinite(point.distortion) || !std::isfinite(point.poly)) {
            throw RuntimeFailure("non-finite measurement");
        }
    } catch (const RuntimeFailure& e) {
        point.ok = false;
        point.status = std::string("failed: ") + e.what();
        point.rate = point.distortion = point.poly = std::nan("");
    }
    return point;
}

std::vector<SweepPoint> run_sweep(const SweepGrid& grid, std::size_t threads) {
    grid.validate();
    struct Cell {
        int k;
        double lambda;
        std::size_t seed;
    };
    std::vector<Cell> cells;
    for (int k : grid.ks) {
        for (double l : grid.lambdas) {
            for (std::size_t s = 0; s < grid.seeds; ++s) cells.push_back({k, l, s});
        }
    }
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
        return std::tie(a.k, a.lambda, a.seed) < std::tie(b.k, b.lambda, b.seed);
    });
    std::vector<SweepPoint> out(cells.size());
    parallel_for(
        cells.size(), [&](std::size_t i) { out[i] = run_cell(grid, cells[i].k, cells[i].lambda, cells[i].seed); },
        threads);
    return out;
}

std::string to_string(Axis axis) {
    switch (axis) {
        case Axis::rate: return "R";
        case Axis::distortion: return "D";
        case Axis::poly: return "P";
    }
    return {};
}

Axis parse_axis(const std::string& text) {
    if (text == "R" || text == "r" || text == "rate") return Axis::rate;
    if (text == "D" || text == "d" || text == "distortion") return Axis::distortion;
    if (text == "P" || text == "p" || text == "poly") return Axis::poly;
    throw ValidationError("unknown axis '" + text + "' (expected R, D or P)");
}

double value(const SweepPoint& p, Axis axis) {
    switch (axis) {
        case Axis::rate: return p.rate;
        case Axis::distortion: return p.distortion;
        case Axis::poly: return p.poly;
    }
    return 0.0;
}

Front pareto_front(const std::vector<SweepPoint>& points, Axis x, Axis y, const std::optional<BudgetFilter>& filter) {
    if (x == y) throw ValidationError("pareto_front: the two axes must differ");
    std::vector<SweepPoint> pool;
    for (const auto& p : points) {
        if (!p.ok) continue;
        if (filter && !(value(p, filter->axis) <= filter->bound)) continue;
        pool.push_back(p);
    }
    // Sweep in (x, y) order: a point survives iff its y beats every earlier point
    // with strictly smaller x, or ties the running best of its own x group.
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = value(pool[a], x), xb = value(pool[b], x);
        return xa < xb || (xa == xb && value(pool[a], y) < value(pool[b], y));
    });
    std::vector<bool> keep(pool.size(), false);
    double best_y = INFINITY;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        const double xi = value(pool[order[i]], x);
        while (j < order.size() && value(pool[order[j]], x) == xi) ++j;
        const double group_min = value(pool[order[i]], y);
        if (group_min < best_y) {
            for (std::size_t t = i; t < j && value(pool[order[t]], y) == group_min; ++t) keep[order[t]] = true;
            best_y = group_min;
        }
        i = j;
    }
    Front front;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (keep[i]) front.points.push_back(pool[i]);
    }
    front.empty = pool.empty();
    return front;
}

bool weakly_dominated_by(const std::vector<SweepPoint>& inner, const std::vector<SweepPoint>& outer, Axis x, Axis y) {
    return std::all_of(inner.begin(), inner.end(), [&](const SweepPoint& p) {
        return std::any_of(outer.begin(), outer.end(), [&](const SweepPoint& q) {
            return value(q, x) <= value(p, x) && value(q, y) <= value(p, y);
        });
    });
}

namespace {

void normalize_grid(std::vector<double>& grid, const char* name) {
    if (grid.empty()) throw ValidationError(std::string("envelope: empty ") + name + " grid");
    for (double v : grid) {
        if (std::isnan(v)) throw ValidationError(std::string("envelope: NaN in ") + name + " grid");
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
}

Envelope build_envelope(const std::vector<SweepPoint>& points, Axis objective, Axis budget,
                        std::vector<double> budget_grid, std::vector<double> p_grid) {
    normalize_grid(budget_grid, "budget");
    normalize_grid(p_grid, "polysemanticity");
    Envelope env;
    env.objective = objective;
    env.budget = budget;
    env.budget_grid = std::move(budget_grid);
    env.poly_grid = std::move(p_grid);
    env.values.assign(env.budget_grid.size() * env.poly_grid.size(), std::nullopt);
    for (std::size_t b = 0; b < env.budget_grid.size(); ++b) {
        for (std::size_t p = 0; p < env.poly_grid.size(); ++p) {
            std::optional<double> best;
            for (const auto& pt : points) {
                if (!pt.ok) continue;
                if (value(pt, budget) <= env.budget_grid[b] && pt.poly <= env.poly_grid[p]) {
                    const double v = value(pt, objective);
                    if (!best || v < *best) best = v;
                }
            }
            env.at(b, p) = best;
        }
    }
    return env;
}

}  // namespace

Envelope empirical_envelope(const std::vector<SweepPoint>& points, std::vector<double> d_grid,
                            std::vector<double> p_grid) {
    return build_envelope(points, Axis::rate, Axis::distortion, std::move(d_grid), std::move(p_grid));
}

Envelope distortion_envelope(const std::vector<SweepPoint>& points, std::vector<double> r_grid,
                             std::vector<double> p_grid) {
    return build_envelope(points, Axis::distortion, Axis::rate, std::move(r_grid), std::move(p_grid));
}

std::vector<double> decile_grid(const std::vector<SweepPoint>& points, Axis axis) {
    std::vector<double> vals;
    for (const auto& p : points) {
        if (p.ok) vals.push_back(value(p, axis));
    }
    if (vals.empty()) throw ValidationError("decile_grid: no successful points");
    std::sort(vals.begin(), vals.end());
    std::vector<double> grid;
    const std::size_t n = vals.size();
    // Nearest-rank quantiles so each grid value is attained by a point.
    for (int q = 1; q <= 10; ++q) {
        const std::size_t rank = (static_cast<std::size_t>(q) * n + 9) / 10;
        grid.push_back(vals[std::max<std::size_t>(rank, 1) - 1]);
    }
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

std::vector<Violation> monotonicity_check(const Envelope& env) {
    std::vector<Violation> out;
    const auto worse = [](const std::optional<double>& tight, const std::optional<double>& loose) {
        if (!tight) return false;
        return !loose || *loose > *tight;
    };
    for (std::size_t b = 0; b < env.budget_grid.size(); ++b) {
        for (std::size_t p = 0; p < env.poly_grid.size(); ++p) {
            if (b + 1 < env.budget_grid.size() && worse(env.at(b, p), env.at(b + 1, p))) {
                out.push_back({env.budget, b, p, b + 1, p, env.at(b, p), env.at(b + 1, p)});
            }
            if (p + 1 < env.poly_grid.size() && worse(env.at(b, p), env.at(b, p + 1))) {
                out.push_back({Axis::poly, b, p, b, p + 1, env.at(b, p), env.at(b, p + 1)});
            }
        }
    }
    return out;
}

}  // namespace rdp::frontier
