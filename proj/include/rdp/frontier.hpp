#pragma once

// Grid sweeps over (K, lambda, seed), Pareto fronts, and empirical
// rate-distortion-polysemanticity envelopes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdp/dgp.hpp"
#include "rdp/parallel.hpp"
#include "rdp/sae.hpp"

namespace rdp::frontier {

/// Which polysemanticity was recorded: P_joint (<= 2) or decoder-only (<= 1).
enum class PolyKind { joint, decoder };

std::string to_string(PolyKind kind);

struct SweepPoint {
    std::string run_id;
    int k = 0;
    double lambda = 0.0;
    std::size_t seed_index = 0;
    std::uint64_t seed = 0;  // training seed actually used
    double rate = 0.0;
    double distortion = 0.0;
    double poly = 0.0;
    PolyKind poly_kind = PolyKind::joint;
    bool ok = true;
    std::string status = "ok";
};

inline constexpr std::size_t kSweepMonteCarloSamples = 100000;

struct SweepGrid {
    dgp::ConceptPmf pmf;
    dgp::ConceptBasis basis;
    std::vector<int> ks;
    std::vector<double> lambdas;
    std::size_t seeds = 1;
    sae::TrainConfig base;  // activation k, lambda and seed are overwritten per cell
    std::uint64_t base_seed = 0;

    /// Nonempty axes, K within (0, width], lambda >= 0.
    void validate() const;
};

/// Default lambda axis.
std::vector<double> default_lambdas();

/// Training config for one cell. The seed depends only on the seed index, so
/// every (K, lambda) pair shares its initializations.
sae::TrainConfig cell_config(const SweepGrid& grid, int k, double lambda, std::size_t seed_index);

/// Trains and measures one cell. Training failures are caught and recorded.
SweepPoint run_cell(const SweepGrid& grid, int k, double lambda, std::size_t seed_index);

/// One point per cell, sorted by (k, lambda, seed index).
std::vector<SweepPoint> run_sweep(const SweepGrid& grid, std::size_t threads = thread_count());

enum class Axis { rate, distortion, poly };

std::string to_string(Axis axis);
Axis parse_axis(const std::string& text);
double value(const SweepPoint& p, Axis axis);

struct BudgetFilter {
    Axis axis = Axis::poly;
    double bound = 0.0;  // keep points with value <= bound
};

struct Front {
    std::vector<SweepPoint> points;  // in input order
    bool empty = false;              // nothing survived the filter
};

/// Points not weakly dominated on (x, y) by another point. Failed cells are
/// ignored. Exact duplicates all survive.
Front pareto_front(const std::vector<SweepPoint>& points, Axis x, Axis y,
                   const std::optional<BudgetFilter>& filter = std::nullopt);

/// True when every point of `inner` is matched or beaten on both axes by some point of `outer`.
bool weakly_dominated_by(const std::vector<SweepPoint>& inner, const std::vector<SweepPoint>& outer, Axis x, Axis y);

/// min of `objective` over points with budget_axis <= b and P <= p, on a grid.
struct Envelope {
    Axis objective = Axis::rate;
    Axis budget = Axis::distortion;
    std::vector<double> budget_grid;            // ascending
    std::vector<double> poly_grid;              // ascending
    std::vector<std::optional<double>> values;  // budget-major; nullopt = infeasible

    const std::optional<double>& at(std::size_t b, std::size_t p) const { return values[b * poly_grid.size() + p]; }
    std::optional<double>& at(std::size_t b, std::size_t p) { return values[b * poly_grid.size() + p]; }
};

/// R*(D0, P0).
Envelope empirical_envelope(const std::vector<SweepPoint>& points, std::vector<double> d_grid,
                            std::vector<double> p_grid);

/// Distortion dual D*(R0, P0).
Envelope distortion_envelope(const std::vector<SweepPoint>& points, std::vector<double> r_grid,
                             std::vector<double> p_grid);

/// Empirical deciles (10%, ..., 100%) of the axis over successful points, deduplicated.
std::vector<double> decile_grid(const std::vector<SweepPoint>& points, Axis axis);

struct Violation {
    Axis relaxed;                       // which budget was loosened
    std::size_t from_b, from_p;         // tighter cell
    std::size_t to_b, to_p;             // adjacent looser cell
    std::optional<double> before;
    std::optional<double> after;
};

/// Adjacent cells where loosening a budget raised the envelope or turned a
/// feasible cell infeasible.
std::vector<Violation> monotonicity_check(const Envelope& envelope);

}  // namespace rdp::frontier
