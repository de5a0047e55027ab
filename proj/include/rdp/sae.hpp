#pragma once

// A small dense sparse autoencoder (TopK or ReLU) trained on the synthetic
// concept DGP, plus exact and Monte Carlo rate/distortion estimators.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdp/common.hpp"
#include "rdp/dgp.hpp"

namespace rdp::sae {

enum class ActivationKind { topk, relu };

struct Activation {
    ActivationKind kind = ActivationKind::topk;
    std::size_t k = 1;  // only meaningful for topk

    static Activation topk(std::size_t k) { return {ActivationKind::topk, k}; }
    static Activation relu() { return {ActivationKind::relu, 0}; }

    bool operator==(const Activation&) const = default;
};

std::string to_string(const Activation& act);

/// Encoder/decoder weights are both m x d; row i of w_dec is atom i.
struct SaeParams {
    std::size_t m = 0;
    std::size_t d = 0;
    Matrix w_enc;
    Matrix w_dec;
    Vector b_enc;
    Vector b_dec;
    Activation activation;
    bool tied = false;

    /// Shapes, K <= m, and the tied invariants (W_enc == W_dec, zero biases).
    void validate() const;

    bool operator==(const SaeParams&) const = default;
};

enum class InitScheme { random_unit_rows, near_monosemantic };

std::string to_string(InitScheme scheme);
InitScheme parse_init_scheme(const std::string& text);

/// random-unit-rows: independent seeded unit decoder rows, encoder a copy.
/// near-monosemantic: decoder row i = (v_i + noise * g_i) / norm, encoder a copy.
SaeParams init(std::size_t m, std::size_t d, Activation activation, InitScheme scheme, double noise_scale,
               const dgp::ConceptBasis* basis, std::uint64_t seed, bool tied = false);

/// Keeps the K largest post-ReLU preactivations (ties: lowest index).
Vector activate(std::span<const double> pre, const Activation& act);

Vector encode(const SaeParams& params, std::span<const double> x);
Vector decode(const SaeParams& params, std::span<const double> z);

struct ForwardResult {
    Vector z;
    Vector x_hat;
};

ForwardResult forward(const SaeParams& params, std::span<const double> x);

/// Latent is counted active when |z_i| exceeds this.
inline constexpr double kActiveThreshold = 1e-9;

std::size_t active_count(std::span<const double> z);

struct TrainConfig {
    std::size_t width = 3;
    Activation activation = Activation::topk(2);
    std::size_t steps = 5000;
    std::size_t batch_size = 256;
    double learning_rate = 1e-2;
    double lambda = 0.0;  // weight on P_joint
    double l1 = 0.0;      // weight on ||z||_1 (relu mode)
    std::uint64_t seed = 0;
    InitScheme init = InitScheme::random_unit_rows;
    double noise_scale = 0.05;
    bool tied = false;
    bool train_biases = false;
    std::size_t checkpoints = 50;

    void validate() const;
};

struct TracePoint {
    std::size_t step = 0;
    double distortion = 0.0;
    double rate = 0.0;
    double p_joint = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    SaeParams params;
    std::vector<TracePoint> trace;
};

/// Adam (beta1=0.9, beta2=0.999, eps=1e-8) on MSE + lambda * P_joint (+ l1 ||z||_1).
/// TopK is differentiated straight-through on the selected support. Throws
/// RuntimeFailure if the loss becomes non-finite.
TrainResult train(const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis, const TrainConfig& cfg);

/// Gradient of the batch objective, laid out like the parameters.
struct Gradients {
    Matrix w_enc;
    Matrix w_dec;
    Vector b_enc;
    Vector b_dec;
};

/// Mean over the batch of ||x - x_hat||^2 + l1 ||z||_1, plus lambda * P_joint.
/// Fills `grad` when non-null (untied layout; callers fold for tied codes).
double batch_objective(const SaeParams& params, const std::vector<Vector>& batch, const dgp::ConceptBasis& basis,
                       double lambda, double l1, Gradients* grad);

/// Parameter packing order: w_enc, w_dec, b_enc, b_dec.
Vector pack(const SaeParams& params);
void unpack(std::span<const double> flat, SaeParams& params);
Vector pack(const Gradients& grad);

enum class MeasureMode { exact, monte_carlo };

struct MeasureSpec {
    MeasureMode mode = MeasureMode::exact;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    int enumeration_cap = dgp::kDefaultEnumerationCap;

    static MeasureSpec exact() { return {}; }
    static MeasureSpec monte_carlo(std::size_t n, std::uint64_t seed) { return {MeasureMode::monte_carlo, n, seed}; }
};

struct Measurement {
    double rate = 0.0;
    double distortion = 0.0;
    double l1 = 0.0;
    double rate_stderr = 0.0;  // zero for exact measurements
    double distortion_stderr = 0.0;
};

/// Any encoder/decoder pair: x -> (active latent count, ||z||_1, x_hat).
struct MapOutput {
    std::size_t active = 0;
    double l1 = 0.0;
    Vector x_hat;
};
using ReconstructionMap = std::function<MapOutput(std::span<const double> x)>;

Measurement measure_map(const ReconstructionMap& map, const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis,
                        const MeasureSpec& spec);

Measurement measure(const SaeParams& params, const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis,
                    const MeasureSpec& spec);

/// R = E||z||_0.
double rate(const SaeParams& params, const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis,
            const MeasureSpec& spec);

/// D = E||x - x_hat||^2.
double distortion(const SaeParams& params, const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis,
                  const MeasureSpec& spec);

}  // namespace rdp::sae
