#include "rdp/sae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rdp/poly.hpp"
#include "rdp/rng.hpp"

namespace rdp::sae {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Trace checkpoints are evaluated exactly only for small supports; larger
// laws fall back to a fixed Monte Carlo panel so tracing stays cheap.
constexpr int kTraceExactCap = 12;
constexpr std::size_t kTraceSamples = 4096;

class Adam {
public:
    explicit Adam(std::size_t size) : m_(size, 0.0), v_(size, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = kAdamBeta1 * m_[i] + (1.0 - kAdamBeta1) * grad[i];
            v_[i] = kAdamBeta2 * v_[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
            params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kAdamEps);
        }
    }

private:
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

void normalize(std::span<double> v) {
    const double len = norm(v);
    for (double& x : v) x /= len;
}

// Forward pass into caller-owned buffers.
void forward_into(const SaeParams& p, std::span<const double> x, Vector& pre, Vector& z, Vector& x_hat) {
    pre.resize(p.m);
    for (std::size_t i = 0; i < p.m; ++i) pre[i] = dot(p.w_enc.row(i), x) + p.b_enc[i];
    z = activate(pre, p.activation);
    x_hat.assign(p.b_dec.begin(), p.b_dec.end());
    for (std::size_t i = 0; i < p.m; ++i) {
        if (z[i] == 0.0) continue;
        const auto atom = p.w_dec.row(i);
        for (std::size_t k = 0; k < p.d; ++k) x_hat[k] += z[i] * atom[k];
    }
}

}  // namespace

std::string to_string(const Activation& act) {
    return act.kind == ActivationKind::relu ? "relu" : "topk(" + std::to_string(act.k) + ")";
}

std::string to_string(InitScheme scheme) {
    return scheme == InitScheme::near_monosemantic ? "near-monosemantic" : "random-unit-rows";
}

InitScheme parse_init_scheme(const std::string& text) {
    if (text == "near-monosemantic" || text == "near_monosemantic") return InitScheme::near_monosemantic;
    if (text == "random-unit-rows" || text == "random_unit_rows") return InitScheme::random_unit_rows;
    throw ValidationError("unknown init scheme '" + text + "' (expected random-unit-rows or near-monosemantic)");
}

void SaeParams::validate() const {
    if (m == 0 || d == 0) throw ValidationError("sae: m and d must be positive");
    if (w_enc.rows != m || w_enc.cols != d || w_dec.rows != m || w_dec.cols != d) {
        throw ValidationError("sae: weight shapes do not match m x d");
    }
    if (b_enc.size() != m || b_dec.size() != d) throw ValidationError("sae: bias shapes do not match");
    if (activation.kind == ActivationKind::topk && (activation.k == 0 || activation.k > m)) {
        throw ValidationError("sae: topk K must be in [1, m]");
    }
    if (tied) {
        if (w_enc != w_dec) throw ValidationError("sae: tied params need W_enc == W_dec");
        const auto nonzero = [](double v) { return v != 0.0; };
        if (std::any_of(b_enc.begin(), b_enc.end(), nonzero) || std::any_of(b_dec.begin(), b_dec.end(), nonzero)) {
            throw ValidationError("sae: tied params need zero biases");
        }
    }
}

SaeParams init(std::size_t m, std::size_t d, Activation activation, InitScheme scheme, double noise_scale,
               const dgp::ConceptBasis* basis, std::uint64_t seed, bool tied) {
    SaeParams p;
    p.m = m;
    p.d = d;
    p.activation = activation;
    p.tied = tied;
    p.w_dec = Matrix(m, d);
    p.b_enc.assign(m, 0.0);
    p.b_dec.assign(d, 0.0);
    Rng rng(seed);
    if (scheme == InitScheme::near_monosemantic) {
        if (basis == nullptr) throw ValidationError("init: near-monosemantic scheme needs a concept basis");
        if (basis->size() < m) throw ValidationError("init: near-monosemantic scheme needs n >= m");
        if (basis->dim() != d) throw ValidationError("init: basis dimension does not match d");
        if (!(noise_scale >= 0.0)) throw ValidationError("init: noise scale must be nonnegative");
        for (std::size_t i = 0; i < m; ++i) {
            auto row = p.w_dec.row(i);
            const auto v = basis->direction(i);
            for (std::size_t k = 0; k < d; ++k) row[k] = v[k] + noise_scale * rng.normal();
            normalize(row);
        }
    } else {
        for (std::size_t i = 0; i < m; ++i) {
            auto row = p.w_dec.row(i);
            double len = 0.0;
            do {
                for (double& v : row) v = rng.normal();
                len = norm(row);
            } while (len < 1e-8);
            normalize(row);
        }
    }
    p.w_enc = p.w_dec;
    p.validate();
    return p;
}

Vector activate(std::span<const double> pre, const Activation& act) {
    Vector z(pre.size(), 0.0);
    if (act.kind == ActivationKind::relu) {
        for (std::size_t i = 0; i < pre.size(); ++i) z[i] = std::max(pre[i], 0.0);
        return z;
    }
    std::vector<std::size_t> positive;
    positive.reserve(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) {
        if (pre[i] > 0.0) positive.push_back(i);
    }
    if (positive.size() > act.k) {
        const auto before = [&](std::size_t a, std::size_t b) { return pre[a] > pre[b] || (pre[a] == pre[b] && a < b); };
        std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(act.k), positive.end(), before);
        positive.resize(act.k);
    }
    for (std::size_t i : positive) z[i] = pre[i];
    return z;
}

Vector encode(const SaeParams& params, std::span<const double> x) {
    Vector pre(params.m);
    for (std::size_t i = 0; i < params.m; ++i) pre[i] = dot(params.w_enc.row(i), x) + params.b_enc[i];
    return activate(pre, params.activation);
}

Vector decode(const SaeParams& params, std::span<const double> z) {
    Vector x_hat(params.b_dec);
    for (std::size_t i = 0; i < params.m; ++i) {
        const auto atom = params.w_dec.row(i);
        for (std::size_t k = 0; k < params.d; ++k) x_hat[k] += z[i] * atom[k];
    }
    return x_hat;
}

ForwardResult forward(const SaeParams& params, std::span<const double> x) {
    ForwardResult out;
    Vector pre;
    forward_into(params, x, pre, out.z, out.x_hat);
    return out;
}

std::size_t active_count(std::span<const double> z) {
    return static_cast<std::size_t>(std::count_if(z.begin(), z.end(), [](double v) { return std::abs(v) > kActiveThreshold; }));
}

void TrainConfig::validate() const {
    if (width == 0) throw ValidationError("train: width must be positive");
    if (activation.kind == ActivationKind::topk && (activation.k == 0 || activation.k > width)) {
        throw ValidationError("train: topk K must be in [1, width]");
    }
    if (steps == 0) throw ValidationError("train: steps must be positive");
    if (batch_size == 0) throw ValidationError("train: batch size must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("train: learning rate must be positive");
    if (!(lambda >= 0.0)) throw ValidationError("train: lambda must be nonnegative");
    if (!(l1 >= 0.0)) throw ValidationError("train: l1 weight must be nonnegative");
    if (!(noise_scale >= 0.0)) throw ValidationError("train: noise scale must be nonnegative");
}

double batch_objective(const SaeParams& p, const std::vector<Vector>& batch, const dgp::ConceptBasis& basis,
                       double lambda, double l1, Gradients* grad) {
    if (batch.empty()) throw ValidationError("batch_objective: empty batch");
    if (grad != nullptr) {
        grad->w_enc = Matrix(p.m, p.d, 0.0);
        grad->w_dec = Matrix(p.m, p.d, 0.0);
        grad->b_enc.assign(p.m, 0.0);
        grad->b_dec.assign(p.d, 0.0);
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    Vector pre;
    Vector z;
    Vector x_hat;
    Vector g_out(p.d);
    double total = 0.0;
    for (const auto& x : batch) {
        forward_into(p, x, pre, z, x_hat);
        double sq = 0.0;
        for (std::size_t k = 0; k < p.d; ++k) {
            const double r = x_hat[k] - x[k];
            sq += r * r;
            g_out[k] = 2.0 * r * inv_b;
        }
        double z_l1 = 0.0;
        for (double v : z) z_l1 += std::abs(v);
        total += (sq + l1 * z_l1) * inv_b;
        if (grad == nullptr) continue;
        for (std::size_t k = 0; k < p.d; ++k) grad->b_dec[k] += g_out[k];
        for (std::size_t i = 0; i < p.m; ++i) {
            if (z[i] == 0.0) continue;
            // Selected latents: z_i = pre_i, so the straight-through derivative is 1.
            auto gd = grad->w_dec.row(i);
            for (std::size_t k = 0; k < p.d; ++k) gd[k] += z[i] * g_out[k];
            const double dpre = dot(p.w_dec.row(i), g_out) + l1 * inv_b;
            auto ge = grad->w_enc.row(i);
            for (std::size_t k = 0; k < p.d; ++k) ge[k] += dpre * x[k];
            grad->b_enc[i] += dpre;
        }
    }
    if (lambda > 0.0) {
        total += lambda * poly::joint_polysemanticity(p, basis);
        if (grad != nullptr) {
            const Matrix ge = poly::poly_subgradient(p.w_enc, basis);
            const Matrix gd = poly::poly_subgradient(p.w_dec, basis);
            for (std::size_t i = 0; i < ge.data.size(); ++i) {
                grad->w_enc.data[i] += lambda * ge.data[i];
                grad->w_dec.data[i] += lambda * gd.data[i];
            }
        }
    }
    return total;
}

Vector pack(const SaeParams& p) {
    Vector flat;
    flat.reserve(2 * p.m * p.d + p.m + p.d);
    flat.insert(flat.end(), p.w_enc.data.begin(), p.w_enc.data.end());
    flat.insert(flat.end(), p.w_dec.data.begin(), p.w_dec.data.end());
    flat.insert(flat.end(), p.b_enc.begin(), p.b_enc.end());
    flat.insert(flat.end(), p.b_dec.begin(), p.b_dec.end());
    return flat;
}

void unpack(std::span<const double> flat, SaeParams& p) {
    const std::size_t md = p.m * p.d;
    if (flat.size() != 2 * md + p.m + p.d) throw ValidationError("unpack: flat parameter length mismatch");
    auto it = flat.begin();
    std::copy(it, it + static_cast<std::ptrdiff_t>(md), p.w_enc.data.begin());
    it += static_cast<std::ptrdiff_t>(md);
    std::copy(it, it + static_cast<std::ptrdiff_t>(md), p.w_dec.data.begin());
    it += static_cast<std::ptrdiff_t>(md);
    std::copy(it, it + static_cast<std::ptrdiff_t>(p.m), p.b_enc.begin());
    it += static_cast<std::ptrdiff_t>(p.m);
    std::copy(it, it + static_cast<std::ptrdiff_t>(p.d), p.b_dec.begin());
}

Vector pack(const Gradients& g) {
    Vector flat;
    flat.insert(flat.end(), g.w_enc.data.begin(), g.w_enc.data.end());
    flat.insert(flat.end(), g.w_dec.data.begin(), g.w_dec.data.end());
    flat.insert(flat.end(), g.b_enc.begin(), g.b_enc.end());
    flat.insert(flat.end(), g.b_dec.begin(), g.b_dec.end());
    return flat;
}

Measurement measure_map(const ReconstructionMap& map, const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis,
                        const MeasureSpec& spec) {
    if (static_cast<std::size_t>(pmf.size()) != basis.size()) {
        throw ValidationError("measure: pmf.n does not match basis.n");
    }
    Measurement out;
    if (spec.mode == MeasureMode::exact) {
        for (const auto& e : dgp::enumerate_events(pmf, spec.enumeration_cap)) {
            if (e.p == 0.0) continue;
            const Vector x = basis.synthesize(e.set);
            const MapOutput y = map(x);
            out.rate += e.p * static_cast<double>(y.active);
            out.distortion += e.p * squared_distance(x, y.x_hat);
            out.l1 += e.p * y.l1;
        }
        return out;
    }
    if (spec.samples < 2) throw ValidationError("measure: Monte Carlo needs at least 2 samples");
    Rng rng(spec.seed);
    double r_sum = 0.0, r_sq = 0.0, d_sum = 0.0, d_sq = 0.0, l1_sum = 0.0;
    for (std::size_t s = 0; s < spec.samples; ++s) {
        const Vector x = basis.synthesize(dgp::sample_set(pmf, rng));
        const MapOutput y = map(x);
        const double r = static_cast<double>(y.active);
        const double dist = squared_distance(x, y.x_hat);
        r_sum += r;
        r_sq += r * r;
        d_sum += dist;
        d_sq += dist * dist;
        l1_sum += y.l1;
    }
    const double n = static_cast<double>(spec.samples);
    const auto stderr_of = [n](double sum, double sq) {
        const double mean = sum / n;
        const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
        return std::sqrt(var / n);
    };
    out.rate = r_sum / n;
    out.distortion = d_sum / n;
    out.l1 = l1_sum / n;
    out.rate_stderr = stderr_of(r_sum, r_sq);
    out.distortion_stderr = stderr_of(d_sum, d_sq);
    return out;
}

Measurement measure(const SaeParams& params, const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis,
                    const MeasureSpec& spec) {
    if (params.d != basis.dim()) throw ValidationError("measure: SAE dimension does not match basis");
    Vector pre;
    Vector z;
    Vector x_hat;
    return measure_map(
        [&](std::span<const double> x) {
            forward_into(params, x, pre, z, x_hat);
            double l1 = 0.0;
            for (double v : z) l1 += std::abs(v);
            return MapOutput{active_count(z), l1, x_hat};
        },
        pmf, basis, spec);
}

double rate(const SaeParams& params, const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis,
            const MeasureSpec& spec) {
    return measure(params, pmf, basis, spec).rate;
}

double distortion(const SaeParams& params, const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis,
                  const MeasureSpec& spec) {
    return measure(params, pmf, basis, spec).distortion;
}

TrainResult train(const dgp::ConceptPmf& pmf, const dgp::ConceptBasis& basis, const TrainConfig& cfg) {
    cfg.validate();
    if (static_cast<std::size_t>(pmf.size()) != basis.size()) throw ValidationError("train: pmf.n does not match basis.n");

    TrainResult result;
    SaeParams& p = result.params;
    p = init(cfg.width, basis.dim(), cfg.activation, cfg.init, cfg.noise_scale, &basis, derive_seed(cfg.seed, 0),
             cfg.tied);

    const MeasureSpec trace_spec = pmf.enumerable(kTraceExactCap)
                                       ? MeasureSpec::exact()
                                       : MeasureSpec::monte_carlo(kTraceSamples, derive_seed(cfg.seed, 2));
    const auto record = [&](std::size_t step) {
        const Measurement mm = measure(p, pmf, basis, trace_spec);
        const double pj = poly::joint_polysemanticity(p, basis);
        result.trace.push_back({step, mm.distortion, mm.rate, pj, mm.distortion + cfg.l1 * mm.l1 + cfg.lambda * pj});
    };

    Adam adam_enc(p.m * p.d), adam_dec(p.m * p.d), adam_benc(p.m), adam_bdec(p.d);
    Rng data_rng(derive_seed(cfg.seed, 1));
    std::vector<Vector> batch(cfg.batch_size);
    Gradients grad;
    const std::size_t interval = cfg.checkpoints == 0 ? 0 : std::max<std::size_t>(1, cfg.steps / cfg.checkpoints);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        if (interval != 0 && step % interval == 0) record(step);
        for (auto& x : batch) x = basis.synthesize(dgp::sample_set(pmf, data_rng));
        const double loss = batch_objective(p, batch, basis, cfg.lambda, cfg.l1, &grad);
        if (!std::isfinite(loss)) {
            throw RuntimeFailure("train: loss became non-finite at step " + std::to_string(step));
        }
        if (cfg.tied) {
            for (std::size_t i = 0; i < grad.w_dec.data.size(); ++i) grad.w_dec.data[i] += grad.w_enc.data[i];
            adam_dec.step(p.w_dec.data, grad.w_dec.data, cfg.learning_rate);
            p.w_enc = p.w_dec;
        } else {
            adam_enc.step(p.w_enc.data, grad.w_enc.data, cfg.learning_rate);
            adam_dec.step(p.w_dec.data, grad.w_dec.data, cfg.learning_rate);
            if (cfg.train_biases) {
                adam_benc.step(p.b_enc, grad.b_enc, cfg.learning_rate);
                adam_bdec.step(p.b_dec, grad.b_dec, cfg.learning_rate);
            }
        }
    }
    for (double v : p.w_dec.data) {
        if (!std::isfinite(v)) throw RuntimeFailure("train: parameters became non-finite");
    }
    record(cfg.steps);
    if (!std::isfinite(result.trace.back().loss)) throw RuntimeFailure("train: final loss is non-finite");
    return result;
}

}  // namespace rdp::sae
