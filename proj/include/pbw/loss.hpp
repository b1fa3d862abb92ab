#pragma once

// Multi-margin surrogate loss, 0/1 classification loss, and hand-derived
// gradients through both architectures. Subgradient conventions at kinks are
// fixed: a hinge argument of exactly 0 contributes nothing, a pre-activation
// of exactly 0 takes the leak slope.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "model.hpp"

namespace pbw {

enum class Normalization { OverClasses, OverClassesMinusOne };

struct LossConfig {
    double eta = 1.0;
    Normalization normalization = Normalization::OverClasses;

    void validate() const {
        if (!(eta > 0.0)) throw std::invalid_argument("loss: eta must be positive");
    }
    double norm_count(std::size_t num_classes) const {
        return normalization == Normalization::OverClasses ? static_cast<double>(num_classes)
                                                           : static_cast<double>(num_classes - 1);
    }
};

/// Row-major view over a labelled feature matrix. Trainers and estimators
/// work on views so they stay independent of how the data was loaded.
struct DataView {
    std::span<const double> features;  // size() * dim, row-major
    std::span<const std::int32_t> labels;
    std::size_t dim = 0;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return features.subspan(i * dim, dim); }
};

inline void check_label(std::size_t y, std::size_t num_classes) {
    if (y >= num_classes) throw std::invalid_argument("loss: label out of range");
}

/// (1/N) sum_{y' != y} max(0, 1 - eta*(s[y] - s[y'])) with N = |Y| or |Y|-1.
inline double margin_loss(std::span<const double> scores, std::size_t y, const LossConfig& cfg) {
    cfg.validate();
    check_label(y, scores.size());
    const double inv_n = 1.0 / cfg.norm_count(scores.size());
    double loss = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j == y) continue;
        const double arg = 1.0 - cfg.eta * (scores[y] - scores[j]);
        if (arg > 0.0) loss += arg;
    }
    return loss * inv_n;
}

/// 1[s[y] - max_{y' != y} s[y'] <= 0]; ties count as errors.
inline double zero_one_loss(std::span<const double> scores, std::size_t y) {
    check_label(y, scores.size());
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < scores.size(); ++j)
        if (j != y) best_other = std::max(best_other, scores[j]);
    return scores[y] - best_other <= 0.0 ? 1.0 : 0.0;
}

namespace detail {

// C (m x n) += A (m x k) * B^T where B is n x k. B is transposed into a
// scratch buffer so the inner loop is an elementwise axpy over contiguous
// memory; no reduction is reassociated, so results match the scalar order.
inline void gemm_abt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                     std::size_t k) {
    std::vector<double> bt(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t t = 0; t < k; ++t) bt[t * n + j] = b[j * k + t];
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            const double* btt = bt.data() + t * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * btt[j];
        }
    }
}

// C (m x n) += A (m x k) * B (k x n); ikj order keeps the inner loop contiguous.
inline void gemm_ab(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                    std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            const double* bt = b + t * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

// C (m x n) += A^T * B where A is k x m and B is k x n.
inline void gemm_atb(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                     std::size_t k) {
    for (std::size_t t = 0; t < k; ++t) {
        const double* at = a + t * m;
        const double* bt = b + t * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = at[i];
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

struct LayerDims {
    std::size_t in, out, w_off, b_off;
};

inline std::vector<LayerDims> layer_dims(const ModelSpec& spec) {
    std::vector<LayerDims> dims;
    for_each_layer(spec, [&](std::size_t in, std::size_t out, std::size_t w_off,
                             std::size_t b_off) { dims.push_back({in, out, w_off, b_off}); });
    return dims;
}

// Margin-loss value and score gradient for one row of a batch.
inline double score_grad_row(const double* scores, std::size_t y, std::size_t classes,
                             const LossConfig& cfg, double* ds) {
    const double inv_n = 1.0 / cfg.norm_count(classes);
    double loss = 0.0;
    for (std::size_t j = 0; j < classes; ++j) ds[j] = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
        if (j == y) continue;
        const double arg = 1.0 - cfg.eta * (scores[y] - scores[j]);
        if (arg > 0.0) {
            loss += arg;
            ds[j] += cfg.eta * inv_n;
            ds[y] -= cfg.eta * inv_n;
        }
    }
    return loss * inv_n;
}

}  // namespace detail

/// Mean margin loss over the indexed examples and its gradient with respect
/// to the flat parameter vector. grad_out is resized and overwritten.
/// Returns the mean loss; with an empty index set both are zero.
inline double mean_margin_loss_grad(const Hypothesis& h, const DataView& data,
                                    std::span<const std::size_t> indices, const LossConfig& cfg,
                                    ParamVector& grad_out) {
    cfg.validate();
    h.validate();
    if (data.dim != h.spec.input_dim) throw std::invalid_argument("loss: data/model dim mismatch");
    const std::size_t batch = indices.size();
    grad_out.assign(h.spec.param_count(), 0.0);
    if (batch == 0) return 0.0;

    const auto dims = detail::layer_dims(h.spec);
    const std::size_t layers = dims.size();
    const std::size_t classes = h.spec.num_classes;

    // Gather the batch and run the forward pass, keeping pre-activations.
    std::vector<std::vector<double>> acts(layers + 1);
    acts[0].resize(batch * data.dim);
    for (std::size_t r = 0; r < batch; ++r) {
        check_label(static_cast<std::size_t>(data.labels[indices[r]]), classes);
        auto row = data.row(indices[r]);
        std::copy(row.begin(), row.end(), acts[0].begin() + r * data.dim);
    }
    std::vector<std::vector<double>> pres(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const auto& dm = dims[l];
        pres[l].resize(batch * dm.out);
        for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t j = 0; j < dm.out; ++j) pres[l][r * dm.out + j] = h.params[dm.b_off + j];
        detail::gemm_abt(acts[l].data(), h.params.data() + dm.w_off, pres[l].data(), batch, dm.out,
                         dm.in);
        acts[l + 1] = pres[l];
        if (l + 1 < layers)
            for (double& v : acts[l + 1]) v = leaky_relu(v, h.spec.leak);
    }

    // Loss values and score gradients.
    const auto& scores = acts[layers];
    std::vector<double> dact(batch * classes);
    double total = 0.0;
    for (std::size_t r = 0; r < batch; ++r)
        total += detail::score_grad_row(scores.data() + r * classes,
                                        static_cast<std::size_t>(data.labels[indices[r]]), classes,
                                        cfg, dact.data() + r * classes);

    // Backward pass; accumulates sums, scaled to means at the end.
    std::vector<double> dprev;
    for (std::size_t l = layers; l-- > 0;) {
        const auto& dm = dims[l];
        if (l + 1 < layers)  // activation derivative, output layer is affine
            for (std::size_t i = 0; i < dact.size(); ++i)
                dact[i] *= leaky_relu_slope(pres[l][i], h.spec.leak);
        detail::gemm_atb(dact.data(), acts[l].data(), grad_out.data() + dm.w_off, dm.out, dm.in,
                         batch);
        for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t j = 0; j < dm.out; ++j) grad_out[dm.b_off + j] += dact[r * dm.out + j];
        if (l > 0) {
            dprev.assign(batch * dm.in, 0.0);
            detail::gemm_ab(dact.data(), h.params.data() + dm.w_off, dprev.data(), batch, dm.in,
                            dm.out);
            dact.swap(dprev);
        }
    }

    const double inv_b = 1.0 / static_cast<double>(batch);
    for (double& g : grad_out) g *= inv_b;
    return total * inv_b;
}

struct LossGrad {
    double value = 0.0;
    ParamVector grad;
};

/// Single-example value and parameter gradient; the batched kernel with a
/// one-element batch.
inline LossGrad loss_value_grad(const Hypothesis& h, std::span<const double> x, std::size_t y,
                                const LossConfig& cfg) {
    if (x.size() != h.spec.input_dim) throw std::invalid_argument("loss: input dimension mismatch");
    const std::int32_t label = static_cast<std::int32_t>(y);
    DataView view{x, std::span<const std::int32_t>(&label, 1), x.size()};
    const std::size_t index = 0;
    LossGrad out;
    out.value = mean_margin_loss_grad(h, view, std::span<const std::size_t>(&index, 1), cfg, out.grad);
    return out;
}

/// Mean margin loss only (no gradient).
inline double mean_margin_loss(const Hypothesis& h, const DataView& data,
                               std::span<const std::size_t> indices, const LossConfig& cfg) {
    double total = 0.0;
    for (std::size_t i : indices) {
        auto s = forward(h, data.row(i));
        total += margin_loss(s, static_cast<std::size_t>(data.labels[i]), cfg);
    }
    return indices.empty() ? 0.0 : total / static_cast<double>(indices.size());
}

/// Mean 0/1 loss over the indexed examples.
inline double zero_one_risk(const Hypothesis& h, const DataView& data,
                            std::span<const std::size_t> indices) {
    double total = 0.0;
    for (std::size_t i : indices) {
        auto s = forward(h, data.row(i));
        total += zero_one_loss(s, static_cast<std::size_t>(data.labels[i]));
    }
    return indices.empty() ? 0.0 : total / static_cast<double>(indices.size());
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

// --------------------------------------------------------------------------
// Lipschitz constants of the loss in the parameters.
// --------------------------------------------------------------------------

enum class LipschitzMode {
    LemmaLinear,    // proved 2*eta for linear models on the unit ball
    Sqrt2Linear,    // sqrt(2)*eta, the smaller unproved constant; opt-in
    Empirical,      // max sampled difference quotient; a lower estimate
};

/// One sampled difference quotient instance for the empirical estimate.
struct LipschitzSample {
    Hypothesis first;
    Hypothesis second;
    std::vector<double> x;
    std::size_t y = 0;
};

/// Max difference quotient |l(w,z) - l(w',z)| / ||w - w'|| over the given
/// samples. Coincident pairs carry no slope information and are skipped;
/// if nothing remains the call is rejected. The result is an estimate from
/// below, not a proof; certificate provenance must record it as such.
inline double empirical_lipschitz(const LossConfig& cfg, std::span<const LipschitzSample> samples) {
    cfg.validate();
    double best = 0.0;
    bool any = false;
    for (const auto& s : samples) {
        const double dist = param_distance(s.first.params, s.second.params);
        if (dist == 0.0) continue;
        const double la = margin_loss(forward(s.first, s.x), s.y, cfg);
        const double lb = margin_loss(forward(s.second, s.x), s.y, cfg);
        best = std::max(best, std::abs(la - lb) / dist);
        any = true;
    }
    if (!any) throw std::runtime_error("lipschitz: every sampled pair was coincident");
    return best;
}

/// Proved or estimated Lipschitz constant of the loss w.r.t. the flat
/// parameters. LemmaLinear/Sqrt2Linear are only valid for linear specs with
/// inputs in the unit ball. The empirical mode draws sample_pairs random
/// hypothesis pairs and unit-ball examples and delegates to
/// empirical_lipschitz above.
inline double lipschitz_constant(const ModelSpec& spec, const LossConfig& cfg, LipschitzMode mode,
                                 std::size_t sample_pairs = 0, std::uint64_t seed = 0) {
    spec.validate();
    cfg.validate();
    if (mode == LipschitzMode::LemmaLinear || mode == LipschitzMode::Sqrt2Linear) {
        if (spec.kind != ModelKind::Linear)
            throw std::invalid_argument("lipschitz: lemma constants only hold for linear models");
        return mode == LipschitzMode::LemmaLinear ? 2.0 * cfg.eta : std::sqrt(2.0) * cfg.eta;
    }
    if (sample_pairs == 0) throw std::invalid_argument("lipschitz: empirical mode needs samples");
    Rng rng(derive_seed(seed, "lipschitz-empirical"));
    const std::size_t dim = spec.param_count();
    std::vector<LipschitzSample> samples(sample_pairs);
    for (auto& s : samples) {
        s.first = Hypothesis{spec, ParamVector(dim)};
        s.second = Hypothesis{spec, ParamVector(dim)};
        for (std::size_t i = 0; i < dim; ++i) s.first.params[i] = rng.next_gaussian();
        for (std::size_t i = 0; i < dim; ++i) s.second.params[i] = rng.next_gaussian();
        s.x.resize(spec.input_dim);
        double nx = 0.0;
        for (double& v : s.x) {
            v = rng.next_gaussian();
            nx += v * v;
        }
        nx = std::sqrt(nx);
        if (nx > 1.0)
            for (double& v : s.x) v /= nx;
        s.y = static_cast<std::size_t>(rng.next_below(spec.num_classes));
    }
    return empirical_lipschitz(cfg, samples);
}

}  // namespace pbw
