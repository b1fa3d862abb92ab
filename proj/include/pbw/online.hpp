#pragma once

// Per-example constrained descent: each incoming example is handled by a few
// optimizer steps on loss + log-barrier(distance to the previous hypothesis
// minus the radius). The barrier extension is total, convex, and C^1 at the
// branch junction, so the constraint is soft by at most ~1/t in practice.
// OGD is the same loop with one step and no barrier.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "bounds.hpp"
#include "cocob.hpp"
#include "loss.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace pbw {

/// Log-barrier extension with slope parameter t: -(1/t) ln(-a) on
/// a <= -1/t^2, and the tangent line t*a - (1/t) ln(1/t^2) + 1/t beyond.
/// Total, convex, non-decreasing, differentiable at the junction.
inline double log_barrier(double a, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("log_barrier: t must be positive");
    if (a <= -1.0 / (t * t)) return -std::log(-a) / t;
    return t * a - std::log(1.0 / (t * t)) / t + 1.0 / t;
}

inline double log_barrier_derivative(double a, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("log_barrier: t must be positive");
    if (a <= -1.0 / (t * t)) return -1.0 / (t * a);
    return t;
}

struct OnlineConfig {
    std::size_t inner_steps = 10;  // optimizer steps per incoming example
    double barrier_t = 100.0;
    double radius = 1.0;
    bool barrier_enabled = true;
    bool include_plain_distance = false;  // adds ||w - w_prev|| to the objective
    bool reset_optimizer_per_example = true;
    LossConfig loss;
    double cocob_alpha = 10000.0;
    std::size_t eval_subsample = 2000;
    std::uint64_t seed = 0;

    void validate() const {
        if (inner_steps < 1) throw std::invalid_argument("online: inner_steps must be >= 1");
        if (!(barrier_t > 0.0)) throw std::invalid_argument("online: barrier_t must be positive");
        if (!(radius > 0.0)) throw std::invalid_argument("online: radius must be positive");
        loss.validate();
    }
};

/// Runs cfg.inner_steps optimizer steps from w_prev on
/// value_grad(w, grad) + barrier(||w - w_prev|| - radius) and returns the
/// final iterate. value_grad must ADD its gradient into `grad`, which
/// arrives zeroed. If `state` is given the optimizer continues from it
/// (its current point must be w_prev); otherwise a fresh state anchored at
/// w_prev is used.
template <class ValueGrad>
ParamVector constrained_descent(const ParamVector& w_prev, ValueGrad&& value_grad,
                                const OnlineConfig& cfg, CocobState* state = nullptr) {
    cfg.validate();
    CocobState local;
    if (!state) {
        local = cocob_init(w_prev, cfg.cocob_alpha);
        state = &local;
    }
    ParamVector grad(w_prev.size());
    for (std::size_t step = 0; step < cfg.inner_steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        value_grad(state->w, grad);
        const double dist = param_distance(state->w, w_prev);
        if (dist > 0.0) {
            double slope = 0.0;
            if (cfg.barrier_enabled)
                slope += log_barrier_derivative(dist - cfg.radius, cfg.barrier_t);
            if (cfg.include_plain_distance) slope += 1.0;
            if (slope != 0.0) {
                const double scale = slope / dist;
                for (std::size_t j = 0; j < grad.size(); ++j)
                    grad[j] += scale * (state->w[j] - w_prev[j]);
            }
        }
        cocob_step(*state, grad);
    }
    return state->w;
}

/// One online update: descend on the margin loss of the incoming example
/// plus the barrier around w_prev.
inline Hypothesis online_step(const Hypothesis& w_prev, std::span<const double> x, std::size_t y,
                              const OnlineConfig& cfg, CocobState* state = nullptr) {
    const std::int32_t label = static_cast<std::int32_t>(y);
    DataView view{x, std::span<const std::int32_t>(&label, 1), x.size()};
    const std::size_t index = 0;
    ParamVector scratch;
    auto vg = [&](const ParamVector& w, ParamVector& grad) {
        Hypothesis h{w_prev.spec, w};
        const double v =
            mean_margin_loss_grad(h, view, std::span<const std::size_t>(&index, 1), cfg.loss, scratch);
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += scratch[j];
        return v;
    };
    return Hypothesis{w_prev.spec, constrained_descent(w_prev.params, vg, cfg, state)};
}

struct OnlineTrace {
    Hypothesis initial;                  // w_0, the data-free starting point
    std::vector<Hypothesis> hypotheses;  // w_1..w_m, one per example
    std::vector<double> pre_surrogate;   // margin loss of w_{i-1} on z_i (prediction loss)
    std::vector<double> pre_zero_one;    // 0/1 loss of w_{i-1} on z_i
    std::vector<double> post_surrogate;  // margin loss of w_i on z_i, diagnostic
    std::vector<double> step_distance;   // ||w_i - w_{i-1}||
    std::vector<double> eval_risk;       // post-update 0/1 risk estimate per step
    double path_length = 0.0;            // sum of step distances
    double cum_train_loss = 0.0;         // sum of pre_zero_one
    double cum_eval_loss = 0.0;          // sum of eval_risk

    std::size_t steps() const { return hypotheses.size(); }
    double train_avg() const { return steps() ? cum_train_loss / static_cast<double>(steps()) : 0.0; }
    double eval_avg() const { return steps() ? cum_eval_loss / static_cast<double>(steps()) : 0.0; }
};

/// Sequential pass over the stream: prediction losses are recorded with the
/// previous hypothesis before the update (predict-then-update), the
/// per-step population estimate is the 0/1 risk of the post-update
/// hypothesis on a fixed seeded eval subsample, exact on the full eval set
/// at the final step. Pass an empty eval view to skip population estimates.
inline OnlineTrace online_train(const DataView& stream, const DataView& eval_data,
                                const ModelSpec& spec, const OnlineConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (stream.size() == 0) throw std::invalid_argument("online: empty stream");

    OnlineTrace trace;
    trace.initial = {spec, init_weights(spec, derive_seed(cfg.seed, "online-init"))};

    // Fixed eval subsample reused at every step.
    std::vector<std::size_t> eval_sub;
    if (eval_data.size() > 0) {
        if (eval_data.size() <= cfg.eval_subsample) {
            eval_sub = all_indices(eval_data.size());
        } else {
            Rng rng(derive_seed(cfg.seed, "online-eval-subsample"));
            auto perm = shuffled_indices(eval_data.size(), rng);
            eval_sub.assign(perm.begin(),
                            perm.begin() + static_cast<std::ptrdiff_t>(cfg.eval_subsample));
        }
    }

    const std::size_t m = stream.size();
    Hypothesis prev = trace.initial;
    CocobState persistent;
    if (!cfg.reset_optimizer_per_example)
        persistent = cocob_init(prev.params, cfg.cocob_alpha);

    for (std::size_t i = 0; i < m; ++i) {
        const auto x = stream.row(i);
        const auto y = static_cast<std::size_t>(stream.labels[i]);
        const auto scores = forward(prev, x);
        trace.pre_surrogate.push_back(margin_loss(scores, y, cfg.loss));
        trace.pre_zero_one.push_back(zero_one_loss(scores, y));
        trace.cum_train_loss += trace.pre_zero_one.back();

        Hypothesis next =
            online_step(prev, x, y, cfg, cfg.reset_optimizer_per_example ? nullptr : &persistent);
        trace.step_distance.push_back(param_distance(next, prev));
        trace.path_length += trace.step_distance.back();
        trace.post_surrogate.push_back(margin_loss(forward(next, x), y, cfg.loss));

        if (!eval_sub.empty()) {
            const bool final_step = i + 1 == m;
            const double risk =
                final_step ? zero_one_risk(next, eval_data, all_indices(eval_data.size()))
                           : zero_one_risk(next, eval_data, eval_sub);
            trace.eval_risk.push_back(risk);
            trace.cum_eval_loss += risk;
        }
        trace.hypotheses.push_back(next);
        prev = std::move(next);
    }
    return trace;
}

/// OGD baseline: the same loop with a single step and no regularisation.
inline OnlineTrace ogd_train(const DataView& stream, const DataView& eval_data,
                             const ModelSpec& spec, const OnlineConfig& cfg) {
    OnlineConfig ogd = cfg;
    ogd.inner_steps = 1;
    ogd.barrier_enabled = false;
    ogd.include_plain_distance = false;
    return online_train(stream, eval_data, spec, ogd);
}

/// Tab-separated trace export: one row per step with the prediction losses,
/// the step distance, and the running cumulative losses.
inline void write_trace(const OnlineTrace& trace, std::ostream& os) {
    os << "step\tsurrogate\tzero_one\tstep_distance\tcum_train\tcum_eval\n";
    os.precision(17);
    double cum_train = 0.0, cum_eval = 0.0;
    for (std::size_t i = 0; i < trace.steps(); ++i) {
        cum_train += trace.pre_zero_one[i];
        if (i < trace.eval_risk.size()) cum_eval += trace.eval_risk[i];
        os << (i + 1) << '\t' << trace.pre_surrogate[i] << '\t' << trace.pre_zero_one[i] << '\t'
           << trace.step_distance[i] << '\t' << cum_train << '\t' << cum_eval << '\n';
    }
}

/// Reads back the step-distance column of an exported trace; enough to
/// rebuild the path-driven certificate.
inline std::vector<double> read_trace_distances(std::istream& is) {
    std::string header;
    std::getline(is, header);
    std::vector<double> distances;
    std::size_t step;
    double surrogate, zero_one, dist, cum_train, cum_eval;
    while (is >> step >> surrogate >> zero_one >> dist >> cum_train >> cum_eval)
        distances.push_back(dist);
    return distances;
}

/// Certificate from a trace under the Dirac chain of priors: the
/// Wasserstein entries are exactly the recorded step distances.
inline BoundCertificate certificate_from_trace(const OnlineTrace& trace, double lipschitz,
                                               LipschitzProvenance prov, double delta) {
    return bound_online_nonneg(trace.step_distance, lipschitz, prov, trace.steps(), delta);
}

/// Plug-in conditional variance pairs for the heavy-tailed online bound:
/// per step, the conditional mean of the loss of w_i is estimated on the
/// eval data, the empirical term is the squared deviation at the incoming
/// example, the population term the eval mean of squared deviations.
inline std::vector<VariancePair> estimate_online_variances(const OnlineTrace& trace,
                                                           const DataView& stream,
                                                           const DataView& eval_data,
                                                           const LossConfig& cfg) {
    if (eval_data.size() == 0) throw std::invalid_argument("variance: empty evaluation data");
    const auto eval_idx = all_indices(eval_data.size());
    std::vector<VariancePair> out;
    for (std::size_t i = 0; i < trace.steps(); ++i) {
        const auto& h = trace.hypotheses[i];
        const double mean = mean_margin_loss(h, eval_data, eval_idx, cfg);
        const double here = margin_loss(forward(h, stream.row(i)),
                                        static_cast<std::size_t>(stream.labels[i]), cfg);
        VariancePair vp;
        vp.empirical = (here - mean) * (here - mean);
        double acc = 0.0;
        for (std::size_t j = 0; j < eval_data.size(); ++j) {
            const double l = margin_loss(forward(h, eval_data.row(j)),
                                         static_cast<std::size_t>(eval_data.labels[j]), cfg);
            acc += (l - mean) * (l - mean);
        }
        vp.population = acc / static_cast<double>(eval_data.size());
        out.push_back(vp);
    }
    return out;
}

}  // namespace pbw
