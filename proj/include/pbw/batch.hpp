#pragma once

// The two-phase batch algorithm: K priors trained by mini-batch descent with
// each prior blind to its own partition set, then a posterior trained on the
// full sample with the weighted distance-to-priors regulariser. ERM and
// weight-decay baselines run the same loop with a different penalty, so the
// zero-penalty degeneracies hold bitwise.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cocob.hpp"
#include "loss.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace pbw {

struct Partition {
    std::vector<std::vector<std::size_t>> sets;  // disjoint index lists covering 0..m-1
    std::size_t m = 0;

    std::size_t k() const { return sets.size(); }

    void validate() const {
        std::vector<char> seen(m, 0);
        std::size_t total = 0;
        for (const auto& set : sets) {
            for (std::size_t idx : set) {
                if (idx >= m || seen[idx]) throw std::invalid_argument("partition: not disjoint");
                seen[idx] = 1;
                ++total;
            }
        }
        if (total != m) throw std::invalid_argument("partition: does not cover the sample");
        std::size_t lo = m, hi = 0;
        for (const auto& set : sets) {
            lo = std::min(lo, set.size());
            hi = std::max(hi, set.size());
        }
        if (hi - lo > 1) throw std::invalid_argument("partition: sizes differ by more than 1");
    }
};

/// Uniformly random balanced partition of 0..m-1 into K sets, deterministic
/// in the seed. Sizes differ by at most one.
inline Partition make_partition(std::size_t m, std::size_t K, std::uint64_t seed) {
    if (K < 1 || K > m) throw std::invalid_argument("partition: need 1 <= K <= m");
    Rng rng(derive_seed(seed, "partition"));
    auto perm = shuffled_indices(m, rng);
    Partition p;
    p.m = m;
    p.sets.resize(K);
    for (std::size_t i = 0; i < m; ++i) p.sets[i % K].push_back(perm[i]);
    p.validate();
    return p;
}

struct PriorSet {
    std::vector<Hypothesis> priors;
    Partition partition;
    std::vector<std::string> provenance;  // per prior: which set it never saw
    std::size_t skipped_steps = 0;        // empty effective mini-batches, logged not fatal
};

enum class EpsilonRule { InvM, InvSqrtM, Fixed };

struct BatchConfig {
    EpsilonRule epsilon_rule = EpsilonRule::InvSqrtM;
    double epsilon_value = 0.0;  // used when epsilon_rule == Fixed
    double k_alpha = 0.2;        // K = max(1, round(k_alpha * sqrt(m)))
    std::size_t batch_size = 100;
    std::size_t min_iterations = 20000;
    LossConfig loss;
    double cocob_alpha = 10000.0;
    bool final_iterate = false;  // return the last iterate instead of the best-objective one
    std::size_t prior_workers = 0;  // 0 = auto: threads for large models, serial otherwise
    std::uint64_t seed = 0;

    double epsilon_for(std::size_t m) const {
        switch (epsilon_rule) {
            case EpsilonRule::InvM: return 1.0 / static_cast<double>(m);
            case EpsilonRule::InvSqrtM: return 1.0 / std::sqrt(static_cast<double>(m));
            case EpsilonRule::Fixed: return epsilon_value;
        }
        return epsilon_value;
    }

    std::size_t k_for(std::size_t m) const {
        const double k = std::round(k_alpha * std::sqrt(static_cast<double>(m)));
        return static_cast<std::size_t>(std::max(1.0, k));
    }

    std::size_t batches_per_epoch(std::size_t m) const {
        return (m + batch_size - 1) / batch_size;
    }

    std::size_t epochs_for(std::size_t m) const {
        const std::size_t per = batches_per_epoch(m);
        return (min_iterations + per - 1) / per;
    }

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("batch: batch_size must be >= 1");
        if (min_iterations < 1) throw std::invalid_argument("batch: min_iterations must be >= 1");
        if (epsilon_rule == EpsilonRule::Fixed && epsilon_value < 0.0)
            throw std::invalid_argument("batch: epsilon must be non-negative");
        loss.validate();
    }
};

namespace detail {

inline void check_unit_ball(const DataView& data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        double s = 0.0;
        for (double v : data.row(i)) s += v * v;
        if (std::sqrt(s) > 1.0 + 1e-12)
            throw std::invalid_argument("train: feature rows must lie in the unit ball; "
                                        "run the normalisation step first");
    }
}

}  // namespace detail

/// Priors Learning: every mini-batch step updates each prior with the
/// gradient over the mini-batch minus that prior's own set, so prior i is a
/// function of the data outside S_i only. With K=1 every effective
/// mini-batch is empty and the prior remains its data-free initialization.
inline PriorSet train_priors(const DataView& data, const Partition& partition,
                             const ModelSpec& spec, const BatchConfig& cfg) {
    cfg.validate();
    spec.validate();
    partition.validate();
    if (partition.m != data.size())
        throw std::invalid_argument("train_priors: partition does not match the data size");
    detail::check_unit_ball(data);

    const std::size_t m = data.size();
    const std::size_t K = partition.k();
    std::vector<std::size_t> set_of(m);
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t idx : partition.sets[i]) set_of[idx] = i;

    PriorSet out;
    out.partition = partition;
    std::vector<CocobState> states;
    for (std::size_t i = 0; i < K; ++i) {
        out.priors.push_back({spec, init_weights(spec, derive_seed(cfg.seed, "prior-init", i))});
        states.push_back(cocob_init(out.priors[i].params, cfg.cocob_alpha));
        out.provenance.push_back("trained excluding set " + std::to_string(i));
    }

    Rng shuffle_rng(derive_seed(cfg.seed, "priors-shuffle"));
    const std::size_t epochs = cfg.epochs_for(m);

    // Each prior owns its state and reads shared data, so the K updates of
    // one mini-batch are order-independent; they are forked across threads
    // when the model is large enough for that to pay. Results are identical
    // either way.
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    std::size_t workers = cfg.prior_workers;
    if (workers == 0) workers = (spec.param_count() >= 50000 && K >= 2) ? hw : 1;
    workers = std::min(workers, K);

    std::vector<std::size_t> skipped(K, 0);
    std::vector<ParamVector> grads(K);
    std::vector<std::vector<std::size_t>> effective(K);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        auto order = shuffled_indices(m, shuffle_rng);
        for (std::size_t start = 0; start < m; start += cfg.batch_size) {
            const std::size_t end = std::min(m, start + cfg.batch_size);
            auto update_prior = [&](std::size_t i) {
                effective[i].clear();
                for (std::size_t pos = start; pos < end; ++pos)
                    if (set_of[order[pos]] != i) effective[i].push_back(order[pos]);
                if (effective[i].empty()) {
                    ++skipped[i];
                    return;
                }
                mean_margin_loss_grad(out.priors[i], data, effective[i], cfg.loss, grads[i]);
                cocob_step(states[i], grads[i]);
                out.priors[i].params = states[i].w;
            };
            if (workers <= 1) {
                for (std::size_t i = 0; i < K; ++i) update_prior(i);
            } else {
                std::vector<std::thread> pool;
                for (std::size_t w = 0; w < workers; ++w)
                    pool.emplace_back([&, w] {
                        for (std::size_t i = w; i < K; i += workers) update_prior(i);
                    });
                for (auto& t : pool) t.join();
            }
        }
    }
    for (std::size_t s : skipped) out.skipped_steps += s;
    return out;
}

enum class PenaltyKind { None, PriorDistance, L2 };

/// Value and gradient contribution of the weighted distance-to-priors
/// regulariser eps * sum_i (|S_i|/m) ||w - w_i||. At w == w_i the norm
/// subgradient is taken as zero.
inline double prior_penalty(const ParamVector& w, const PriorSet& priors, double eps,
                            ParamVector* grad_accum) {
    double value = 0.0;
    const double m = static_cast<double>(priors.partition.m);
    for (std::size_t i = 0; i < priors.priors.size(); ++i) {
        const double weight = eps * static_cast<double>(priors.partition.sets[i].size()) / m;
        const double dist = param_distance(w, priors.priors[i].params);
        value += weight * dist;
        if (grad_accum && dist > 0.0) {
            const double scale = weight / dist;
            for (std::size_t j = 0; j < w.size(); ++j)
                (*grad_accum)[j] += scale * (w[j] - priors.priors[i].params[j]);
        }
    }
    return value;
}

struct TrainResult {
    Hypothesis hypothesis;
    std::vector<double> objective_trace;  // mini-batch objective before each step
    std::size_t best_iteration = 0;
};

namespace detail {

inline TrainResult minibatch_descent(const DataView& data, const ModelSpec& spec,
                                     const BatchConfig& cfg, PenaltyKind penalty,
                                     const PriorSet* priors, double coefficient) {
    cfg.validate();
    spec.validate();
    check_unit_ball(data);
    const std::size_t m = data.size();

    TrainResult res;
    res.hypothesis = {spec, init_weights(spec, derive_seed(cfg.seed, "posterior-init"))};
    CocobState state = cocob_init(res.hypothesis.params, cfg.cocob_alpha);

    Rng shuffle_rng(derive_seed(cfg.seed, "posterior-shuffle"));
    const std::size_t epochs = cfg.epochs_for(m);
    res.objective_trace.reserve(epochs * cfg.batches_per_epoch(m));

    ParamVector grad;
    ParamVector best_params = res.hypothesis.params;
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> batch;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        auto order = shuffled_indices(m, shuffle_rng);
        for (std::size_t start = 0; start < m; start += cfg.batch_size) {
            const std::size_t end = std::min(m, start + cfg.batch_size);
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
            double obj = mean_margin_loss_grad(res.hypothesis, data, batch, cfg.loss, grad);
            if (penalty == PenaltyKind::PriorDistance && coefficient > 0.0)
                obj += prior_penalty(res.hypothesis.params, *priors, coefficient, &grad);
            else if (penalty == PenaltyKind::L2 && coefficient > 0.0) {
                double sq = 0.0;
                for (std::size_t j = 0; j < grad.size(); ++j) {
                    sq += res.hypothesis.params[j] * res.hypothesis.params[j];
                    grad[j] += 2.0 * coefficient * res.hypothesis.params[j];
                }
                obj += coefficient * sq;
            }
            res.objective_trace.push_back(obj);
            if (obj < best_obj) {
                best_obj = obj;
                best_params = res.hypothesis.params;
                res.best_iteration = res.objective_trace.size() - 1;
            }
            cocob_step(state, grad);
            res.hypothesis.params = state.w;
        }
    }
    if (!cfg.final_iterate) res.hypothesis.params = best_params;
    return res;
}

}  // namespace detail

/// Posterior Learning: minimises the mini-batch risk plus the weighted
/// distance to the priors. With eps == 0 this is bit-for-bit the ERM
/// trajectory.
inline TrainResult train_posterior(const DataView& data, const PriorSet& priors,
                                   const ModelSpec& spec, const BatchConfig& cfg) {
    if (!priors.priors.empty() && priors.partition.m != data.size())
        throw std::invalid_argument("train_posterior: priors built on a different sample size");
    for (const auto& p : priors.priors)
        if (p.spec != spec) throw std::invalid_argument("train_posterior: prior spec mismatch");
    const double eps = cfg.epsilon_for(data.size());
    return detail::minibatch_descent(data, spec, cfg, PenaltyKind::PriorDistance, &priors, eps);
}

inline TrainResult erm_train(const DataView& data, const ModelSpec& spec, const BatchConfig& cfg) {
    return detail::minibatch_descent(data, spec, cfg, PenaltyKind::None, nullptr, 0.0);
}

inline TrainResult l2_train(const DataView& data, const ModelSpec& spec, const BatchConfig& cfg,
                            double weight_decay) {
    if (weight_decay < 0.0) throw std::invalid_argument("l2: weight decay must be non-negative");
    return detail::minibatch_descent(data, spec, cfg, PenaltyKind::L2, nullptr, weight_decay);
}

}  // namespace pbw
