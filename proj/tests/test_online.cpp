#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "pbw/online.hpp"
#include "testutil.hpp"

using namespace pbw;

TEST_CASE("log barrier values, junction smoothness, shape") {
    CHECK(log_barrier(-1.0, 1.0) == 0.0);
    CHECK(log_barrier(-1.0 / 10000.0, 100.0) == doctest::Approx(0.09210340371976182).epsilon(1e-15));
    CHECK(log_barrier(0.0, 100.0) == doctest::Approx(0.10210340371976181).epsilon(1e-15));

    for (double t : {1.0, 10.0, 100.0}) {
        const double junction = -1.0 / (t * t);
        const double left = -std::log(-junction) / t;
        const double right = t * junction - std::log(1.0 / (t * t)) / t + 1.0 / t;
        CHECK(std::fabs(left - right) <= 1e-12);
        CHECK(std::fabs(log_barrier(junction, t) - left) <= 1e-12);
        // derivative continuity: left branch -1/(t*a) meets the slope t
        CHECK(std::fabs(log_barrier_derivative(junction, t) - t) <= 1e-12);
        CHECK(std::fabs(-1.0 / (t * junction) - t) <= 1e-12);
    }

    SUBCASE("total, convex, non-decreasing") {
        for (double t : {1.0, 10.0, 100.0}) {
            double prev = log_barrier(-1e9, t);
            CHECK(std::isfinite(prev));
            double prev_slope = -std::numeric_limits<double>::infinity();
            for (double a = -5.0; a <= 5.0; a += 0.01) {
                const double v = log_barrier(a, t);
                CHECK(std::isfinite(v));
                CHECK(v >= prev - 1e-12);
                const double slope = log_barrier_derivative(a, t);
                CHECK(slope >= prev_slope - 1e-12);
                prev = v;
                prev_slope = slope;
            }
        }
        CHECK_THROWS_AS((void)log_barrier(0.0, 0.0), std::invalid_argument);
    }
}

TEST_CASE("a satisfied example at the previous point is a stationary point") {
    // margin met with room: loss gradient zero, distance zero, so the inner
    // loop never moves.
    Hypothesis prev{linear_spec(2, 2), {2, 0, 0, 0, 0, 0}};  // scores (2x0, 0)
    OnlineConfig cfg;
    const auto next = online_step(prev, std::vector<double>{1.0, 0.0}, 0, cfg);
    CHECK(param_distance(next, prev) <= 1e-6);

    OnlineConfig one = cfg;
    one.inner_steps = 1;
    const auto next1 = online_step(prev, std::vector<double>{1.0, 0.0}, 0, one);
    CHECK(next1.params == prev.params);

    one.inner_steps = 0;  // a zero-step inner loop is not a configuration
    CHECK_THROWS_AS(one.validate(), std::invalid_argument);
}

TEST_CASE("the barrier softly caps an adversarial pull") {
    // Objective -10 w on one coordinate: the pull persists past the radius,
    // the stationary point of -10w + barrier(w - 1) sits at 1 - 1/(10 t).
    OnlineConfig cfg;
    cfg.inner_steps = 20000;
    ParamVector origin{0.0};
    auto vg = [](const ParamVector&, ParamVector& grad) {
        grad[0] += -10.0;
        return 0.0;
    };
    const auto w = constrained_descent(origin, vg, cfg);

    // dense grid-search oracle over the same objective
    double best_w = 0.0, best_val = std::numeric_limits<double>::infinity();
    for (double cand = 0.0; cand <= 2.0; cand += 1e-5) {
        const double val = -10.0 * cand + log_barrier(cand - cfg.radius, cfg.barrier_t);
        if (val < best_val) {
            best_val = val;
            best_w = cand;
        }
    }
    CHECK(best_w == doctest::Approx(1.0 - 1.0 / (10.0 * cfg.barrier_t)).epsilon(1e-3));
    CHECK(std::fabs(w[0] - best_w) <= 0.05);
    CHECK(std::fabs(w[0]) <= cfg.radius + 10.0 / cfg.barrier_t + 1e-6);
}

TEST_CASE("a repeated separable example is learned and then left alone") {
    Dataset ds;
    ds.dim = 2;
    ds.num_classes = 2;
    const std::size_t m = 2000;
    for (std::size_t i = 0; i < m; ++i) {
        ds.features.push_back(0.9);
        ds.features.push_back(0.1);
        ds.labels.push_back(0);
    }
    ds.source = "repeat";
    OnlineConfig cfg;
    cfg.loss.eta = 5.0;
    cfg.seed = 31;
    const auto trace = online_train(ds.view(), DataView{}, linear_spec(2, 2), cfg);

    std::size_t first_zero = m;
    for (std::size_t i = 0; i < m; ++i)
        if (trace.pre_surrogate[i] == 0.0) {
            first_zero = i;
            break;
        }
    REQUIRE(first_zero < m);  // the example is eventually fit with margin
    for (std::size_t i = first_zero; i < m; ++i) {
        CHECK(trace.pre_surrogate[i] == 0.0);
        CHECK(trace.step_distance[i] == 0.0);  // stationary afterwards
    }
    // per-step prediction loss never increases on the constant stream
    for (std::size_t i = 1; i < m; ++i)
        CHECK(trace.pre_surrogate[i] <= trace.pre_surrogate[i - 1] + 1e-12);
}

TEST_CASE("the plain distance term adds a unit pull toward the anchor") {
    // With the flag on, the descent objective gains ||w - w_prev||, whose
    // gradient at any w != w_prev is the unit vector away from the anchor.
    // A single betting step is scale-free in the gradient magnitude, so the
    // comparison needs enough steps for the reward dynamics to diverge.
    OnlineConfig cfg;
    cfg.inner_steps = 400;
    ParamVector anchor{0.0};
    auto zero_objective = [](const ParamVector&, ParamVector&) { return 0.0; };

    CocobState off_state = cocob_init(ParamVector{0.5}, cfg.cocob_alpha);
    CocobState on_state = cocob_init(ParamVector{0.5}, cfg.cocob_alpha);
    cfg.include_plain_distance = false;
    const auto off = constrained_descent(anchor, zero_objective, cfg, &off_state);
    cfg.include_plain_distance = true;
    const auto on = constrained_descent(anchor, zero_objective, cfg, &on_state);
    // barrier alone pulls back weakly (slope 1/(t(1-d))), the plain term adds 1
    CHECK(on[0] < off[0]);
    CHECK(on[0] < 0.5);

    // at w == w_prev both are stationary
    cfg.include_plain_distance = true;
    const auto still = constrained_descent(anchor, zero_objective, cfg);
    CHECK(still == anchor);
}

TEST_CASE("ogd is the degenerate configuration, bitwise") {
    const auto data = testutil::make_blobs(150, 32);
    OnlineConfig cfg;
    cfg.seed = 32;
    const auto spec = linear_spec(2, 2);
    const auto ogd = ogd_train(data.view(), DataView{}, spec, cfg);

    OnlineConfig degenerate = cfg;
    degenerate.inner_steps = 1;
    degenerate.barrier_enabled = false;
    degenerate.include_plain_distance = false;
    const auto manual = online_train(data.view(), DataView{}, spec, degenerate);
    REQUIRE(ogd.steps() == manual.steps());
    for (std::size_t i = 0; i < ogd.steps(); ++i)
        CHECK(ogd.hypotheses[i].params == manual.hypotheses[i].params);
    CHECK(ogd.path_length == manual.path_length);
}

TEST_CASE("path length equals the recomputed sum of consecutive distances") {
    const auto data = testutil::make_blobs(100, 33);
    OnlineConfig cfg;
    cfg.seed = 33;
    cfg.inner_steps = 3;
    const auto trace = online_train(data.view(), DataView{}, linear_spec(2, 2), cfg);
    double recomputed = 0.0;
    Hypothesis prev = trace.initial;
    for (std::size_t i = 0; i < trace.steps(); ++i) {
        recomputed += param_distance(trace.hypotheses[i], prev);
        prev = trace.hypotheses[i];
    }
    CHECK(std::fabs(recomputed - trace.path_length) <= 1e-12);
    CHECK(trace.cum_train_loss ==
          doctest::Approx(trace.train_avg() * static_cast<double>(trace.steps())));
}

TEST_CASE("every step satisfies the softened constraint") {
    // Holds for the default per-example optimizer reset. With a persistent
    // optimizer the betting state re-anchors to the stream origin on large
    // barrier gradients and can jump past the radius, which is why reset is
    // the default.
    const auto data = testutil::make_blobs(400, 34);
    OnlineConfig cfg;
    cfg.seed = 34;
    const auto trace = online_train(data.view(), DataView{}, linear_spec(2, 2), cfg);
    for (double d : trace.step_distance)
        CHECK(d <= cfg.radius + 10.0 / cfg.barrier_t + 1e-6);
}

TEST_CASE("online training is deterministic and the eval estimates are recorded") {
    const auto data = testutil::make_blobs(120, 35);
    const auto split = split_halves(data, 35);
    OnlineConfig cfg;
    cfg.seed = 35;
    const auto spec = linear_spec(2, 2);
    const auto t1 = online_train(split.train.view(), split.eval.view(), spec, cfg);
    const auto t2 = online_train(split.train.view(), split.eval.view(), spec, cfg);
    REQUIRE(t1.steps() == t2.steps());
    for (std::size_t i = 0; i < t1.steps(); ++i)
        CHECK(t1.hypotheses[i].params == t2.hypotheses[i].params);
    CHECK(t1.eval_risk == t2.eval_risk);
    CHECK(t1.eval_risk.size() == t1.steps());
    CHECK(t1.eval_avg() >= 0.0);
    CHECK(t1.eval_avg() <= 1.0);
}

TEST_CASE("trace export round-trips the step distances") {
    const auto data = testutil::make_blobs(40, 36);
    OnlineConfig cfg;
    cfg.seed = 36;
    const auto trace = online_train(data.view(), DataView{}, linear_spec(2, 2), cfg);
    std::stringstream ss;
    write_trace(trace, ss);
    const auto dists = read_trace_distances(ss);
    REQUIRE(dists.size() == trace.steps());
    for (std::size_t i = 0; i < dists.size(); ++i)
        CHECK(dists[i] == doctest::Approx(trace.step_distance[i]).epsilon(1e-15));
}

TEST_CASE("the trace-driven certificate uses exactly the recorded path") {
    const auto data = testutil::make_blobs(60, 37);
    OnlineConfig cfg;
    cfg.seed = 37;
    const auto trace = online_train(data.view(), DataView{}, linear_spec(2, 2), cfg);
    const auto cert = certificate_from_trace(trace, 2.0, LipschitzProvenance::LemmaProved, 0.05);
    double path = 0.0;
    for (const auto& t : cert.wasserstein_terms) path += t.w1;
    CHECK(std::fabs(path - trace.path_length) <= 1e-12);
    CHECK(cert.wasserstein_total ==
          doctest::Approx(2.0 * 2.0 * trace.path_length / static_cast<double>(trace.steps()))
              .epsilon(1e-12));
    CHECK(std::fabs(cert.total - cert.recompute_total()) <= 1e-12);
}

TEST_CASE("online variance estimates are non-negative and vanish for constant losses") {
    // zero-weight hypotheses give the same loss everywhere, so both variance
    // plug-ins collapse
    Dataset ds = testutil::make_blobs(30, 38);
    const auto split = split_halves(ds, 38);
    OnlineConfig cfg;
    cfg.seed = 38;
    cfg.inner_steps = 1;
    const auto spec = linear_spec(2, 2);
    auto trace = online_train(split.train.view(), split.eval.view(), spec, cfg);
    for (auto& h : trace.hypotheses) h.params.assign(spec.param_count(), 0.0);
    const auto vars = estimate_online_variances(trace, split.train.view(), split.eval.view(),
                                                cfg.loss);
    for (const auto& v : vars) {
        CHECK(v.empirical == doctest::Approx(0.0));
        CHECK(v.population == doctest::Approx(0.0));
    }
}
