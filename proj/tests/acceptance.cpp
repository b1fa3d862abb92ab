// Acceptance suite. Each numbered criterion prints one PASS/FAIL line; a
// criterion whose dataset is not present under --data-dir prints SKIP with
// the expected path (download instructions are in the README). Exit code:
// 1 if anything failed, 77 if nothing failed but something was skipped,
// 0 otherwise.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pbw/pbw.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using namespace pbw;

namespace {

int g_passed = 0, g_failed = 0, g_skipped = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    (ok ? g_passed : g_failed)++;
}

void skip(int criterion, const std::string& what, const std::string& why) {
    std::printf("[SKIP] criterion %d: %s -- %s\n", criterion, what.c_str(), why.c_str());
    ++g_skipped;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

// ---------------------------------------------------------------------------
// criterion 1: analytic gradients vs central finite differences
// ---------------------------------------------------------------------------

bool fd_check(const ModelSpec& spec, std::uint64_t seed, std::string& why) {
    Rng rng(seed);
    LossConfig cfg{1.3, Normalization::OverClasses};
    int checked = 0;
    while (checked < 100) {
        Hypothesis h{spec, init_weights(spec, rng.next_u64())};
        for (double& v : h.params) v += 0.3 * rng.next_gaussian();
        const auto x = testutil::random_unit_ball_point(spec.input_dim, rng);
        const std::size_t y = static_cast<std::size_t>(rng.next_below(spec.num_classes));
        if (testutil::kink_margin(h, x, y, cfg) < 1e-3) continue;
        const auto analytic = loss_value_grad(h, x, y, cfg).grad;
        const auto numeric = testutil::fd_gradient(h, x, y, cfg);
        double dn = 0.0, nn = 0.0;
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            dn += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
            nn += numeric[i] * numeric[i];
        }
        dn = std::sqrt(dn);
        nn = std::sqrt(nn);
        if (!(dn <= 1e-5 * nn || (dn <= 1e-9 && nn <= 1e-9))) {
            why = "relative error " + fmt(nn > 0 ? dn / nn : dn) + " at point " +
                  std::to_string(checked);
            return false;
        }
        ++checked;
    }
    return true;
}

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string why;
    bool ok = fd_check(linear_spec(5, 3), 101, why) && fd_check(mlp_spec(4, 3, 6, 2), 102, why);
    const double secs = elapsed_s(t0);
    if (ok && secs >= 10.0) {
        ok = false;
        why = "runtime " + fmt(secs) + "s exceeds 10s";
    }
    report(1, "gradients match central finite differences (100 smooth points, both models)", ok,
           ok ? fmt(secs) + "s" : why);
}

// ---------------------------------------------------------------------------
// criterion 2: the linear 2-Lipschitz property
// ---------------------------------------------------------------------------

void criterion_2() {
    Rng rng(201);
    const auto spec = linear_spec(6, 4);
    LossConfig cfg{1.0, Normalization::OverClassesMinusOne};
    std::size_t violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        Hypothesis a{spec, ParamVector(spec.param_count())};
        Hypothesis b{spec, ParamVector(spec.param_count())};
        for (std::size_t i = 0; i < spec.param_count(); ++i) {
            a.params[i] = 2.0 * rng.next_gaussian();
            b.params[i] = 2.0 * rng.next_gaussian();
        }
        const auto x = testutil::random_unit_ball_point(6, rng);
        const std::size_t y = static_cast<std::size_t>(rng.next_below(4));
        const double la = margin_loss(forward(a, x), y, cfg);
        const double lb = margin_loss(forward(b, x), y, cfg);
        if (std::fabs(la - lb) > 2.0 * param_distance(a, b) + 1e-12) ++violations;
    }
    report(2, "|loss difference| <= 2 ||w - w'|| on 10^4 random triples", violations == 0,
           std::to_string(violations) + " violations");
}

// ---------------------------------------------------------------------------
// criterion 3: exact optimal transport
// ---------------------------------------------------------------------------

void criterion_3() {
    using Point = std::vector<double>;
    Rng rng(301);
    bool ok = true;
    std::string why;
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const std::size_t n = 1 + rng.next_below(6);
        std::vector<Point> a(n, Point(3)), b(n, Point(3));
        for (auto& p : a)
            for (double& v : p) v = 2.0 * rng.next_gaussian();
        for (auto& p : b)
            for (double& v : p) v = 2.0 * rng.next_gaussian();
        const auto mu = uniform_measure(a), nu = uniform_measure(b);
        const double exact = w1_exact(mu, nu, euclidean_metric);
        const double brute = w1_brute_force(mu, nu, euclidean_metric);
        if (std::fabs(exact - brute) > 1e-9) {
            ok = false;
            why = "permutation oracle mismatch " + fmt(std::fabs(exact - brute));
        }
    }
    for (int trial = 0; trial < 50 && ok; ++trial) {
        const std::size_t n = 1 + rng.next_below(8), k = 1 + rng.next_below(8);
        std::vector<Point> xs(n, Point(1)), ys(k, Point(1));
        for (auto& p : xs) p[0] = 3.0 * rng.next_gaussian();
        for (auto& p : ys) p[0] = 3.0 * rng.next_gaussian();
        const auto mu = uniform_measure(xs), nu = uniform_measure(ys);
        std::vector<double> xc, yc;
        for (const auto& p : mu.support) xc.push_back(p[0]);
        for (const auto& p : nu.support) yc.push_back(p[0]);
        const double cdf = testutil::w1_line_cdf(xc, mu.weights, yc, nu.weights);
        if (std::fabs(cdf - w1_exact(mu, nu, euclidean_metric)) > 1e-9) {
            ok = false;
            why = "1-D closed form mismatch";
        }
    }
    if (ok) {
        const auto p = dirac(Point{0.25, -1.0});
        const auto q = dirac(Point{0.25, 2.0});
        if (w1_exact(p, q, euclidean_metric) != euclidean_metric(p.support[0], q.support[0])) {
            ok = false;
            why = "dirac shortcut is not exact";
        }
    }
    report(3, "w1_exact vs enumeration (200 instances), 1-D closed form, dirac shortcut", ok, why);
}

// ---------------------------------------------------------------------------
// criterion 4: log barrier branches
// ---------------------------------------------------------------------------

void criterion_4() {
    bool ok = log_barrier(-1.0, 1.0) == 0.0;
    std::string why = ok ? "" : "B(-1, 1) != 0";
    for (double t : {1.0, 10.0, 100.0}) {
        const double a = -1.0 / (t * t);
        const double left = -std::log(-a) / t;
        const double right = t * a - std::log(1.0 / (t * t)) / t + 1.0 / t;
        if (std::fabs(left - right) > 1e-12 || std::fabs(-1.0 / (t * a) - t) > 1e-12) {
            ok = false;
            why = "junction mismatch at t=" + fmt(t);
        }
        if (std::fabs(log_barrier(a, t) - left) > 1e-12 ||
            std::fabs(log_barrier_derivative(a, t) - t) > 1e-12) {
            ok = false;
            why = "implementation disagrees with branch algebra at t=" + fmt(t);
        }
    }
    report(4, "barrier branches agree in value and derivative at the junction", ok, why);
}

// ---------------------------------------------------------------------------
// criterion 5: certificate arithmetic and monotonicity
// ---------------------------------------------------------------------------

void criterion_5() {
    constexpr auto kUser = LipschitzProvenance::UserSupplied;
    bool ok = true;
    std::string why;

    const auto exact = bound_batch_nonneg({{8, 0.0}}, 1.0, kUser, 8, 1, std::exp(-1.0));
    if (exact.total != 0.5) {
        ok = false;
        why = "K=1 pinned value is " + fmt(exact.total);
    }

    const std::vector<WassersteinTerm> base = {{50, 0.2}, {50, 0.3}};
    const auto ref = bound_batch_nonneg(base, 1.0, kUser, 100, 2, 0.1);
    if (ok && !(bound_batch_nonneg({{100, 0.2}, {100, 0.3}}, 1.0, kUser, 200, 2, 0.1).total <
                ref.total)) {
        ok = false;
        why = "not decreasing in m";
    }
    if (ok && !(bound_batch_nonneg({{50, 0.21}, {50, 0.3}}, 1.0, kUser, 100, 2, 0.1).total >
                ref.total)) {
        ok = false;
        why = "not increasing in W";
    }
    if (ok && !(bound_batch_nonneg(base, 1.0, kUser, 100, 2, 0.05).total > ref.total)) {
        ok = false;
        why = "not increasing as delta decreases";
    }

    //  K=1 and K=sqrt(m) specialisations
    if (ok) {
        const double L = 2.0, W = 0.25, delta = 0.1;
        const auto k1 = bound_batch_nonneg({{8, W}}, L, kUser, 8, 1, delta);
        if (std::fabs(k1.total - (std::sqrt(2.0 * std::log(1.0 / delta) / 8.0) + 2.0 * L * W)) >
            1e-15) {
            ok = false;
            why = "K=1 specialisation";
        }
        const auto ks =
            bound_batch_nonneg({{4, 0.0}, {4, 0.0}, {4, 0.0}, {4, 0.0}}, 1.0, kUser, 16, 4, 0.05);
        if (std::fabs(ks.statistical_term -
                      std::sqrt(2.0 * std::log(4.0 / 0.05) / 4.0)) > 1e-14) {
            ok = false;
            why = "K=sqrt(m) specialisation";
        }
    }

    if (ok) {
        Rng rng(501);
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t k = 1 + rng.next_below(5);
            std::vector<WassersteinTerm> terms;
            std::size_t m = 0;
            for (std::size_t i = 0; i < k; ++i) {
                const std::size_t size = 1 + rng.next_below(60);
                terms.push_back({size, rng.next_unit()});
                m += size;
            }
            const double L = 0.1 + rng.next_unit(), delta = 0.01 + 0.98 * rng.next_unit();
            if (bound_batch_tight(terms, L, kUser, m, k, delta).total >
                bound_batch_nonneg(terms, L, kUser, m, k, delta).total) {
                ok = false;
                why = "tight exceeded non-negative at trial " + std::to_string(trial);
                break;
            }
        }
    }
    report(5, "certificate arithmetic: pinned value, monotonicity, tight <= nonneg", ok, why);
}

// ---------------------------------------------------------------------------
// criterion 6: prior independence
// ---------------------------------------------------------------------------

void criterion_6() {
    const auto data = testutil::make_blobs(200, 601);
    const auto spec = linear_spec(2, 2);
    const auto partition = make_partition(200, 4, 601);
    BatchConfig cfg;
    cfg.seed = 601;
    cfg.min_iterations = 500;
    const auto before = train_priors(data.view(), partition, spec, cfg);

    bool ok = true;
    std::string why;
    for (std::size_t i = 0; i < 4 && ok; ++i) {
        auto mutated = data;
        const std::size_t victim = partition.sets[i][0];
        mutated.features[victim * 2] = -0.5;
        mutated.features[victim * 2 + 1] = 0.4 - 0.1 * static_cast<double>(i);
        mutated.labels[victim] = 1 - mutated.labels[victim];
        const auto after = train_priors(mutated.view(), partition, spec, cfg);
        if (after.priors[i].params != before.priors[i].params) {
            ok = false;
            why = "prior " + std::to_string(i) + " changed under mutation of its own set";
        }
    }
    report(6, "mutating any example of S_i leaves prior i bitwise unchanged (m=200, K=4)", ok,
           why);
}

// ---------------------------------------------------------------------------
// criterion 9: the optimizer oracle
// ---------------------------------------------------------------------------

void criterion_9() {
    constexpr std::uint64_t expected_bits[10] = {
        0x3f1a36e2eb1c432dull, 0x3f2a378eb79354b1ull, 0x3f33aaacc2f9f35cull,
        0x3f3a3ae9e6483f5bull, 0x3f40667ff1126bb5ull, 0x3f43b0b80503d668ull,
        0x3f46fc5dfc8075eaull, 0x3f4a49b2d12ab372ull, 0x3f4d98f7b114ea57ull,
        0x3f507537038ff7c9ull};
    bool ok = true;
    std::string why;
    auto s = cocob_init(ParamVector{0.0}, 10000.0);
    for (int step = 0; step < 10; ++step) {
        cocob_step(s, ParamVector{-1.0});
        std::uint64_t bits;
        std::memcpy(&bits, &s.w[0], 8);
        if (bits != expected_bits[step]) {
            ok = false;
            why = "hand-computed table diverges at step " + std::to_string(step + 1);
            break;
        }
    }
    if (ok) {
        auto c = cocob_init(ParamVector{0.0}, 100.0);
        for (int step = 0; step < 10000; ++step) {
            const double g = c.w[0] > 5.0 ? 1.0 : (c.w[0] < 5.0 ? -1.0 : 0.0);
            cocob_step(c, ParamVector{g});
        }
        if (std::fabs(c.w[0] - 5.0) > 0.1) {
            ok = false;
            why = "|w - 5| = " + fmt(std::fabs(c.w[0] - 5.0)) + " after 10^4 steps";
        }
    }
    report(9, "optimizer matches the 10-step oracle bitwise and converges on |w - 5|", ok, why);
}

// ---------------------------------------------------------------------------
// criterion 10: byte-identical reruns through the CLI
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

void criterion_10(const fs::path& work) {
    const std::string cli = PBW_CLI_PATH;
    const auto csv = work / "ttt.csv";
    const auto schema = work / "ttt.schema";
    testutil::write_tictactoe_csv(csv.string(), schema.string());
    const auto data = work / "ttt.pbwd";
    std::string cmd = cli + " ingest --csv " + csv.string() + " --schema " + schema.string() +
                      " --out " + data.string() + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) {
        report(10, "end-to-end determinism", false, "ingest failed");
        return;
    }
    auto run = [&](const std::string& dir) {
        const std::string c = cli + " train-batch --data " + data.string() +
                              " --algo alg1 --min-iterations 2000 --seeds 5 --out " + dir +
                              " > /dev/null";
        return std::system(c.c_str()) == 0;
    };
    const auto dir_a = work / "det_a", dir_b = work / "det_b";
    if (!run(dir_a.string()) || !run(dir_b.string())) {
        report(10, "end-to-end determinism", false, "train-batch failed");
        return;
    }
    bool ok = true;
    std::string why;
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        const auto name = entry.path().filename();
        ++compared;
        if (slurp(entry.path()) != slurp(dir_b / name)) {
            ok = false;
            why = "file differs between reruns: " + name.string();
            break;
        }
    }
    if (ok) why = std::to_string(compared) + " files byte-identical";
    report(10, "repeated train-batch produces byte-identical manifests and hypothesis files", ok,
           why);
}

// ---------------------------------------------------------------------------
// dataset plumbing for the reproduction criteria
// ---------------------------------------------------------------------------

struct Discovered {
    Dataset data;
    bool present = false;
    std::string missing;
};

Discovered load_mushrooms(const fs::path& data_dir, const fs::path& work) {
    const auto path = data_dir / "mushrooms" / "agaricus-lepiota.data";
    if (!fs::exists(path)) return {{}, false, path.string()};
    const auto schema = work / "mushrooms.schema";
    {
        std::ofstream os(schema);
        os << "0:label\n";
        for (int c = 1; c <= 22; ++c) os << c << ":categorical\n";
    }
    return {load_csv(path.string(), read_schema(schema.string())), true, ""};
}

Discovered load_yeast(const fs::path& data_dir, const fs::path& work) {
    const auto path = data_dir / "yeast" / "yeast.data";
    if (!fs::exists(path)) return {{}, false, path.string()};
    const auto schema = work / "yeast.schema";
    {
        std::ofstream os(schema);
        os << "delimiter:whitespace\n0:ignore\n";
        for (int c = 1; c <= 8; ++c) os << c << ":numeric\n";
        os << "9:label\n";
    }
    return {load_csv(path.string(), read_schema(schema.string())), true, ""};
}

Discovered load_pendigits(const fs::path& data_dir, const fs::path& work) {
    const auto tra = data_dir / "pendigits" / "pendigits.tra";
    const auto tes = data_dir / "pendigits" / "pendigits.tes";
    if (!fs::exists(tra)) return {{}, false, tra.string()};
    const auto merged = work / "pendigits.csv";
    {
        std::ofstream os(merged);
        os << std::ifstream(tra).rdbuf();
        if (fs::exists(tes)) os << std::ifstream(tes).rdbuf();
    }
    const auto schema = work / "pendigits.schema";
    {
        std::ofstream os(schema);
        for (int c = 0; c < 16; ++c) os << c << ":numeric\n";
        os << "16:label\n";
    }
    return {load_csv(merged.string(), read_schema(schema.string())), true, ""};
}

Discovered load_mnist(const fs::path& data_dir) {
    const auto imgs = data_dir / "mnist" / "train-images-idx3-ubyte";
    const auto labs = data_dir / "mnist" / "train-labels-idx1-ubyte";
    if (!fs::exists(imgs) || !fs::exists(labs)) return {{}, false, imgs.string()};
    return {load_idx(imgs.string(), labs.string()), true, ""};
}

Dataset make_tictactoe(const fs::path& work) {
    const auto csv = work / "ttt_repro.csv";
    const auto schema = work / "ttt_repro.schema";
    testutil::write_tictactoe_csv(csv.string(), schema.string());
    return load_csv(csv.string(), read_schema(schema.string()));
}

struct BatchOutcome {
    double train_median, test_median;
    double seconds;
};

BatchOutcome run_batch(const Dataset& full, const ModelSpec& base_spec, const std::string& algo,
                       EpsilonRule eps, std::size_t min_iterations,
                       const std::vector<std::uint64_t>& seeds) {
    std::vector<double> trains, tests;
    const auto t0 = std::chrono::steady_clock::now();
    for (auto seed : seeds) {
        BatchConfig cfg;
        cfg.seed = seed;
        cfg.epsilon_rule = eps;
        cfg.min_iterations = min_iterations;
        const auto split = split_halves(full, seed);
        const auto train = split.train.view();
        const auto eval = split.eval.view();
        ModelSpec spec = base_spec;
        spec.input_dim = full.dim;
        spec.num_classes = full.num_classes;
        TrainResult result;
        if (algo == "alg1") {
            const auto partition = make_partition(train.size(), cfg.k_for(train.size()), seed);
            const auto priors = train_priors(train, partition, spec, cfg);
            result = train_posterior(train, priors, spec, cfg);
        } else {
            result = erm_train(train, spec, cfg);
        }
        trains.push_back(zero_one_risk(result.hypothesis, train, all_indices(train.size())));
        tests.push_back(zero_one_risk(result.hypothesis, eval, all_indices(eval.size())));
    }
    auto med = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    };
    return {med(trains), med(tests), elapsed_s(t0)};
}

// ---------------------------------------------------------------------------
// criterion 7: the online step constraint on real data
// ---------------------------------------------------------------------------

void criterion_7(const fs::path& data_dir, const fs::path& work) {
    struct Case {
        const char* name;
        Discovered d;
        std::size_t prefix;
    };
    Case cases[] = {{"mushrooms", load_mushrooms(data_dir, work), 0},
                    {"pendigits", load_pendigits(data_dir, work), 2000}};
    for (auto& c : cases) {
        const std::string what = std::string("online step constraint on ") + c.name;
        if (!c.d.present) {
            skip(7, what, "dataset file not found: " + c.d.missing);
            continue;
        }
        OnlineConfig cfg;
        cfg.seed = 1;
        auto split = split_halves(c.d.data, cfg.seed);
        if (c.prefix > 0 && split.train.size() > c.prefix) {
            split.train.features.resize(c.prefix * split.train.dim);
            split.train.labels.resize(c.prefix);
        }
        const auto spec = linear_spec(c.d.data.dim, c.d.data.num_classes);
        const auto trace = online_train(split.train.view(), DataView{}, spec, cfg);
        double worst = 0.0;
        for (double d : trace.step_distance) worst = std::max(worst, d);
        const double limit = cfg.radius + 10.0 / cfg.barrier_t + 1e-6;
        report(7, what, worst <= limit, "max step " + fmt(worst) + " vs limit " + fmt(limit));
    }
}

// ---------------------------------------------------------------------------
// criterion 8: desk-scale reproduction
// ---------------------------------------------------------------------------

void criterion_8(const fs::path& data_dir, const fs::path& work) {
    const std::vector<std::uint64_t> seeds = {1, 2, 3};

    // mushrooms, linear, alg1(1/sqrt m): test risk <= 0.01, runtime <= 5 min
    {
        auto d = load_mushrooms(data_dir, work);
        if (!d.present) {
            skip(8, "mushrooms linear alg1 test risk <= 0.01",
                 "dataset file not found: " + d.missing);
        } else {
            const auto out = run_batch(d.data, linear_spec(1, 2), "alg1", EpsilonRule::InvSqrtM,
                                       20000, seeds);
            const bool ok = out.test_median <= 0.01 && out.seconds <= 300.0;
            report(8, "mushrooms linear alg1 test risk <= 0.01 within 5 min", ok,
                   "median test " + fmt(out.test_median) + ", " + fmt(out.seconds) + "s");
        }
    }

    // tictactoe, linear, alg1(1/sqrt m): test risk <= 0.08 (enumerated data)
    {
        const auto ttt = make_tictactoe(work);
        const auto out =
            run_batch(ttt, linear_spec(1, 2), "alg1", EpsilonRule::InvSqrtM, 20000, seeds);
        report(8, "tictactoe linear alg1 test risk <= 0.08", out.test_median <= 0.08,
               "median test " + fmt(out.test_median) + ", " + fmt(out.seconds) + "s");
    }

    // yeast, mlp 600x2: alg1(1/sqrt m) test risk <= erm test risk.
    // 3000 iterations instead of 20000 keeps the cell inside the suite's
    // runtime budget at this model size.
    {
        auto d = load_yeast(data_dir, work);
        if (!d.present) {
            skip(8, "yeast mlp alg1 <= erm (directional)", "dataset file not found: " + d.missing);
        } else {
            const auto spec = mlp_spec(1, 2, 600, 2);
            const auto alg1 = run_batch(d.data, spec, "alg1", EpsilonRule::InvSqrtM, 3000, seeds);
            const auto erm = run_batch(d.data, spec, "erm", EpsilonRule::InvSqrtM, 3000, seeds);
            report(8, "yeast mlp alg1 test risk <= erm test risk",
                   alg1.test_median <= erm.test_median,
                   "alg1 " + fmt(alg1.test_median) + " vs erm " + fmt(erm.test_median) + ", " +
                       fmt(alg1.seconds + erm.seconds) + "s");
        }
    }

    // pendigits, linear, online: alg2 C_mu <= 0.58 and <= ogd on same seeds
    {
        auto d = load_pendigits(data_dir, work);
        if (!d.present) {
            skip(8, "pendigits online alg2 C_mu <= 0.58 and <= ogd",
                 "dataset file not found: " + d.missing);
        } else {
            std::vector<double> alg2_mu, ogd_mu;
            for (auto seed : seeds) {
                OnlineConfig cfg;
                cfg.seed = seed;
                auto split = split_halves(d.data, seed);
                if (split.train.size() > 2000) {
                    split.train.features.resize(2000 * split.train.dim);
                    split.train.labels.resize(2000);
                }
                const auto spec = linear_spec(d.data.dim, d.data.num_classes);
                alg2_mu.push_back(
                    online_train(split.train.view(), split.eval.view(), spec, cfg).eval_avg());
                ogd_mu.push_back(
                    ogd_train(split.train.view(), split.eval.view(), spec, cfg).eval_avg());
            }
            auto med = [](std::vector<double> v) {
                std::sort(v.begin(), v.end());
                return v[v.size() / 2];
            };
            const double a = med(alg2_mu), o = med(ogd_mu);
            report(8, "pendigits online alg2 C_mu <= 0.58 and <= ogd", a <= 0.58 && a <= o,
                   "alg2 " + fmt(a) + " vs ogd " + fmt(o));
        }
    }

    // MNIST subsample: the pipeline completes with finite certificates
    {
        auto d = load_mnist(data_dir);
        if (!d.present) {
            skip(8, "5000-example image subsample end-to-end with finite certificates",
                 "dataset file not found: " + d.missing);
        } else {
            const auto sub = subsample(d.data, 5000, 1);
            BatchConfig cfg;
            cfg.seed = 1;
            cfg.min_iterations = 5000;
            const auto split = split_halves(sub, cfg.seed);
            const auto train = split.train.view();
            const auto spec = linear_spec(sub.dim, sub.num_classes);
            const auto partition = make_partition(train.size(), cfg.k_for(train.size()), cfg.seed);
            const auto priors = train_priors(train, partition, spec, cfg);
            const auto posterior = train_posterior(train, priors, spec, cfg);
            std::vector<WassersteinTerm> terms;
            for (std::size_t i = 0; i < priors.priors.size(); ++i)
                terms.push_back({partition.sets[i].size(),
                                 param_distance(posterior.hypothesis, priors.priors[i])});
            const double lips = lipschitz_constant(spec, cfg.loss, LipschitzMode::LemmaLinear);
            const auto nonneg = bound_batch_nonneg(terms, lips, LipschitzProvenance::LemmaProved,
                                                   train.size(), partition.k(), 0.05);
            const auto tight = bound_batch_tight(terms, lips, LipschitzProvenance::LemmaProved,
                                                 train.size(), partition.k(), 0.05);
            const bool ok = std::isfinite(nonneg.total) && std::isfinite(tight.total) &&
                            nonneg.total > 0.0;
            report(8, "5000-example image subsample end-to-end with finite certificates", ok,
                   "nonneg " + fmt(nonneg.total) + ", tight " + fmt(tight.total) + ", test risk " +
                       fmt(zero_one_risk(posterior.hypothesis, split.eval.view(),
                                         all_indices(split.eval.size()))));
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    std::string only = "all";
    fs::path data_dir = "data";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--only" && i + 1 < argc) only = argv[++i];
        else if (arg == "--data-dir" && i + 1 < argc) data_dir = argv[++i];
        else {
            std::fprintf(stderr, "usage: acceptance [--only core|repro|all] [--data-dir PATH]\n");
            return 2;
        }
    }
    const fs::path work = fs::temp_directory_path() / "pbw_acceptance";
    fs::create_directories(work);

    try {
        if (only == "core" || only == "all") {
            criterion_1();
            criterion_2();
            criterion_3();
            criterion_4();
            criterion_5();
            criterion_6();
            criterion_9();
            criterion_10(work);
        }
        if (only == "repro" || only == "all") {
            criterion_7(data_dir, work);
            criterion_8(data_dir, work);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance: unexpected error: %s\n", e.what());
        return 1;
    }

    std::printf("acceptance summary: %d passed, %d failed, %d skipped\n", g_passed, g_failed,
                g_skipped);
    if (g_failed > 0) return 1;
    if (g_skipped > 0) return 77;
    return 0;
}
