// Command-line front end: dataset ingestion, batch and online training with
// their baselines, bound certificates, exact earth-mover distances, and
// result tables. Every run is deterministic in (config, seed); manifests and
// hypothesis files are byte-stable.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "pbw/pbw.hpp"

namespace fs = std::filesystem;
using namespace pbw;

namespace {

struct DataArgs {
    std::string pbwd;
    std::string csv;
    std::string schema;
    std::string idx_images;
    std::string idx_labels;

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", pbwd, "ingested dataset (.pbwd)");
        cmd->add_option("--csv", csv, "delimited text file");
        cmd->add_option("--schema", schema, "column-role schema for --csv");
        cmd->add_option("--idx-images", idx_images, "IDX image file");
        cmd->add_option("--idx-labels", idx_labels, "IDX label file");
    }

    Dataset load() const {
        if (!pbwd.empty()) return load_dataset(pbwd);
        if (!csv.empty()) {
            if (schema.empty()) throw CLI::ValidationError("--csv needs --schema");
            return load_csv(csv, read_schema(schema));
        }
        if (!idx_images.empty()) {
            if (idx_labels.empty()) throw CLI::ValidationError("--idx-images needs --idx-labels");
            return load_idx(idx_images, idx_labels);
        }
        throw CLI::ValidationError("no dataset given: use --data, --csv or --idx-images");
    }

    std::string name() const {
        const std::string& p = !pbwd.empty() ? pbwd : (!csv.empty() ? csv : idx_images);
        return fs::path(p).stem().string();
    }
};

struct ModelArgs {
    std::string kind = "linear";
    std::size_t width = 600;
    std::size_t depth = 2;

    void attach(CLI::App* cmd) {
        cmd->add_option("--model", kind, "linear | mlp")->check(CLI::IsMember({"linear", "mlp"}));
        cmd->add_option("--width", width, "mlp hidden width");
        cmd->add_option("--depth", depth, "mlp hidden layers");
    }

    ModelSpec spec(std::size_t input_dim, std::size_t classes) const {
        return kind == "linear" ? linear_spec(input_dim, classes)
                                : mlp_spec(input_dim, classes, width, depth);
    }
};

// Key=value configuration files. Every line becomes "--key value" unless the
// same flag was already given on the command line, so flags win. Boolean
// flags are spelled true/false in the file.
std::vector<std::string> expand_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (config_path.empty()) return args;
    std::ifstream is(config_path);
    if (!is) throw std::runtime_error("cannot open config: " + config_path);
    auto has_flag = [&](const std::string& flag) {
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config: bad line: " + line);
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        const std::string flag = "--" + key;
        if (has_flag(flag)) continue;
        if (value == "true") {
            args.push_back(flag);
        } else if (value == "false") {
            continue;
        } else {
            args.push_back(flag);
            args.push_back(value);
        }
    }
    return args;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
    if (seeds.empty()) throw CLI::ValidationError("--seeds: empty list");
    return seeds;
}

void apply_epsilon(BatchConfig& cfg, const std::string& text) {
    if (text == "inv_m") {
        cfg.epsilon_rule = EpsilonRule::InvM;
    } else if (text == "inv_sqrt_m") {
        cfg.epsilon_rule = EpsilonRule::InvSqrtM;
    } else {
        cfg.epsilon_rule = EpsilonRule::Fixed;
        cfg.epsilon_value = std::stod(text);
    }
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_risk(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

// One (seed) cell of an experiment grid; rows are merged in seed order so
// the output files do not depend on scheduling. The first cell failure is
// rethrown on the calling thread after all workers drain.
template <class Fn>
void run_cells(std::size_t count, Fn&& body) {
    const std::size_t workers = std::min<std::size_t>(count, std::thread::hardware_concurrency());
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr failure;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t mine;
                {
                    std::lock_guard lock(mu);
                    if (next == count || failure) return;
                    mine = next++;
                }
                try {
                    body(mine);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

int cmd_ingest(const DataArgs& data_args, const std::string& out, std::size_t subsample_n,
               std::uint64_t seed, bool skip_normalize) {
    Dataset ds = data_args.load();
    if (subsample_n > 0) ds = subsample(ds, subsample_n, seed);
    double scale = 1.0;
    if (!skip_normalize) scale = normalize_unit_ball(ds);
    std::cout << "examples=" << ds.size() << " dim=" << ds.dim << " classes=" << ds.num_classes
              << " dropped_rows=" << ds.dropped_rows << " ball_scale=" << scale
              << " max_row_norm=" << ds.max_row_norm() << " hash=" << std::hex
              << ds.content_hash() << std::dec << '\n';
    if (!out.empty()) {
        save_dataset(ds, out);
        std::cout << "wrote " << out << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// train-batch
// ---------------------------------------------------------------------------

struct BatchRow {
    std::uint64_t seed;
    double train_risk;
    double test_risk;
};

int cmd_train_batch(const DataArgs& data_args, const ModelArgs& model_args, std::string algo,
                    BatchConfig base_cfg, const std::string& epsilon_text,
                    const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
    apply_epsilon(base_cfg, epsilon_text);
    const Dataset full = data_args.load();
    if (!out_dir.empty()) fs::create_directories(out_dir);

    std::vector<BatchRow> rows(seeds.size());
    run_cells(seeds.size(), [&](std::size_t cell) {
        const std::uint64_t seed = seeds[cell];
        BatchConfig cfg = base_cfg;
        cfg.seed = seed;
        const auto split = split_halves(full, seed);
        const auto train = split.train.view();
        const auto eval = split.eval.view();
        const auto spec = model_args.spec(full.dim, full.num_classes);

        Manifest man;
        man.set("algo", algo);
        man.set("dataset", full.source);
        man.set("dataset_hash", full.content_hash());
        man.set("model", model_args.kind);
        man.set("input_dim", full.dim);
        man.set("classes", full.num_classes);
        if (spec.kind == ModelKind::Mlp) {
            man.set("width", spec.hidden_width);
            man.set("depth", spec.hidden_depth);
        }
        man.set("seed", seed);
        man.set("epsilon", epsilon_text);
        man.set("epsilon_value", cfg.epsilon_for(train.size()));
        man.set("k_alpha", cfg.k_alpha);
        man.set("batch_size", cfg.batch_size);
        man.set("min_iterations", cfg.min_iterations);
        man.set("eta", cfg.loss.eta);
        man.set("normalization", cfg.loss.normalization == Normalization::OverClasses
                                     ? "classes"
                                     : "classes-minus-one");
        man.set("cocob_alpha", cfg.cocob_alpha);
        man.set("train_size", train.size());
        man.set("eval_size", eval.size());
        man.set("eval_max_norm", split.eval_max_norm);

        TrainResult result;
        if (algo == "alg1") {
            const std::size_t k = cfg.k_for(train.size());
            const auto partition = make_partition(train.size(), k, seed);
            const auto priors = train_priors(train, partition, spec, cfg);
            result = train_posterior(train, priors, spec, cfg);
            man.set("k", k);
            man.set("skipped_prior_steps", priors.skipped_steps);
            std::string sizes;
            for (const auto& s : partition.sets)
                sizes += (sizes.empty() ? "" : ",") + std::to_string(s.size());
            man.set("set_sizes", sizes);
            if (!out_dir.empty()) {
                for (std::size_t i = 0; i < priors.priors.size(); ++i) {
                    const auto path = out_dir + "/prior" + std::to_string(i) + "_seed" +
                                      std::to_string(seed) + ".hyp";
                    save_hypothesis(priors.priors[i], path);
                    man.set("prior_file_" + std::to_string(i), fs::path(path).filename().string());
                }
            }
        } else if (algo == "erm") {
            result = erm_train(train, spec, cfg);
        } else if (algo == "l2") {
            result = l2_train(train, spec, cfg, cfg.epsilon_for(train.size()));
        } else {
            throw CLI::ValidationError("unknown --algo: " + algo);
        }

        rows[cell] = {seed, zero_one_risk(result.hypothesis, train, all_indices(train.size())),
                      zero_one_risk(result.hypothesis, eval, all_indices(eval.size()))};
        man.set("train_risk", rows[cell].train_risk);
        man.set("test_risk", rows[cell].test_risk);
        man.set("best_iteration", result.best_iteration);

        if (!out_dir.empty()) {
            const auto hyp = out_dir + "/posterior_seed" + std::to_string(seed) + ".hyp";
            save_hypothesis(result.hypothesis, hyp);
            man.set("posterior_file", fs::path(hyp).filename().string());
            man.save(out_dir + "/run_seed" + std::to_string(seed) + ".manifest");
        }
    });

    std::ostringstream table;
    table << "dataset\talgo\tmodel\tparam\tseed\ttrain\ttest\n";
    std::vector<double> trains, tests;
    for (const auto& row : rows) {
        table << data_args.name() << '\t' << algo << '\t' << model_args.kind << '\t'
              << epsilon_text << '\t' << row.seed << '\t' << format_risk(row.train_risk) << '\t'
              << format_risk(row.test_risk) << '\n';
        trains.push_back(row.train_risk);
        tests.push_back(row.test_risk);
    }
    table << data_args.name() << '\t' << algo << '\t' << model_args.kind << '\t' << epsilon_text
          << "\tmedian\t" << format_risk(median(trains)) << '\t' << format_risk(median(tests))
          << '\n';
    std::cout << table.str();
    if (!out_dir.empty()) {
        std::ofstream os(out_dir + "/rows.tsv");
        os << table.str();
    }
    return 0;
}

// ---------------------------------------------------------------------------
// train-online
// ---------------------------------------------------------------------------

int cmd_train_online(const DataArgs& data_args, const ModelArgs& model_args, std::string algo,
                     OnlineConfig base_cfg, std::size_t max_examples,
                     const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                     bool certify, double delta) {
    const Dataset full = data_args.load();
    if (!out_dir.empty()) fs::create_directories(out_dir);

    struct Row {
        std::uint64_t seed;
        double c_s, c_mu, path_length;
    };
    std::vector<Row> rows(seeds.size());
    std::vector<std::string> cert_blocks(seeds.size());

    run_cells(seeds.size(), [&](std::size_t cell) {
        const std::uint64_t seed = seeds[cell];
        OnlineConfig cfg = base_cfg;
        cfg.seed = seed;
        auto split = split_halves(full, seed);
        if (max_examples > 0 && split.train.size() > max_examples) {
            split.train.features.resize(max_examples * split.train.dim);
            split.train.labels.resize(max_examples);
        }
        const auto stream = split.train.view();
        const auto eval = split.eval.view();
        const auto spec = model_args.spec(full.dim, full.num_classes);

        OnlineTrace trace;
        if (algo == "alg2") {
            trace = online_train(stream, eval, spec, cfg);
        } else if (algo == "ogd") {
            trace = ogd_train(stream, eval, spec, cfg);
        } else {
            throw CLI::ValidationError("unknown --algo: " + algo);
        }
        rows[cell] = {seed, trace.train_avg(), trace.eval_avg(), trace.path_length};

        Manifest man;
        man.set("algo", algo);
        man.set("dataset", full.source);
        man.set("dataset_hash", full.content_hash());
        man.set("model", model_args.kind);
        man.set("seed", seed);
        man.set("inner_steps", cfg.inner_steps);
        man.set("barrier_t", cfg.barrier_t);
        man.set("radius", cfg.radius);
        man.set("eta", cfg.loss.eta);
        man.set("stream_size", stream.size());
        man.set("eval_size", eval.size());
        man.set("reset_optimizer", cfg.reset_optimizer_per_example ? "per-example" : "never");
        man.set("path_length", trace.path_length);
        man.set("cumulative_train_loss", trace.train_avg());
        man.set("cumulative_eval_loss", trace.eval_avg());

        if (certify) {
            std::ostringstream certs;
            if (spec.kind == ModelKind::Linear) {
                const double lips =
                    lipschitz_constant(spec, cfg.loss, LipschitzMode::LemmaLinear);
                const auto prov = LipschitzProvenance::LemmaProved;
                certificate_from_trace(trace, lips, prov, delta).print(certs);
                const auto vars = estimate_online_variances(trace, stream, eval, cfg.loss);
                double vsum = 0.0;
                for (const auto& v : vars) vsum += v.empirical + v.population;
                const double lambda =
                    vsum > 0.0 ? std::sqrt(2.0 * std::log(1.0 / delta) / vsum) : 1.0;
                bound_online_heavy(trace.step_distance, lips, prov, delta, lambda, vars)
                    .print(certs);
                std::vector<Hypothesis> chain;
                chain.push_back(trace.initial);
                chain.insert(chain.end(), trace.hypotheses.begin(), trace.hypotheses.end() - 1);
                const auto moments = estimate_moments(chain, eval, cfg.loss);
                certs << "prior chain max second moment: " << moments.max_moment
                      << (moments.satisfied ? "  (moment precondition holds)"
                                            : "  (moment precondition VIOLATED)")
                      << '\n';
            } else {
                certs << "certificates for mlp models need a user-supplied Lipschitz constant; "
                         "use the certify subcommand with --lipschitz <value>\n";
            }
            cert_blocks[cell] = certs.str();
        }

        if (!out_dir.empty()) {
            const auto trace_path = out_dir + "/trace_seed" + std::to_string(seed) + ".tsv";
            std::ofstream os(trace_path);
            write_trace(trace, os);
            man.set("trace_file", fs::path(trace_path).filename().string());
            const auto hyp = out_dir + "/final_seed" + std::to_string(seed) + ".hyp";
            save_hypothesis(trace.hypotheses.back(), hyp);
            man.set("final_file", fs::path(hyp).filename().string());
            man.save(out_dir + "/run_seed" + std::to_string(seed) + ".manifest");
        }
    });

    std::ostringstream table;
    table << "dataset\talgo\tmodel\tparam\tseed\ttrain\ttest\n";
    std::vector<double> cs, cmu;
    for (const auto& row : rows) {
        table << data_args.name() << '\t' << algo << '\t' << model_args.kind << "\t-\t" << row.seed
              << '\t' << format_risk(row.c_s) << '\t' << format_risk(row.c_mu) << '\n';
        cs.push_back(row.c_s);
        cmu.push_back(row.c_mu);
    }
    table << data_args.name() << '\t' << algo << '\t' << model_args.kind << "\t-\tmedian\t"
          << format_risk(median(cs)) << '\t' << format_risk(median(cmu)) << '\n';
    std::cout << table.str();
    for (const auto& block : cert_blocks)
        if (!block.empty()) std::cout << block;
    if (!out_dir.empty()) {
        std::ofstream os(out_dir + "/rows.tsv");
        os << table.str();
    }
    return 0;
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

int cmd_certify(const std::string& manifest_path, const DataArgs& data_args,
                const std::string& theorem, double delta, const std::string& lipschitz_text,
                std::size_t empirical_pairs, double user_eta, std::size_t card_h,
                const std::string& trace_path) {
    // Path-driven online certificate straight from an exported trace.
    if (!trace_path.empty()) {
        std::ifstream is(trace_path);
        if (!is) throw CLI::ValidationError("cannot open trace: " + trace_path);
        const auto distances = read_trace_distances(is);
        const double lips = std::stod(lipschitz_text);
        bound_online_nonneg(distances, lips, LipschitzProvenance::UserSupplied, distances.size(),
                            delta)
            .print(std::cout);
        return 0;
    }

    const Manifest man = Manifest::load(manifest_path);
    const fs::path dir = fs::path(manifest_path).parent_path();
    const Dataset full = data_args.load();
    if (man.get_u64("dataset_hash") != full.content_hash())
        std::cerr << "warning: dataset hash differs from the manifest; certificates may not "
                     "correspond to the recorded run\n";
    const std::uint64_t seed = man.get_u64("seed");
    const auto split = split_halves(full, seed);

    LossConfig loss;
    loss.eta = man.has("eta") ? man.get_double("eta") : user_eta;
    loss.normalization = man.has("normalization") && man.get("normalization") == "classes-minus-one"
                             ? Normalization::OverClassesMinusOne
                             : Normalization::OverClasses;

    const Hypothesis posterior = load_hypothesis((dir / man.get("posterior_file")).string());
    std::vector<Hypothesis> priors;
    for (std::size_t i = 0; man.has("prior_file_" + std::to_string(i)); ++i)
        priors.push_back(load_hypothesis((dir / man.get("prior_file_" + std::to_string(i))).string()));
    if (priors.empty())
        throw CLI::ValidationError("manifest has no prior files; batch certificates need an alg1 run");

    double lips;
    LipschitzProvenance prov;
    if (lipschitz_text == "lemma") {
        lips = lipschitz_constant(posterior.spec, loss, LipschitzMode::LemmaLinear);
        prov = LipschitzProvenance::LemmaProved;
    } else if (lipschitz_text == "sqrt2") {
        lips = lipschitz_constant(posterior.spec, loss, LipschitzMode::Sqrt2Linear);
        prov = LipschitzProvenance::UserSupplied;  // smaller unproved constant, opt-in
    } else if (lipschitz_text == "empirical") {
        lips = lipschitz_constant(posterior.spec, loss, LipschitzMode::Empirical,
                                  empirical_pairs, seed);
        prov = LipschitzProvenance::EmpiricalEstimate;
    } else {
        lips = std::stod(lipschitz_text);
        prov = LipschitzProvenance::UserSupplied;
    }

    // Rebuild the partition sizes and Dirac Wasserstein terms.
    std::vector<std::size_t> sizes;
    {
        std::stringstream ss(man.get("set_sizes"));
        std::string tok;
        while (std::getline(ss, tok, ',')) sizes.push_back(std::stoul(tok));
    }
    const std::size_t m = man.get_u64("train_size");
    const std::size_t k = sizes.size();
    std::vector<WassersteinTerm> terms;
    for (std::size_t i = 0; i < k; ++i)
        terms.push_back({sizes[i], param_distance(posterior, priors[i])});

    BoundCertificate cert;
    if (theorem == "nonneg") {
        cert = bound_batch_nonneg(terms, lips, prov, m, k, delta);
    } else if (theorem == "tight") {
        cert = bound_batch_tight(terms, lips, prov, m, k, delta);
    } else if (theorem == "heavy") {
        const auto partition = make_partition(m, k, seed);
        std::vector<double> lambdas;
        std::vector<VariancePair> vars;
        for (std::size_t i = 0; i < k; ++i) {
            const auto vp = estimate_variances(priors[i], split.train.view(), partition.sets[i],
                                               split.eval.view(), loss);
            const double sum = vp.empirical + vp.population;
            lambdas.push_back(sum > 0.0
                                  ? std::sqrt(2.0 * std::log(static_cast<double>(k) / delta) / sum)
                                  : 1.0);
            vars.push_back(vp);
        }
        cert = bound_batch_heavy(terms, lips, prov, m, k, delta, lambdas, vars);
    } else if (theorem == "finite-h") {
        double max_w = 0.0;
        for (const auto& t : terms) max_w = std::max(max_w, t.w1);
        cert = bound_finite_h(card_h, lips, prov, max_w, m, delta);
    } else {
        throw CLI::ValidationError("unknown --theorem: " + theorem);
    }
    cert.print(std::cout);
    if (std::fabs(cert.total - cert.recompute_total()) > 1e-12)
        throw std::runtime_error("certificate failed its self-consistency check");

    const auto moments = estimate_moments(priors, split.eval.view(), loss);
    std::cout << "prior second moments (heldout plug-in):";
    for (double v : moments.second_moments) std::cout << ' ' << v;
    std::cout << "\nmoment precondition (max <= 1): "
              << (moments.satisfied ? "holds" : "VIOLATED") << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// emd / report
// ---------------------------------------------------------------------------

int cmd_emd(const std::string& mu_path, const std::string& nu_path, bool brute) {
    const auto mu = read_measure(mu_path);
    const auto nu = read_measure(nu_path);
    const double v = brute ? w1_brute_force(mu, nu, euclidean_metric)
                           : w1_exact(mu, nu, euclidean_metric);
    std::cout.precision(17);
    std::cout << v << '\n';
    return 0;
}

int cmd_report(const std::vector<std::string>& row_files, const std::string& out) {
    // method key = algo(param); cell = the median train/test pair
    std::map<std::string, std::map<std::string, std::pair<std::string, std::string>>> grid;
    std::vector<std::string> method_order, dataset_order;
    for (const auto& file : row_files) {
        std::ifstream is(file);
        if (!is) throw CLI::ValidationError("cannot open rows file: " + file);
        std::string line;
        std::getline(is, line);
        if (line != "dataset\talgo\tmodel\tparam\tseed\ttrain\ttest")
            throw CLI::ValidationError("unexpected rows header in " + file);
        while (std::getline(is, line)) {
            std::stringstream ss(line);
            std::string dataset, algo, model, param, seed, train, test;
            if (!std::getline(ss, dataset, '\t') || !std::getline(ss, algo, '\t') ||
                !std::getline(ss, model, '\t') || !std::getline(ss, param, '\t') ||
                !std::getline(ss, seed, '\t') || !std::getline(ss, train, '\t') ||
                !std::getline(ss, test, '\t'))
                throw CLI::ValidationError("malformed row in " + file + ": " + line);
            if (seed != "median") continue;
            const std::string method = param == "-" ? algo : algo + "(" + param + ")";
            if (grid.find(dataset) == grid.end()) dataset_order.push_back(dataset);
            if (std::find(method_order.begin(), method_order.end(), method) == method_order.end())
                method_order.push_back(method);
            grid[dataset][method] = {train, test};
        }
    }
    std::ostringstream table;
    table << "dataset";
    for (const auto& mth : method_order) table << '\t' << mth << ":train\t" << mth << ":test";
    table << "\tbest\n";
    for (const auto& dataset : dataset_order) {
        table << dataset;
        std::string best_method;
        double best_test = std::numeric_limits<double>::infinity();
        for (const auto& mth : method_order) {
            auto it = grid[dataset].find(mth);
            if (it == grid[dataset].end()) {
                table << "\t-\t-";
                continue;
            }
            table << '\t' << it->second.first << '\t' << it->second.second;
            const double test = std::stod(it->second.second);
            if (test < best_test) {
                best_test = test;
                best_method = mth;
            }
        }
        table << '\t' << best_method << '\n';
    }
    std::cout << table.str();
    if (!out.empty()) {
        std::ofstream os(out);
        os << table.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wasserstein-regularised learning with generalisation certificates"};
    app.require_subcommand(1);

    // ingest ----------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "load, normalise and store a dataset");
    ingest->add_option("--config", "key=value configuration file; flags take precedence")->type_name("FILE");
    DataArgs ingest_data;
    ingest_data.attach(ingest);
    std::string ingest_out;
    std::size_t ingest_subsample = 0;
    std::uint64_t ingest_seed = 0;
    bool ingest_raw = false;
    ingest->add_option("--out", ingest_out, "output .pbwd path");
    ingest->add_option("--subsample", ingest_subsample, "keep a seeded subsample of this size");
    ingest->add_option("--seed", ingest_seed, "subsample seed");
    ingest->add_flag("--no-normalize", ingest_raw, "skip the unit-ball normalisation");

    // train-batch -----------------------------------------------------------
    auto* tb = app.add_subcommand("train-batch", "two-phase batch algorithm and baselines");
    tb->add_option("--config", "key=value configuration file; flags take precedence")->type_name("FILE");
    DataArgs tb_data;
    tb_data.attach(tb);
    ModelArgs tb_model;
    tb_model.attach(tb);
    std::string tb_algo = "alg1";
    std::string tb_epsilon = "inv_sqrt_m";
    std::string tb_seeds = "1";
    std::string tb_out;
    std::string tb_normalization = "classes";
    BatchConfig tb_cfg;
    tb->add_option("--algo", tb_algo, "alg1 | erm | l2")
        ->check(CLI::IsMember({"alg1", "erm", "l2"}));
    tb->add_option("--epsilon", tb_epsilon, "inv_m | inv_sqrt_m | <real>");
    tb->add_option("--k-alpha", tb_cfg.k_alpha, "K = max(1, round(k_alpha sqrt(m)))");
    tb->add_option("--batch-size", tb_cfg.batch_size, "mini-batch size");
    tb->add_option("--min-iterations", tb_cfg.min_iterations, "minimum optimizer steps");
    tb->add_option("--eta", tb_cfg.loss.eta, "margin scale");
    tb->add_option("--normalization", tb_normalization, "classes | classes-minus-one")
        ->check(CLI::IsMember({"classes", "classes-minus-one"}));
    tb->add_option("--cocob-alpha", tb_cfg.cocob_alpha, "optimizer damping");
    tb->add_flag("--final-iterate", tb_cfg.final_iterate,
                 "return the last iterate instead of the best-objective one");
    tb->add_option("--seeds", tb_seeds, "comma-separated seed list");
    tb->add_option("--seed", tb_seeds, "single seed (alias of --seeds)");
    tb->add_option("--out", tb_out, "output directory");

    // train-online ----------------------------------------------------------
    auto* to = app.add_subcommand("train-online", "per-example constrained descent and OGD");
    to->add_option("--config", "key=value configuration file; flags take precedence")->type_name("FILE");
    DataArgs to_data;
    to_data.attach(to);
    ModelArgs to_model;
    to_model.attach(to);
    std::string to_algo = "alg2";
    std::string to_seeds = "1";
    std::string to_out;
    std::size_t to_max = 0;
    bool to_certify = false;
    bool to_persistent = false;
    double to_delta = 0.05;
    OnlineConfig to_cfg;
    to->add_option("--algo", to_algo, "alg2 | ogd")->check(CLI::IsMember({"alg2", "ogd"}));
    to->add_option("--inner-steps", to_cfg.inner_steps, "optimizer steps per example");
    to->add_option("--barrier-t", to_cfg.barrier_t, "log-barrier slope");
    to->add_option("--radius", to_cfg.radius, "constraint radius");
    to->add_option("--eta", to_cfg.loss.eta, "margin scale");
    to->add_option("--eval-subsample", to_cfg.eval_subsample,
                   "eval points per per-step risk estimate");
    to->add_flag("--plain-distance", to_cfg.include_plain_distance,
                 "add the plain distance term to the per-example objective");
    to->add_flag("--persistent-optimizer", to_persistent,
                 "carry optimizer state across examples instead of resetting");
    to->add_option("--max-examples", to_max, "use only a prefix of the training stream");
    to->add_option("--seeds", to_seeds, "comma-separated seed list");
    to->add_option("--seed", to_seeds, "single seed (alias of --seeds)");
    to->add_option("--out", to_out, "output directory");
    to->add_flag("--certify", to_certify, "print online certificates after training");
    to->add_option("--delta", to_delta, "confidence for --certify");

    // certify ---------------------------------------------------------------
    auto* ce = app.add_subcommand("certify", "evaluate bound certificates for a finished run");
    DataArgs ce_data;
    ce_data.attach(ce);
    std::string ce_manifest, ce_theorem = "nonneg", ce_lipschitz = "lemma", ce_trace;
    double ce_delta = 0.05, ce_eta = 1.0;
    std::size_t ce_pairs = 1000, ce_cardh = 1;
    ce->add_option("--manifest", ce_manifest, "run manifest from train-batch");
    ce->add_option("--trace", ce_trace, "online trace file (path-driven certificate)");
    ce->add_option("--theorem", ce_theorem, "nonneg | tight | heavy | finite-h");
    ce->add_option("--delta", ce_delta, "confidence parameter");
    ce->add_option("--lipschitz", ce_lipschitz,
                   "lemma | sqrt2 | empirical | <value>; provenance is printed");
    ce->add_option("--empirical-pairs", ce_pairs, "samples for --lipschitz empirical");
    ce->add_option("--eta", ce_eta, "margin scale when no manifest is given");
    ce->add_option("--card-h", ce_cardh, "hypothesis count for --theorem finite-h");

    // emd -------------------------------------------------------------------
    auto* emd = app.add_subcommand("emd", "exact W1 between two measure files");
    std::string emd_mu, emd_nu;
    bool emd_brute = false;
    emd->add_option("--mu", emd_mu, "first measure file")->required();
    emd->add_option("--nu", emd_nu, "second measure file")->required();
    emd->add_flag("--brute-force", emd_brute, "permutation enumeration (uniform, n <= 6)");

    // report ----------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "merge rows files into one table");
    std::vector<std::string> rep_files;
    std::string rep_out;
    rep->add_option("rows", rep_files, "rows.tsv files");
    rep->add_option("--out", rep_out, "write the table here as well");

    std::vector<std::string> args;
    try {
        args = expand_args(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*ingest)
            return cmd_ingest(ingest_data, ingest_out, ingest_subsample, ingest_seed, ingest_raw);
        if (*tb) {
            tb_cfg.loss.normalization = tb_normalization == "classes"
                                            ? Normalization::OverClasses
                                            : Normalization::OverClassesMinusOne;
            return cmd_train_batch(tb_data, tb_model, tb_algo, tb_cfg, tb_epsilon,
                                   parse_seeds(tb_seeds), tb_out);
        }
        if (*to) {
            to_cfg.reset_optimizer_per_example = !to_persistent;
            return cmd_train_online(to_data, to_model, to_algo, to_cfg, to_max,
                                    parse_seeds(to_seeds), to_out, to_certify, to_delta);
        }
        if (*ce)
            return cmd_certify(ce_manifest, ce_data, ce_theorem, ce_delta, ce_lipschitz, ce_pairs,
                               ce_eta, ce_cardh, ce_trace);
        if (*emd) return cmd_emd(emd_mu, emd_nu, emd_brute);
        if (*rep) return cmd_report(rep_files, rep_out);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
