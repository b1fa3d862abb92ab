#pragma once

// Numeric evaluation of the generalisation-bound family: the batch bounds
// (heavy-tailed, non-negative, and the tight [0,1] variant), the online
// bounds, and the finite-hypothesis-class corollary. Every certificate is
// itemised so the total can be recomputed from its stored components, and
// the Lipschitz constant always carries its provenance.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "loss.hpp"
#include "model.hpp"

namespace pbw {

enum class BoundTheorem { BatchHeavy, BatchNonNeg, BatchTight, OnlineHeavy, OnlineNonNeg, FiniteH };

enum class LipschitzProvenance { LemmaProved, UserSupplied, EmpiricalEstimate };

inline const char* to_string(BoundTheorem t) {
    switch (t) {
        case BoundTheorem::BatchHeavy: return "batch-heavy";
        case BoundTheorem::BatchNonNeg: return "batch-nonneg";
        case BoundTheorem::BatchTight: return "batch-tight";
        case BoundTheorem::OnlineHeavy: return "online-heavy";
        case BoundTheorem::OnlineNonNeg: return "online-nonneg";
        case BoundTheorem::FiniteH: return "finite-h";
    }
    return "?";
}

inline const char* to_string(LipschitzProvenance p) {
    switch (p) {
        case LipschitzProvenance::LemmaProved: return "lemma-proved";
        case LipschitzProvenance::UserSupplied: return "user-supplied";
        case LipschitzProvenance::EmpiricalEstimate: return "empirical-estimate (heuristic, not a proof)";
    }
    return "?";
}

struct WassersteinTerm {
    std::size_t set_size = 0;  // |S_i| for batch bounds; 1 per step for online
    double w1 = 0.0;
};

struct VariancePair {
    double empirical = 0.0;   // plug-in for the empirical variance term
    double population = 0.0;  // plug-in for its expectation
};

struct BoundCertificate {
    BoundTheorem theorem = BoundTheorem::BatchNonNeg;
    double delta = 0.05;
    double lipschitz = 0.0;
    LipschitzProvenance lipschitz_provenance = LipschitzProvenance::UserSupplied;
    std::size_t m = 0;
    std::size_t K = 1;
    std::size_t hypothesis_count = 0;  // finite-H only
    std::vector<WassersteinTerm> wasserstein_terms;
    std::vector<double> lambdas;
    std::vector<VariancePair> variance_terms;
    double wasserstein_total = 0.0;
    double statistical_term = 0.0;
    double total = 0.0;

    /// Re-derives the total from the stored components; self-consistency is
    /// asserted to 1e-12 in tests and checked by the CLI.
    double recompute_total() const {
        double w = 0.0, stat = 0.0;
        const double md = static_cast<double>(m);
        switch (theorem) {
            case BoundTheorem::BatchHeavy:
                for (const auto& t : wasserstein_terms)
                    w += 2.0 * static_cast<double>(t.set_size) * lipschitz * t.w1 / md;
                for (std::size_t i = 0; i < lambdas.size(); ++i)
                    stat += std::log(static_cast<double>(K) / delta) / lambdas[i] / md +
                            lambdas[i] / (2.0 * md) *
                                (variance_terms[i].empirical + variance_terms[i].population);
                break;
            case BoundTheorem::BatchNonNeg:
                for (const auto& t : wasserstein_terms) {
                    w += 2.0 * static_cast<double>(t.set_size) * lipschitz * t.w1 / md;
                    stat += std::sqrt(2.0 * static_cast<double>(t.set_size) *
                                      std::log(static_cast<double>(K) / delta) / (md * md));
                }
                break;
            case BoundTheorem::BatchTight:
                for (const auto& t : wasserstein_terms) {
                    w += 2.0 * static_cast<double>(t.set_size) * lipschitz * t.w1 / md;
                    stat += std::sqrt(static_cast<double>(t.set_size) *
                                      std::log(static_cast<double>(K) / delta) / (2.0 * md * md));
                }
                break;
            case BoundTheorem::OnlineNonNeg:
                for (const auto& t : wasserstein_terms) w += 2.0 * lipschitz * t.w1 / md;
                stat = std::sqrt(2.0 * std::log(1.0 / delta) / md);
                break;
            case BoundTheorem::OnlineHeavy:
                for (const auto& t : wasserstein_terms) w += 2.0 * lipschitz * t.w1;
                for (const auto& v : variance_terms)
                    stat += lambdas.front() / 2.0 * (v.empirical + v.population);
                stat += std::log(1.0 / delta) / lambdas.front();
                break;
            case BoundTheorem::FiniteH:
                w = lipschitz *
                    std::sqrt(2.0 * std::log(4.0 * static_cast<double>(hypothesis_count) *
                                             static_cast<double>(hypothesis_count) / delta) /
                              md) *
                    wasserstein_terms.front().w1;
                stat = 2.0 * std::sqrt(std::log(2.0 / delta) / md);
                break;
        }
        return w + stat;
    }

    /// Itemised table: component, formula, value. The online-heavy variant
    /// bounds the cumulative (unnormalised) gap; all others bound the
    /// average gap.
    void print(std::ostream& os) const {
        auto row = [&os](const std::string& component, const std::string& formula, double value) {
            os << std::left << std::setw(22) << component << std::setw(46) << formula << std::setprecision(12)
               << value << '\n';
        };
        os << "certificate: " << to_string(theorem)
           << (theorem == BoundTheorem::OnlineHeavy ? "  (bounds the cumulative, unnormalised gap)"
                                                    : "  (bounds the average gap)")
           << '\n';
        if (theorem == BoundTheorem::BatchTight || theorem == BoundTheorem::FiniteH)
            os << "note: this variant assumes the loss takes values in [0, 1]\n";
        os << "lipschitz provenance: " << to_string(lipschitz_provenance) << '\n';
        row("delta", "confidence parameter", delta);
        row("L", "loss Lipschitz constant", lipschitz);
        row("m", "sample size", static_cast<double>(m));
        if (theorem == BoundTheorem::BatchHeavy || theorem == BoundTheorem::BatchNonNeg ||
            theorem == BoundTheorem::BatchTight)
            row("K", "number of prior sets", static_cast<double>(K));
        if (theorem == BoundTheorem::FiniteH)
            row("|H|", "hypothesis count", static_cast<double>(hypothesis_count));
        switch (theorem) {
            case BoundTheorem::BatchHeavy:
                row("wasserstein", "sum_i 2|S_i| L W_i / m", wasserstein_total);
                row("statistical", "sum_i [ln(K/d)/(l_i m) + l_i(Vh_i+V_i)/(2m)]", statistical_term);
                break;
            case BoundTheorem::BatchNonNeg:
                row("wasserstein", "sum_i 2|S_i| L W_i / m", wasserstein_total);
                row("statistical", "sum_i sqrt(2|S_i| ln(K/d) / m^2)", statistical_term);
                break;
            case BoundTheorem::BatchTight:
                row("wasserstein", "sum_i 2|S_i| L W_i / m", wasserstein_total);
                row("statistical", "sum_i sqrt(|S_i| ln(K/d) / (2 m^2))", statistical_term);
                break;
            case BoundTheorem::OnlineNonNeg:
                row("wasserstein", "(2L/m) sum_i W_i  [path length]", wasserstein_total);
                row("statistical", "sqrt(2 ln(1/d) / m)", statistical_term);
                break;
            case BoundTheorem::OnlineHeavy:
                row("wasserstein", "2L sum_i W_i  [path length]", wasserstein_total);
                row("statistical", "(l/2) sum_i (Vh_i+V_i) + ln(1/d)/l", statistical_term);
                break;
            case BoundTheorem::FiniteH:
                row("wasserstein", "L sqrt(2 ln(4|H|^2/d)/m) W", wasserstein_total);
                row("statistical", "2 sqrt(ln(2/d)/m)", statistical_term);
                break;
        }
        row("total", "wasserstein + statistical", total);
    }
};

namespace detail {

inline void check_delta(double delta) {
    if (!(delta > 0.0) || delta > 1.0)
        throw std::invalid_argument("bound: delta must lie in (0, 1]");
}

inline void check_batch_terms(const std::vector<WassersteinTerm>& terms, std::size_t m,
                              std::size_t K) {
    if (terms.size() != K) throw std::invalid_argument("bound: need one term per prior set");
    std::size_t total = 0;
    for (const auto& t : terms) {
        if (!(t.w1 >= 0.0)) throw std::invalid_argument("bound: negative Wasserstein term");
        total += t.set_size;
    }
    if (total != m) throw std::invalid_argument("bound: set sizes must sum to m");
}

}  // namespace detail

inline BoundCertificate bound_batch_nonneg(std::vector<WassersteinTerm> terms, double lipschitz,
                                           LipschitzProvenance prov, std::size_t m, std::size_t K,
                                           double delta) {
    detail::check_delta(delta);
    detail::check_batch_terms(terms, m, K);
    BoundCertificate cert;
    cert.theorem = BoundTheorem::BatchNonNeg;
    cert.delta = delta;
    cert.lipschitz = lipschitz;
    cert.lipschitz_provenance = prov;
    cert.m = m;
    cert.K = K;
    cert.wasserstein_terms = std::move(terms);
    const double md = static_cast<double>(m);
    for (const auto& t : cert.wasserstein_terms) {
        cert.wasserstein_total += 2.0 * static_cast<double>(t.set_size) * lipschitz * t.w1 / md;
        cert.statistical_term += std::sqrt(2.0 * static_cast<double>(t.set_size) *
                                           std::log(static_cast<double>(K) / delta) / (md * md));
    }
    cert.total = cert.wasserstein_total + cert.statistical_term;
    return cert;
}

/// The [0,1]-loss variant; the caller asserts the loss range by calling it.
/// Same Wasserstein component, statistical term halved inside the root.
inline BoundCertificate bound_batch_tight(std::vector<WassersteinTerm> terms, double lipschitz,
                                          LipschitzProvenance prov, std::size_t m, std::size_t K,
                                          double delta) {
    detail::check_delta(delta);
    detail::check_batch_terms(terms, m, K);
    BoundCertificate cert;
    cert.theorem = BoundTheorem::BatchTight;
    cert.delta = delta;
    cert.lipschitz = lipschitz;
    cert.lipschitz_provenance = prov;
    cert.m = m;
    cert.K = K;
    cert.wasserstein_terms = std::move(terms);
    const double md = static_cast<double>(m);
    for (const auto& t : cert.wasserstein_terms) {
        cert.wasserstein_total += 2.0 * static_cast<double>(t.set_size) * lipschitz * t.w1 / md;
        cert.statistical_term += std::sqrt(static_cast<double>(t.set_size) *
                                           std::log(static_cast<double>(K) / delta) /
                                           (2.0 * md * md));
    }
    cert.total = cert.wasserstein_total + cert.statistical_term;
    return cert;
}

inline BoundCertificate bound_batch_heavy(std::vector<WassersteinTerm> terms, double lipschitz,
                                          LipschitzProvenance prov, std::size_t m, std::size_t K,
                                          double delta, std::vector<double> lambdas,
                                          std::vector<VariancePair> variances) {
    detail::check_delta(delta);
    detail::check_batch_terms(terms, m, K);
    if (lambdas.size() != K || variances.size() != K)
        throw std::invalid_argument("bound: need one lambda and one variance pair per set");
    for (double l : lambdas)
        if (!(l > 0.0)) throw std::invalid_argument("bound: lambdas must be positive");
    BoundCertificate cert;
    cert.theorem = BoundTheorem::BatchHeavy;
    cert.delta = delta;
    cert.lipschitz = lipschitz;
    cert.lipschitz_provenance = prov;
    cert.m = m;
    cert.K = K;
    cert.wasserstein_terms = std::move(terms);
    cert.lambdas = std::move(lambdas);
    cert.variance_terms = std::move(variances);
    const double md = static_cast<double>(m);
    for (const auto& t : cert.wasserstein_terms)
        cert.wasserstein_total += 2.0 * static_cast<double>(t.set_size) * lipschitz * t.w1 / md;
    for (std::size_t i = 0; i < cert.lambdas.size(); ++i)
        cert.statistical_term +=
            std::log(static_cast<double>(K) / delta) / cert.lambdas[i] / md +
            cert.lambdas[i] / (2.0 * md) *
                (cert.variance_terms[i].empirical + cert.variance_terms[i].population);
    cert.total = cert.wasserstein_total + cert.statistical_term;
    return cert;
}

/// Online bound for non-negative losses; with a Dirac chain of priors the
/// path entries are the consecutive parameter distances and their sum is the
/// trace path length.
inline BoundCertificate bound_online_nonneg(const std::vector<double>& path_w1, double lipschitz,
                                            LipschitzProvenance prov, std::size_t m, double delta) {
    detail::check_delta(delta);
    if (path_w1.size() != m)
        throw std::invalid_argument("bound: m must equal the number of path entries");
    BoundCertificate cert;
    cert.theorem = BoundTheorem::OnlineNonNeg;
    cert.delta = delta;
    cert.lipschitz = lipschitz;
    cert.lipschitz_provenance = prov;
    cert.m = m;
    cert.K = 1;
    const double md = static_cast<double>(m);
    for (double w : path_w1) {
        if (!(w >= 0.0)) throw std::invalid_argument("bound: negative path entry");
        cert.wasserstein_terms.push_back({1, w});
        cert.wasserstein_total += 2.0 * lipschitz * w / md;
    }
    cert.statistical_term = std::sqrt(2.0 * std::log(1.0 / delta) / md);
    cert.total = cert.wasserstein_total + cert.statistical_term;
    return cert;
}

/// Online heavy-tailed bound. Bounds the cumulative (unnormalised) gap, not
/// its average; the certificate records this.
inline BoundCertificate bound_online_heavy(const std::vector<double>& path_w1, double lipschitz,
                                           LipschitzProvenance prov, double delta, double lambda,
                                           std::vector<VariancePair> variances) {
    detail::check_delta(delta);
    if (!(lambda > 0.0)) throw std::invalid_argument("bound: lambda must be positive");
    if (variances.size() != path_w1.size())
        throw std::invalid_argument("bound: need one variance pair per step");
    BoundCertificate cert;
    cert.theorem = BoundTheorem::OnlineHeavy;
    cert.delta = delta;
    cert.lipschitz = lipschitz;
    cert.lipschitz_provenance = prov;
    cert.m = path_w1.size();
    cert.K = 1;
    cert.lambdas = {lambda};
    cert.variance_terms = std::move(variances);
    for (double w : path_w1) {
        if (!(w >= 0.0)) throw std::invalid_argument("bound: negative path entry");
        cert.wasserstein_terms.push_back({1, w});
        cert.wasserstein_total += 2.0 * lipschitz * w;
    }
    for (const auto& v : cert.variance_terms)
        cert.statistical_term += lambda / 2.0 * (v.empirical + v.population);
    cert.statistical_term += std::log(1.0 / delta) / lambda;
    cert.total = cert.wasserstein_total + cert.statistical_term;
    return cert;
}

/// Finite hypothesis class corollary with an explicit rate.
inline BoundCertificate bound_finite_h(std::size_t hypothesis_count, double lipschitz,
                                       LipschitzProvenance prov, double w1, std::size_t m,
                                       double delta) {
    detail::check_delta(delta);
    if (hypothesis_count < 1) throw std::invalid_argument("bound: need at least one hypothesis");
    if (!(w1 >= 0.0)) throw std::invalid_argument("bound: negative Wasserstein term");
    BoundCertificate cert;
    cert.theorem = BoundTheorem::FiniteH;
    cert.delta = delta;
    cert.lipschitz = lipschitz;
    cert.lipschitz_provenance = prov;
    cert.m = m;
    cert.K = 1;
    cert.hypothesis_count = hypothesis_count;
    cert.wasserstein_terms = {{m, w1}};
    const double md = static_cast<double>(m);
    cert.wasserstein_total =
        lipschitz *
        std::sqrt(2.0 * std::log(4.0 * static_cast<double>(hypothesis_count) *
                                 static_cast<double>(hypothesis_count) / delta) / md) *
        w1;
    cert.statistical_term = 2.0 * std::sqrt(std::log(2.0 / delta) / md);
    cert.total = cert.wasserstein_total + cert.statistical_term;
    return cert;
}

// --------------------------------------------------------------------------
// Plug-in estimators for the moment preconditions and variance terms. The
// unknown population risk inside the empirical variance is replaced by the
// held-out-half risk; Dirac priors make every prior expectation a point
// evaluation.
// --------------------------------------------------------------------------

struct MomentReport {
    std::vector<double> second_moments;  // one per prior (or per online step)
    std::vector<std::size_t> sample_counts;
    double max_moment = 0.0;
    bool satisfied = false;  // max <= 1, the bounded-order-2-moment precondition
};

/// Second moments E[loss^2] of each Dirac prior over the evaluation data.
inline MomentReport estimate_moments(std::span<const Hypothesis> priors, const DataView& eval_data,
                                     const LossConfig& cfg) {
    if (eval_data.size() == 0) throw std::invalid_argument("moments: empty evaluation data");
    MomentReport rep;
    for (const auto& h : priors) {
        double acc = 0.0;
        for (std::size_t i = 0; i < eval_data.size(); ++i) {
            const double l = margin_loss(forward(h, eval_data.row(i)),
                                         static_cast<std::size_t>(eval_data.labels[i]), cfg);
            acc += l * l;
        }
        rep.second_moments.push_back(acc / static_cast<double>(eval_data.size()));
        rep.sample_counts.push_back(eval_data.size());
        rep.max_moment = std::max(rep.max_moment, rep.second_moments.back());
    }
    rep.satisfied = rep.max_moment <= 1.0;
    return rep;
}

/// Plug-in variance pair for one prior and its excluded set: the empirical
/// term sums (loss - heldout_risk)^2 over the set itself, the population
/// term is the held-out analogue scaled to the set size.
inline VariancePair estimate_variances(const Hypothesis& prior, const DataView& set_data,
                                       std::span<const std::size_t> set_indices,
                                       const DataView& eval_data, const LossConfig& cfg) {
    if (eval_data.size() == 0) throw std::invalid_argument("variance: empty evaluation data");
    const double heldout_risk = mean_margin_loss(prior, eval_data, all_indices(eval_data.size()), cfg);
    VariancePair vp;
    for (std::size_t i : set_indices) {
        const double l = margin_loss(forward(prior, set_data.row(i)),
                                     static_cast<std::size_t>(set_data.labels[i]), cfg);
        vp.empirical += (l - heldout_risk) * (l - heldout_risk);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < eval_data.size(); ++i) {
        const double l = margin_loss(forward(prior, eval_data.row(i)),
                                     static_cast<std::size_t>(eval_data.labels[i]), cfg);
        acc += (l - heldout_risk) * (l - heldout_risk);
    }
    vp.population = static_cast<double>(set_indices.size()) * acc /
                    static_cast<double>(eval_data.size());
    return vp;
}

}  // namespace pbw
