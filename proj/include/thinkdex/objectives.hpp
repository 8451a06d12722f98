#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "thinkdex/decoder.hpp"
#include "thinkdex/errors.hpp"

namespace thinkdex {

// ---------------------------------------------------------------------------
// Supervised fine-tuning objective
// ---------------------------------------------------------------------------

/// Per-example target-token log-probabilities. All values must be <= 0.
struct SftBatch {
    std::vector<std::vector<double>> examples;
};

/// Mean over examples of the per-example token-sum negative log-likelihood.
inline double sft_nll(const SftBatch& batch) {
    if (batch.examples.empty()) throw EmptyBatch("sft batch is empty");
    double total = 0.0;
    for (const auto& ex : batch.examples) {
        if (ex.empty()) throw EmptyBatch("sft batch contains an empty example");
        double s = 0.0;
        for (double lp : ex) {
            if (lp > 0.0 || !std::isfinite(lp)) throw InvalidLogProb(std::to_string(lp));
            s += lp;
        }
        total += -s;
    }
    return total / static_cast<double>(batch.examples.size());
}

// ---------------------------------------------------------------------------
// Retrieval accuracy and desirability partitioning
// ---------------------------------------------------------------------------

template <typename Container>
inline double acc_r(const Container& predicted, const std::set<std::string>& gold) {
    if (gold.empty()) throw EmptyGold("gold document set is empty");
    size_t hit = 0;
    for (const auto& id : predicted)
        if (gold.count(id)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(gold.size());
}

enum class Desirability : uint8_t { desirable, undesirable };

/// desirable iff accuracy is exactly 1; undesirable iff strictly below tau;
/// the band [tau, 1) is unlabeled and the sample is discarded.
inline std::optional<Desirability> label_sample(double acc, double tau) {
    if (acc == 1.0) return Desirability::desirable;
    if (acc < tau) return Desirability::undesirable;
    return std::nullopt;
}

struct KtoConfig {
    double beta = 0.1;
    double tau = 0.5;
    double lambda_d = 1.0;
    double lambda_u = 1.0;
    enum class ValueFn : uint8_t { linear, logistic } value_fn = ValueFn::linear;
    /// When set, lambda_u is derived as lambda_d * n_desirable / n_undesirable.
    bool lambda_auto = false;
};

struct PartitionResult {
    std::vector<size_t> desirable;
    std::vector<size_t> undesirable;
    std::vector<size_t> discarded;
    std::vector<double> acc;  // per input sample
};

/// Partitions decoded samples against their gold sets by retrieval accuracy.
inline PartitionResult partition(const std::vector<std::pair<DecodedSequence, std::set<std::string>>>& samples,
                                 const KtoConfig& cfg) {
    PartitionResult out;
    out.acc.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        const double a = acc_r(retrieved_docs(samples[i].first), samples[i].second);
        out.acc.push_back(a);
        const auto label = label_sample(a, cfg.tau);
        if (!label)
            out.discarded.push_back(i);
        else if (*label == Desirability::desirable)
            out.desirable.push_back(i);
        else
            out.undesirable.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// KTO loss
// ---------------------------------------------------------------------------

struct KtoExample {
    double logp_policy = 0.0;  // sum log pi_theta(y|x)
    double logp_ref = 0.0;     // sum log pi_ref(y|x)
    Desirability label = Desirability::desirable;
    std::string query_id;
};

enum class MismatchPolicy : uint8_t {
    /// Pair each example's sequence with the next example's position (batch
    /// rotation) and average the resulting policy/reference log-ratios,
    /// clamped at zero.
    batch_rotation,
    /// Disable the reference point (z0 = 0).
    zero,
};

inline double estimate_z0(const std::vector<KtoExample>& batch,
                          MismatchPolicy policy = MismatchPolicy::batch_rotation) {
    if (policy == MismatchPolicy::zero) return 0.0;
    if (batch.size() < 2) throw BatchTooSmall("z0 estimation needs at least 2 examples");
    double sum = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const KtoExample& rotated = batch[(i + 1) % batch.size()];
        sum += rotated.logp_policy - rotated.logp_ref;
    }
    return std::max(0.0, sum / static_cast<double>(batch.size()));
}

struct KtoBatchResult {
    double loss = 0.0;
    double z0 = 0.0;
    double lambda_d = 0.0;
    double lambda_u = 0.0;
    size_t n_desirable = 0;
    size_t n_undesirable = 0;
    std::vector<double> per_example_v;
    std::vector<double> grad_logp_policy;
};

namespace detail {
inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }
}

/// Loss and analytic gradients for a fixed reference point. z0 is treated as
/// a constant (stop-gradient); the finite-difference oracle in the tests
/// freezes it the same way.
inline KtoBatchResult kto_loss_given_z0(const std::vector<KtoExample>& batch, const KtoConfig& cfg,
                                        double z0) {
    if (batch.empty()) throw NoLabeledExamples("kto batch is empty");
    KtoBatchResult res;
    res.z0 = z0;
    for (const auto& ex : batch)
        (ex.label == Desirability::desirable ? res.n_desirable : res.n_undesirable)++;

    res.lambda_d = cfg.lambda_d;
    res.lambda_u = cfg.lambda_u;
    if (cfg.lambda_auto && res.n_undesirable > 0)
        res.lambda_u = cfg.lambda_d * static_cast<double>(res.n_desirable) /
                       static_cast<double>(res.n_undesirable);

    res.per_example_v.resize(batch.size());
    res.grad_logp_policy.resize(batch.size());

    double sum_d = 0.0, sum_u = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const KtoExample& ex = batch[i];
        const double r = ex.logp_policy - ex.logp_ref;
        const bool des = ex.label == Desirability::desirable;
        const double lambda = des ? res.lambda_d : res.lambda_u;
        const double t = des ? cfg.beta * (r - z0) : cfg.beta * (z0 - r);
        double g, gprime;
        if (cfg.value_fn == KtoConfig::ValueFn::linear) {
            g = t;
            gprime = 1.0;
        } else {
            g = detail::logistic(t);
            gprime = g * (1.0 - g);
        }
        const double v = lambda * g;
        // dv/dr; dt/dr is +beta for desirable, -beta for undesirable
        const double dv_dr = lambda * gprime * (des ? cfg.beta : -cfg.beta);
        res.per_example_v[i] = v;
        if (des)
            sum_d += res.lambda_d - v;
        else
            sum_u += res.lambda_u - v;
        const double n_side = static_cast<double>(des ? res.n_desirable : res.n_undesirable);
        res.grad_logp_policy[i] = -dv_dr / n_side;
    }
    res.loss = (res.n_desirable ? sum_d / static_cast<double>(res.n_desirable) : 0.0) +
               (res.n_undesirable ? sum_u / static_cast<double>(res.n_undesirable) : 0.0);
    if (!std::isfinite(res.loss)) throw DivergenceDetected("kto loss is not finite");
    return res;
}

inline KtoBatchResult kto_loss(const std::vector<KtoExample>& batch, const KtoConfig& cfg,
                               MismatchPolicy policy = MismatchPolicy::batch_rotation) {
    if (batch.empty()) throw NoLabeledExamples("kto batch is empty");
    const double z0 = batch.size() >= 2 ? estimate_z0(batch, policy) : 0.0;
    return kto_loss_given_z0(batch, cfg, z0);
}

}  // namespace thinkdex
