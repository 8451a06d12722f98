#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "thinkdex/objectives.hpp"
#include "thinkdex/toy_policy.hpp"

using namespace thinkdex;

TEST(SftNll, PerfectModelIsZero) {
    SftBatch b;
    b.examples = {{0.0, 0.0, 0.0}};
    EXPECT_DOUBLE_EQ(sft_nll(b), 0.0);
}

TEST(SftNll, ClosedForm) {
    SftBatch b;
    b.examples = {{std::log(0.5), std::log(0.5)}};
    EXPECT_NEAR(sft_nll(b), 2.0 * std::log(2.0), 1e-12);
}

TEST(SftNll, MatchesIndependentSummation) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> lp(-3.0, 0.0);
    SftBatch b;
    double expected = 0.0;
    const size_t n_ex = 10, n_tok = 20;
    for (size_t i = 0; i < n_ex; ++i) {
        std::vector<double> ex;
        for (size_t t = 0; t < n_tok; ++t) ex.push_back(lp(rng));
        b.examples.push_back(ex);
    }
    // independent re-summation, different loop order
    for (size_t t = 0; t < n_tok; ++t)
        for (size_t i = 0; i < n_ex; ++i) expected -= b.examples[i][t];
    expected /= static_cast<double>(n_ex);
    EXPECT_NEAR(sft_nll(b), expected, 1e-12);
}

TEST(SftNll, Validation) {
    EXPECT_THROW(sft_nll(SftBatch{}), EmptyBatch);
    EXPECT_THROW(sft_nll(SftBatch{{{}}}), EmptyBatch);
    EXPECT_THROW(sft_nll(SftBatch{{{0.5}}}), InvalidLogProb);
}

TEST(AccR, ClosedForms) {
    const std::set<std::string> gold = {"d1", "d2"};
    EXPECT_DOUBLE_EQ(acc_r(std::set<std::string>{"d1", "d2"}, gold), 1.0);
    EXPECT_DOUBLE_EQ(acc_r(std::set<std::string>{"d9"}, gold), 0.0);
    EXPECT_DOUBLE_EQ(acc_r(std::set<std::string>{"d1", "d3"}, gold), 0.5);
    EXPECT_THROW(acc_r(std::set<std::string>{"d1"}, {}), EmptyGold);
}

TEST(Partition, StrictBoundaries) {
    const double tau = 0.5;
    EXPECT_EQ(label_sample(1.0, tau), Desirability::desirable);
    EXPECT_EQ(label_sample(0.49, tau), Desirability::undesirable);
    EXPECT_EQ(label_sample(0.5, tau), std::nullopt);   // strict <
    EXPECT_EQ(label_sample(0.75, tau), std::nullopt);  // middle band discarded
}

TEST(Partition, PlantedSamplesMatchHandLabels) {
    // 20 planted accuracies; hand-labeled with tau = 0.5
    const std::vector<double> acc = {1.0, 0.0, 0.5,  0.25, 1.0, 0.75, 0.49, 0.51, 0.0, 1.0,
                                     0.2, 0.5, 0.99, 1.0,  0.3, 0.6,  0.45, 0.5,  1.0, 0.1};
    size_t want_d = 0, want_u = 0, want_x = 0;
    for (double a : acc) {
        if (a == 1.0)
            ++want_d;
        else if (a < 0.5)
            ++want_u;
        else
            ++want_x;
    }
    size_t got_d = 0, got_u = 0, got_x = 0;
    for (double a : acc) {
        const auto l = label_sample(a, 0.5);
        if (!l)
            ++got_x;
        else if (*l == Desirability::desirable)
            ++got_d;
        else
            ++got_u;
    }
    EXPECT_EQ(got_d, want_d);
    EXPECT_EQ(got_u, want_u);
    EXPECT_EQ(got_x, want_x);
    EXPECT_EQ(got_d + got_u + got_x, acc.size());
}

TEST(Partition, DecodedSamplesSplitDisjointly) {
    auto sequence_retrieving = [](std::vector<std::string> docs) {
        DecodedSequence seq;
        seq.spans.push_back(ThoughtSpan{});
        seq.spans.push_back(DocidSpan{{}, "<docid_start> x, y, z <docid_end>", std::move(docs)});
        return seq;
    };
    std::vector<std::pair<DecodedSequence, std::set<std::string>>> samples;
    samples.emplace_back(sequence_retrieving({"d1", "d2"}), std::set<std::string>{"d1", "d2"});  // acc 1
    samples.emplace_back(sequence_retrieving({"d9"}), std::set<std::string>{"d1", "d2"});        // acc 0
    samples.emplace_back(sequence_retrieving({"d1"}), std::set<std::string>{"d1", "d2"});        // acc 0.5
    samples.emplace_back(sequence_retrieving({"d1", "d2", "d3"}), std::set<std::string>{"d1"});  // acc 1

    const PartitionResult p = partition(samples, KtoConfig{});
    EXPECT_EQ(p.desirable, (std::vector<size_t>{0, 3}));
    EXPECT_EQ(p.undesirable, (std::vector<size_t>{1}));
    EXPECT_EQ(p.discarded, (std::vector<size_t>{2}));
    EXPECT_EQ(p.desirable.size() + p.undesirable.size() + p.discarded.size(), samples.size());
    EXPECT_DOUBLE_EQ(p.acc[2], 0.5);
}

TEST(EstimateZ0, IdenticalPoliciesGiveZero) {
    std::vector<KtoExample> batch(4);
    for (auto& ex : batch) {
        ex.logp_policy = -3.0;
        ex.logp_ref = -3.0;
    }
    EXPECT_DOUBLE_EQ(estimate_z0(batch), 0.0);
}

TEST(EstimateZ0, ClampsNegativeMean) {
    std::vector<KtoExample> batch(3);
    for (int i = 0; i < 3; ++i) {
        batch[i].logp_policy = -5.0 - i;
        batch[i].logp_ref = -4.0;
    }
    EXPECT_DOUBLE_EQ(estimate_z0(batch), 0.0);
}

TEST(EstimateZ0, PlantedRotatedValues) {
    // rotated log-ratios {0.2, 0.4, -0.1, 0.3}; hand mean = 0.2
    const std::vector<double> r = {0.2, 0.4, -0.1, 0.3};
    std::vector<KtoExample> batch(4);
    for (size_t i = 0; i < 4; ++i) {
        batch[i].logp_ref = -2.0;
        batch[i].logp_policy = -2.0 + r[i];
    }
    EXPECT_NEAR(estimate_z0(batch), 0.2, 1e-12);
}

TEST(EstimateZ0, Errors) {
    std::vector<KtoExample> one(1);
    EXPECT_THROW(estimate_z0(one), BatchTooSmall);
    EXPECT_DOUBLE_EQ(estimate_z0(one, MismatchPolicy::zero), 0.0);
}

TEST(KtoLoss, ClosedFormAtOrigin) {
    // policy = reference everywhere: r = 0, z0 = 0, v = 0, loss = 2
    std::vector<KtoExample> batch(2);
    batch[0] = {-2.0, -2.0, Desirability::desirable, "a"};
    batch[1] = {-3.0, -3.0, Desirability::undesirable, "b"};
    const auto res = kto_loss(batch, KtoConfig{});
    EXPECT_NEAR(res.loss, 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(res.z0, 0.0);
    EXPECT_DOUBLE_EQ(res.per_example_v[0], 0.0);
    EXPECT_DOUBLE_EQ(res.per_example_v[1], 0.0);
}

TEST(KtoLoss, ClosedFormSingleDesirable) {
    // beta = 0.1, r = 1, z0 = 0, linear: v = 0.1, loss = 0.9
    std::vector<KtoExample> batch(1);
    batch[0] = {-1.0, -2.0, Desirability::desirable, "a"};
    const auto res = kto_loss(batch, KtoConfig{});
    EXPECT_NEAR(res.loss, 0.9, 1e-12);
    EXPECT_NEAR(res.per_example_v[0], 0.1, 1e-12);
}

namespace {

std::vector<KtoExample> random_batch(std::mt19937_64& rng, size_t n) {
    std::uniform_real_distribution<double> lp(-12.0, -0.5);
    std::bernoulli_distribution coin(0.5);
    std::vector<KtoExample> batch(n);
    bool any_d = false, any_u = false;
    for (size_t i = 0; i < n; ++i) {
        batch[i].logp_policy = lp(rng);
        batch[i].logp_ref = lp(rng);
        batch[i].label = coin(rng) ? Desirability::desirable : Desirability::undesirable;
        (batch[i].label == Desirability::desirable ? any_d : any_u) = true;
        batch[i].query_id = "q" + std::to_string(i);
    }
    if (!any_d) batch[0].label = Desirability::desirable;
    if (!any_u) batch[n - 1].label = Desirability::undesirable;
    return batch;
}

// Central finite differences with z0 frozen, mirroring the stop-gradient
// convention of the analytic gradient.
void check_gradients(const KtoConfig& cfg, uint64_t seed, size_t batches) {
    std::mt19937_64 rng(seed);
    const double h = 1e-5;
    for (size_t b = 0; b < batches; ++b) {
        auto batch = random_batch(rng, 8);
        const double z0 = estimate_z0(batch);
        const auto res = kto_loss_given_z0(batch, cfg, z0);
        for (size_t i = 0; i < batch.size(); ++i) {
            auto plus = batch, minus = batch;
            plus[i].logp_policy += h;
            minus[i].logp_policy -= h;
            const double fd = (kto_loss_given_z0(plus, cfg, z0).loss -
                               kto_loss_given_z0(minus, cfg, z0).loss) /
                              (2 * h);
            const double analytic = res.grad_logp_policy[i];
            const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
            EXPECT_LT(std::abs(fd - analytic) / denom, 1e-4)
                << "batch " << b << " example " << i << " fd=" << fd << " analytic=" << analytic;
        }
    }
}

}  // namespace

TEST(KtoLoss, GradientsMatchFiniteDifferencesLinear) {
    KtoConfig cfg;
    cfg.value_fn = KtoConfig::ValueFn::linear;
    check_gradients(cfg, 11, 10);
}

TEST(KtoLoss, GradientsMatchFiniteDifferencesLogistic) {
    KtoConfig cfg;
    cfg.value_fn = KtoConfig::ValueFn::logistic;
    cfg.beta = 0.3;
    check_gradients(cfg, 13, 10);
}

TEST(KtoLoss, LambdaScalingIsLinear) {
    std::mt19937_64 rng(17);
    auto batch = random_batch(rng, 6);
    const double z0 = estimate_z0(batch);
    KtoConfig base;
    KtoConfig doubled = base;
    doubled.lambda_d = 2.0 * base.lambda_d;
    const auto a = kto_loss_given_z0(batch, base, z0);
    const auto b = kto_loss_given_z0(batch, doubled, z0);
    for (size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].label == Desirability::desirable)
            EXPECT_NEAR(b.per_example_v[i], 2.0 * a.per_example_v[i], 1e-12);
        else
            EXPECT_NEAR(b.per_example_v[i], a.per_example_v[i], 1e-12);
    }
}

TEST(KtoLoss, TranslationInvariance) {
    std::mt19937_64 rng(19);
    auto batch = random_batch(rng, 6);
    auto shifted = batch;
    for (auto& ex : shifted) {
        ex.logp_policy += 17.25;
        ex.logp_ref += 17.25;
    }
    const auto a = kto_loss(batch, KtoConfig{});
    const auto b = kto_loss(shifted, KtoConfig{});
    EXPECT_NEAR(a.loss, b.loss, 1e-9);
    EXPECT_NEAR(a.z0, b.z0, 1e-9);
    for (size_t i = 0; i < batch.size(); ++i)
        EXPECT_NEAR(a.per_example_v[i], b.per_example_v[i], 1e-9);
}

TEST(KtoLoss, LambdaAutoUsesImbalanceRatio) {
    std::vector<KtoExample> batch;
    for (int i = 0; i < 6; ++i) batch.push_back({-1.0, -1.5, Desirability::desirable, "d"});
    for (int i = 0; i < 2; ++i) batch.push_back({-4.0, -1.5, Desirability::undesirable, "u"});
    KtoConfig cfg;
    cfg.lambda_auto = true;
    const auto res = kto_loss(batch, cfg);
    EXPECT_DOUBLE_EQ(res.lambda_u, 3.0);  // n_d / n_u = 6 / 2
    EXPECT_DOUBLE_EQ(res.lambda_d, 1.0);
}

TEST(KtoLoss, EmptyBatchThrows) {
    EXPECT_THROW(kto_loss({}, KtoConfig{}), NoLabeledExamples);
}

// ---------------------------------------------------------------------------
// Toy KTO training loop
// ---------------------------------------------------------------------------

TEST(ToyPolicy, ZeroStepsLeavesPolicyUnchanged) {
    const ToyFixture f = make_toy_fixture();
    ToyTrainConfig cfg;
    cfg.steps = 0;
    const auto report = train_toy_policy(f, cfg);
    EXPECT_EQ(report.steps_run, 0u);
    for (double logit : report.final_logits) EXPECT_DOUBLE_EQ(logit, 0.0);
}

TEST(ToyPolicy, ZeroLearningRateChangesNothing) {
    const ToyFixture f = make_toy_fixture();
    ToyTrainConfig cfg;
    cfg.steps = 30;
    cfg.learning_rate = 0.0;
    const auto report = train_toy_policy(f, cfg);
    for (double logit : report.final_logits) EXPECT_DOUBLE_EQ(logit, 0.0);
    for (const auto& cp : report.curve) EXPECT_EQ(cp.greedy_acc, report.curve[0].greedy_acc);
}

TEST(ToyPolicy, LearnsGoldDocidWithinBudget) {
    const ToyFixture f = make_toy_fixture();
    ToyTrainConfig cfg;
    cfg.steps = 500;
    const auto report = train_toy_policy(f, cfg);
    EXPECT_DOUBLE_EQ(report.final_greedy_acc, 1.0);
    EXPECT_LE(report.steps_run, 500u);
    // greedy accuracy is non-decreasing over checkpoints on this fixture
    for (size_t i = 1; i < report.curve.size(); ++i)
        EXPECT_GE(report.curve[i].greedy_acc, report.curve[i - 1].greedy_acc);
}

TEST(ToyPolicy, DeterministicGivenSeed) {
    const ToyFixture f1 = make_toy_fixture();
    const ToyFixture f2 = make_toy_fixture();
    ToyTrainConfig cfg;
    cfg.steps = 60;
    const auto a = train_toy_policy(f1, cfg);
    const auto b = train_toy_policy(f2, cfg);
    ASSERT_EQ(a.curve.size(), b.curve.size());
    for (size_t i = 0; i < a.curve.size(); ++i) {
        EXPECT_DOUBLE_EQ(a.curve[i].loss, b.curve[i].loss);
        EXPECT_DOUBLE_EQ(a.curve[i].greedy_acc, b.curve[i].greedy_acc);
    }
    EXPECT_EQ(a.final_logits, b.final_logits);
}
