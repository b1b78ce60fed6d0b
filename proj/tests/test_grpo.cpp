#include "glyphrl/grpo.hpp"

#include "glyphrl/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

using namespace glyphrl;

namespace {

std::vector<double> oracle_advantages(const std::vector<double>& rewards,
                                      AdvVariant variant) {
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    std::vector<double> out(rewards.size());
    if (variant == AdvVariant::MeanOnly) {
        for (size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - mean;
        return out;
    }
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    if (sd < 1e-8) return std::vector<double>(rewards.size(), 0.0);
    for (size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

TrainConfig tiny_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.n1 = 4;
    cfg.n2 = 2;
    cfg.t_max = 5;
    cfg.rollout_batch = 4;
    cfg.feat_dim = 16;
    cfg.hidden_dim = 16;
    cfg.master_seed = seed;
    return cfg;
}

bool params_bit_equal(const PolicyParams& a, const PolicyParams& b) {
    return a.frozen_proj.data == b.frozen_proj.data && a.W1.data == b.W1.data &&
           a.b1 == b.b1 && a.W2.data == b.W2.data && a.b2 == b.b2;
}

}  // namespace

TEST(ComputeAdvantages, MatchesBruteForceOracleOnRandomVectors) {
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = 2 + rng.uniform_int(23);
        std::vector<double> rewards(n);
        for (double& r : rewards) {
            r = rng.uniform() < 0.5 ? 0.0 : 1.0;
            if (trial % 3 == 0) r += -0.1 * static_cast<double>(rng.uniform_int(3));
        }
        for (AdvVariant v : {AdvVariant::StdNorm, AdvVariant::MeanOnly}) {
            const auto got = compute_advantages(rewards, v);
            const auto want = oracle_advantages(rewards, v);
            ASSERT_EQ(got.size(), want.size());
            for (size_t i = 0; i < n; ++i)
                ASSERT_NEAR(got[i], want[i], 1e-12) << "trial " << trial;
        }
    }
}

TEST(ComputeAdvantages, WorkedExample) {
    const std::vector<double> rewards{1.0, 0.0, 0.0, 0.0};
    const auto adv = compute_advantages(rewards, AdvVariant::StdNorm);
    EXPECT_NEAR(adv[0], std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(adv[1], -1.0 / std::sqrt(3.0), 1e-12);
    const auto mean_only = compute_advantages(rewards, AdvVariant::MeanOnly);
    EXPECT_NEAR(mean_only[0], 0.75, 1e-15);
    EXPECT_NEAR(mean_only[1], -0.25, 1e-15);
}

TEST(ComputeAdvantages, UniformRewardsGiveZeros) {
    for (double v : {0.0, 1.0, 0.5}) {
        const auto adv = compute_advantages({v, v, v, v}, AdvVariant::StdNorm);
        for (double a : adv) EXPECT_EQ(a, 0.0);
    }
}

TEST(ComputeAdvantages, TooFewRewardsThrows) {
    EXPECT_THROW(compute_advantages({1.0}, AdvVariant::StdNorm), std::invalid_argument);
    EXPECT_THROW(compute_advantages({}, AdvVariant::MeanOnly), std::invalid_argument);
}

TEST(TrainConfigValidate, RejectsBadFields) {
    TrainConfig cfg;
    EXPECT_NO_THROW(cfg.validate());

    TrainConfig c = cfg;
    c.n1 = 1;
    c.n2 = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = cfg;
    c.n2 = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = cfg;
    c.t_max = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = cfg;
    c.lr = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = cfg;
    c.eps_high = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = cfg;
    c.noisy_reward_penalty = 0.1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = cfg;
    c.updates_per_collection = cfg.rollout_batch + 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = cfg;
    c.temp_noisy = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = cfg;
    c.fixed_dataset_size = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(CollectGroup, LayoutRewardsAndPooledAdvantages) {
    const TrainConfig cfg = tiny_config(1);
    const PolicyParams params = init_policy(
        PolicyDims{.feat = cfg.feat_dim, .hidden = cfg.hidden_dim}, 3);
    const TaskInstance inst = sample_instance(TaskSpec{}, 5);
    const RolloutGroup group = collect_group(params, inst, cfg, 300.0, 77);

    EXPECT_EQ(group.n1, cfg.n1);
    EXPECT_EQ(group.n2, cfg.n2);
    ASSERT_EQ(group.trajectories.size(), static_cast<size_t>(cfg.n1 + cfg.n2));
    ASSERT_EQ(group.rewards.size(), group.trajectories.size());
    ASSERT_EQ(group.advantages.size(), group.trajectories.size());
    ASSERT_EQ(group.old_clean_logprobs.size(), group.trajectories.size());

    for (int i = 0; i < cfg.n1; ++i) {
        EXPECT_EQ(group.trajectories[i].source, RolloutSource::Clean);
        EXPECT_EQ(group.trajectories[i].gen_strength, 0.0);
    }
    for (int i = cfg.n1; i < cfg.n1 + cfg.n2; ++i) {
        EXPECT_EQ(group.trajectories[i].source, RolloutSource::Noisy);
        EXPECT_EQ(group.trajectories[i].gen_strength, 300.0);
    }

    const auto expect_adv = compute_advantages(group.rewards, cfg.adv_variant);
    for (size_t i = 0; i < expect_adv.size(); ++i)
        EXPECT_DOUBLE_EQ(group.advantages[i], expect_adv[i]);

    const RolloutGroup again = collect_group(params, inst, cfg, 300.0, 77);
    for (size_t i = 0; i < group.trajectories.size(); ++i)
        EXPECT_EQ(group.trajectories[i].tokens, again.trajectories[i].tokens);
}

TEST(CollectGroup, CleanOnlyConditionsEveryTrajectoryOnTheCleanImage) {
    const TrainConfig cfg = tiny_config(1);
    const PolicyParams params = init_policy(
        PolicyDims{.feat = cfg.feat_dim, .hidden = cfg.hidden_dim}, 3);
    const TaskInstance inst = sample_instance(TaskSpec{}, 5);
    const RolloutGroup group = collect_group(params, inst, cfg, 400.0, 13);

    for (size_t i = 0; i < group.trajectories.size(); ++i) {
        const auto clean_lp = logprobs_under(params, inst.image, inst.query_shape,
                                             group.trajectories[i].tokens);
        ASSERT_EQ(group.old_clean_logprobs[i].size(), clean_lp.size());
        for (size_t t = 0; t < clean_lp.size(); ++t)
            EXPECT_NEAR(group.old_clean_logprobs[i][t], clean_lp[t], 1e-12)
                << "traj " << i << " tok " << t;
    }
}

TEST(CollectGroup, OnSourceConditionsNoisyTrajectoriesOnTheirOwnImage) {
    TrainConfig cfg = tiny_config(1);
    cfg.condition_mode = ConditionMode::OnSource;
    const PolicyParams params = init_policy(
        PolicyDims{.feat = cfg.feat_dim, .hidden = cfg.hidden_dim}, 3);
    const TaskInstance inst = sample_instance(TaskSpec{}, 5);
    const RolloutGroup group = collect_group(params, inst, cfg, 400.0, 13);

    bool any_noisy_differs = false;
    for (int i = cfg.n1; i < cfg.n1 + cfg.n2; ++i) {
        const auto source_lp = logprobs_under(params, group.distorted, inst.query_shape,
                                              group.trajectories[i].tokens);
        for (size_t t = 0; t < source_lp.size(); ++t)
            EXPECT_NEAR(group.old_clean_logprobs[i][t], source_lp[t], 1e-12);
        const auto clean_lp = logprobs_under(params, inst.image, inst.query_shape,
                                             group.trajectories[i].tokens);
        for (size_t t = 0; t < source_lp.size(); ++t)
            any_noisy_differs |= std::abs(source_lp[t] - clean_lp[t]) > 1e-9;
    }
    EXPECT_TRUE(any_noisy_differs);
}

TEST(CollectGroup, NoisyRewardPenaltyShiftsNoisyEntriesPreAdvantage) {
    TrainConfig cfg = tiny_config(1);
    cfg.noisy_reward_penalty = -0.1;
    const PolicyParams params = init_policy(
        PolicyDims{.feat = cfg.feat_dim, .hidden = cfg.hidden_dim}, 3);
    const TaskInstance inst = sample_instance(TaskSpec{}, 5);
    const RolloutGroup group = collect_group(params, inst, cfg, 300.0, 21);

    for (int i = 0; i < cfg.n1; ++i)
        EXPECT_TRUE(group.rewards[i] == 0.0 || group.rewards[i] == 1.0);
    for (int i = cfg.n1; i < cfg.n1 + cfg.n2; ++i)
        EXPECT_TRUE(std::abs(group.rewards[i] - -0.1) < 1e-15 ||
                    std::abs(group.rewards[i] - 0.9) < 1e-15)
            << group.rewards[i];

    const auto expect_adv = compute_advantages(group.rewards, cfg.adv_variant);
    for (size_t i = 0; i < expect_adv.size(); ++i)
        EXPECT_DOUBLE_EQ(group.advantages[i], expect_adv[i]);
}

TEST(CollectGroup, ZeroAlphaLeavesTheImageUndistorted) {
    const TrainConfig cfg = tiny_config(1);
    const PolicyParams params = init_policy(
        PolicyDims{.feat = cfg.feat_dim, .hidden = cfg.hidden_dim}, 3);
    const TaskInstance inst = sample_instance(TaskSpec{}, 5);
    const RolloutGroup group = collect_group(params, inst, cfg, 0.0, 21);
    ASSERT_EQ(group.distorted.pixels.size(), inst.image.pixels.size());
    for (size_t i = 0; i < inst.image.pixels.size(); ++i)
        ASSERT_EQ(group.distorted.pixels[i], inst.image.pixels[i]);
}

TEST(CollectGroup, DiagnosticDistortionNeedsExplicitOptIn) {
    TrainConfig cfg = tiny_config(1);
    cfg.distortion = DistortionKind::RotateCrop;
    const PolicyParams params = init_policy(
        PolicyDims{.feat = cfg.feat_dim, .hidden = cfg.hidden_dim}, 3);
    const TaskInstance inst = sample_instance(TaskSpec{}, 5);
    EXPECT_THROW(collect_group(params, inst, cfg, 300.0, 21), std::invalid_argument);
    cfg.allow_diagnostic_distortion = true;
    EXPECT_NO_THROW(collect_group(params, inst, cfg, 300.0, 21));
}

TEST(UpdateStep, AllZeroRewardBatchLeavesParamsAndAdamUntouched) {
    const TrainConfig cfg = tiny_config(1);
    PolicyParams params = init_policy(
        PolicyDims{.feat = cfg.feat_dim, .hidden = cfg.hidden_dim}, 3);
    const PolicyParams before = params;
    AdamState adam = AdamState::zeros(params.dims);

    std::vector<RolloutGroup> groups;
    for (std::uint64_t s = 1; s <= 3; ++s)
        groups.push_back(
            collect_group(params, sample_instance(TaskSpec{}, s), cfg, 400.0, s * 31));
    for (const RolloutGroup& g : groups)
        for (double r : g.rewards) ASSERT_EQ(r, 0.0);

    const StepMetrics m = update_step(params, &adam, groups, cfg, 400.0);
    EXPECT_EQ(m.mean_reward, 0.0);
    EXPECT_EQ(m.loss, 0.0);
    EXPECT_TRUE(params_bit_equal(params, before));
    EXPECT_EQ(adam.step, 0);
    for (double v : adam.mW1.data) ASSERT_EQ(v, 0.0);
}

TEST(UpdateStep, MixedRewardsMoveParameters) {
    const TrainConfig cfg = tiny_config(1);
    PolicyParams params = init_policy(
        PolicyDims{.feat = cfg.feat_dim, .hidden = cfg.hidden_dim}, 3);
    const PolicyParams before = params;
    AdamState adam = AdamState::zeros(params.dims);

    const TaskInstance inst = sample_instance(TaskSpec{}, 5);
    RolloutGroup group = collect_group(params, inst, cfg, 0.0, 31);
    group.rewards[0] = 1.0;
    group.advantages = compute_advantages(group.rewards, cfg.adv_variant);

    const StepMetrics m = update_step(params, &adam, {group}, cfg, 0.0);
    EXPECT_FALSE(params_bit_equal(params, before));
    EXPECT_EQ(adam.step, 1);
    EXPECT_GT(m.mean_reward, 0.0);
}

TEST(MetricsLine, FixedKeyOrderAndStableBytes) {
    StepMetrics m;
    m.step = 3;
    m.alpha_t = 250.0;
    m.mean_reward = 0.5;
    m.clean_mean_reward = 0.5;
    m.noisy_mean_reward = 0.0;
    m.clip_fraction = 0.0;
    m.loss = -0.25;
    EXPECT_EQ(metrics_line(m),
              "{\"step\":3,\"alpha_t\":250.0,\"mean_reward\":0.5,"
              "\"clean_mean_reward\":0.5,\"noisy_mean_reward\":0.0,"
              "\"clip_fraction\":0.0,\"loss\":-0.25}");
    m.diversity = 0.125;
    EXPECT_EQ(metrics_line(m),
              "{\"step\":3,\"alpha_t\":250.0,\"mean_reward\":0.5,"
              "\"clean_mean_reward\":0.5,\"noisy_mean_reward\":0.0,"
              "\"clip_fraction\":0.0,\"loss\":-0.25,\"diversity\":0.125}");
    EXPECT_EQ(metrics_line(m), metrics_line(m));
}

TEST(Train, DeterministicAcrossRepeats) {
    const TaskSpec task;
    const TrainConfig cfg = tiny_config(7);
    TrainSinks sinks;
    sinks.log_diversity_every = 2;
    const TrainResult a = train(task, cfg, sinks);
    const TrainResult b = train(task, cfg, sinks);
    EXPECT_EQ(a.metrics_jsonl, b.metrics_jsonl);
    EXPECT_TRUE(params_bit_equal(a.params, b.params));
    ASSERT_EQ(a.metrics.size(), static_cast<size_t>(cfg.t_max));
}

TEST(Train, SeedChangesTheRun) {
    const TaskSpec task;
    TrainSinks sinks;
    const TrainResult a = train(task, tiny_config(7), sinks);
    const TrainResult b = train(task, tiny_config(8), sinks);
    EXPECT_NE(a.metrics_jsonl, b.metrics_jsonl);
}

TEST(Train, HybridWithoutNoiseIsByteIdenticalToVanilla) {
    const TaskSpec task;
    TrainConfig cfg;
    cfg.n1 = 6;
    cfg.n2 = 0;
    cfg.t_max = 20;
    cfg.rollout_batch = 8;
    cfg.feat_dim = 16;
    cfg.hidden_dim = 16;
    cfg.master_seed = 3;
    cfg.schedule.kind = ScheduleKind::Constant;
    cfg.schedule.alpha0 = 0.0;
    TrainSinks sinks;
    sinks.log_diversity_every = 5;

    const TrainResult hybrid = train(task, cfg, sinks);

    TrainConfig vcfg = cfg;  // train_vanilla uses n1 + n2 = 6 clean rollouts
    const TrainResult vanilla = train_vanilla(task, vcfg, sinks);

    EXPECT_EQ(hybrid.metrics_jsonl, vanilla.metrics_jsonl);
    EXPECT_TRUE(params_bit_equal(hybrid.params, vanilla.params));
}

TEST(Train, FinalEvalPopulatesAccuracies) {
    const TaskSpec task;
    const TrainConfig cfg = tiny_config(2);
    TrainSinks sinks;
    sinks.eval_n = 40;
    sinks.eval_strength = 200.0;
    const TrainResult res = train(task, cfg, sinks);
    EXPECT_GE(res.final_acc_clean, 0.0);
    EXPECT_GE(res.final_acc_distorted, 0.0);
    ASSERT_TRUE(res.metrics.back().eval_acc_clean.has_value());
    ASSERT_TRUE(res.metrics.back().eval_acc_distorted.has_value());
    EXPECT_EQ(*res.metrics.back().eval_acc_clean, res.final_acc_clean);
    EXPECT_EQ(*res.metrics.back().eval_acc_distorted, res.final_acc_distorted);
}

TEST(Train, FixedDatasetModeIsDeterministicAndDistinctFromStreaming) {
    const TaskSpec task;
    TrainConfig cfg = tiny_config(4);
    cfg.fixed_dataset_size = 16;
    TrainSinks sinks;
    const TrainResult a = train(task, cfg, sinks);
    const TrainResult b = train(task, cfg, sinks);
    EXPECT_EQ(a.metrics_jsonl, b.metrics_jsonl);

    TrainConfig streaming = tiny_config(4);
    const TrainResult c = train(task, streaming, sinks);
    EXPECT_NE(a.metrics_jsonl, c.metrics_jsonl);
}

TEST(Evaluate, DeterministicAndZeroForUntrainedPolicy) {
    const TaskSpec task;
    const PolicyParams params = init_policy(PolicyDims{}, 3);
    const double a = evaluate(params, task, 100, 0.0, 17);
    const double b = evaluate(params, task, 100, 0.0, 17);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, 0.0);
    const double distorted = evaluate(params, task, 50, 200.0, 17);
    EXPECT_GE(distorted, 0.0);
}

TEST(Replay, RoundTripPreservesEveryField) {
    ReplayStep step;
    step.step = 9;
    ReplayGroup group;
    group.raster_clean = Raster(4, 4);
    for (size_t i = 0; i < group.raster_clean.pixels.size(); ++i)
        group.raster_clean.pixels[i] = static_cast<double>(i) * 0.0625;
    group.query_shape = 2;
    ReplayTraj t1;
    t1.tokens = {kTokenOpen, 3, kTokenClose, kTokenEos};
    t1.old_logprobs = {-0.5, -1.25, -0.125, -2.0};
    t1.advantage = 1.7320508075688772;
    t1.noisy = false;
    ReplayTraj t2;
    t2.tokens = {kTokenEos};
    t2.old_logprobs = {-3.5};
    t2.advantage = -0.57735026918962573;
    t2.noisy = true;
    group.trajectories = {t1, t2};
    step.groups = {group};

    ReplayGroup with_source = group;
    with_source.raster_source = Raster(4, 4);
    with_source.raster_source->pixels[5] = 0.75;
    step.groups.push_back(with_source);

    const std::string path =
        (std::filesystem::temp_directory_path() / "glyphrl_replay_test.replay").string();
    write_replay(path, step);
    const ReplayStep back = read_replay(path);
    std::filesystem::remove(path);

    EXPECT_EQ(back.step, 9);
    ASSERT_EQ(back.groups.size(), 2u);
    EXPECT_EQ(back.groups[0].raster_clean.pixels, group.raster_clean.pixels);
    EXPECT_EQ(back.groups[0].query_shape, 2);
    EXPECT_FALSE(back.groups[0].raster_source.has_value());
    ASSERT_TRUE(back.groups[1].raster_source.has_value());
    EXPECT_EQ(back.groups[1].raster_source->pixels[5], 0.75);
    ASSERT_EQ(back.groups[0].trajectories.size(), 2u);
    EXPECT_EQ(back.groups[0].trajectories[0].tokens, t1.tokens);
    EXPECT_EQ(back.groups[0].trajectories[0].old_logprobs, t1.old_logprobs);
    EXPECT_EQ(back.groups[0].trajectories[0].advantage, t1.advantage);
    EXPECT_FALSE(back.groups[0].trajectories[0].noisy);
    EXPECT_TRUE(back.groups[0].trajectories[1].noisy);
    EXPECT_EQ(back.groups[0].trajectories[1].old_logprobs, t2.old_logprobs);
}

TEST(EnumNames, RoundTrip) {
    EXPECT_EQ(parse_adv_variant(adv_variant_name(AdvVariant::StdNorm)), AdvVariant::StdNorm);
    EXPECT_EQ(parse_adv_variant(adv_variant_name(AdvVariant::MeanOnly)),
              AdvVariant::MeanOnly);
    EXPECT_EQ(parse_optimizer(optimizer_name(Optimizer::SGD)), Optimizer::SGD);
    EXPECT_EQ(parse_optimizer(optimizer_name(Optimizer::Adam)), Optimizer::Adam);
    EXPECT_EQ(parse_condition_mode(condition_mode_name(ConditionMode::CleanOnly)),
              ConditionMode::CleanOnly);
    EXPECT_EQ(parse_condition_mode(condition_mode_name(ConditionMode::OnSource)),
              ConditionMode::OnSource);
    EXPECT_THROW(parse_optimizer("rmsprop"), std::invalid_argument);
    EXPECT_THROW(parse_adv_variant(""), std::invalid_argument);
    EXPECT_THROW(parse_condition_mode("both"), std::invalid_argument);
}
