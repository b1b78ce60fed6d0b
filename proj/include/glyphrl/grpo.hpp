#pragma once

// Group-relative policy optimization with the hybrid clean/noisy rollout
// scheme. Each training step samples a batch of instances, collects n1
// rollouts on the clean image and n2 on a distorted copy, pools all n1+n2
// binary rewards into one normalized advantage vector, and takes an update
// whose log-probabilities are evaluated on the clean image (both branches of
// the ratio, so noisy trajectories start at ratio 1).
//
// train() is the full loop; train_vanilla() is a deliberately separate
// clean-only GRPO loop kept as an independent reference implementation. The
// two must produce byte-identical metrics when the hybrid loop is configured
// with n2=0 and a zero-strength schedule; a test holds them to that.

#include "glyphrl/env.hpp"
#include "glyphrl/policy.hpp"
#include "glyphrl/raster.hpp"
#include "glyphrl/schedule.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace glyphrl {

enum class AdvVariant { StdNorm, MeanOnly };
enum class Optimizer { SGD, Adam };
enum class ConditionMode { CleanOnly, OnSource };

const char* adv_variant_name(AdvVariant v);
AdvVariant parse_adv_variant(const std::string& name);
const char* optimizer_name(Optimizer o);
Optimizer parse_optimizer(const std::string& name);
const char* condition_mode_name(ConditionMode m);
ConditionMode parse_condition_mode(const std::string& name);

struct TrainConfig {
    int n1 = 6;
    int n2 = 6;
    int t_max = 60;
    int rollout_batch = 4096;
    int updates_per_collection = 1;
    double lr = 0.1;
    Optimizer optimizer = Optimizer::Adam;
    double eps_low = 0.2;
    double eps_high = 0.2;
    AdvVariant adv_variant = AdvVariant::StdNorm;
    ScheduleSpec schedule;
    DistortionKind distortion = DistortionKind::GaussianSteps;
    double temp_clean = 1.0;
    double temp_noisy = 1.0;
    ConditionMode condition_mode = ConditionMode::CleanOnly;
    double noisy_reward_penalty = 0.0;  // added to noisy rewards, must be <= 0
    std::uint64_t master_seed = 1;

    int feat_dim = 64;
    int hidden_dim = 64;
    // 0 streams fresh instances every step; > 0 pre-samples a fixed dataset
    // of that size and epoch-shuffles it (data-seed ablation).
    int fixed_dataset_size = 0;
    std::uint64_t data_seed = 0;  // 0 falls back to master_seed
    bool allow_diagnostic_distortion = false;

    void validate() const;
};

struct RolloutGroup {
    TaskInstance instance;
    Raster distorted;
    std::vector<Trajectory> trajectories;  // n1 clean then n2 noisy
    std::vector<double> rewards;           // penalty already applied to noisy entries
    std::vector<double> advantages;
    // Log-probs the update ratios divide by. Clean-conditioned for every
    // trajectory under CleanOnly; noisy trajectories use their own source
    // image under OnSource.
    std::vector<std::vector<double>> old_clean_logprobs;
    int n1 = 0;
    int n2 = 0;
};

std::vector<double> compute_advantages(const std::vector<double>& rewards, AdvVariant variant);

RolloutGroup collect_group(const PolicyParams& params_old, const TaskInstance& instance,
                           const TrainConfig& cfg, double alpha_t, std::uint64_t rng_seed);

struct StepMetrics {
    int step = 0;
    double alpha_t = 0.0;
    double mean_reward = 0.0;
    double clean_mean_reward = 0.0;
    double noisy_mean_reward = 0.0;  // 0 when the step had no noisy rollouts
    double clip_fraction = 0.0;
    double loss = 0.0;
    std::optional<double> eval_acc_clean;
    std::optional<double> eval_acc_distorted;
    std::optional<double> diversity;
};

// One JSONL object, keys in a fixed order so identical runs serialize to
// identical bytes.
std::string metrics_line(const StepMetrics& m);

// One optimizer update over all trajectories of all groups (token-mean
// surrogate). updates_per_collection > 1 splits the groups into consecutive
// chunks, one optimizer step each, against the same old log-probs. Exactly
// zero gradients skip the optimizer step entirely, so all-degenerate batches
// leave both params and Adam state untouched.
StepMetrics update_step(PolicyParams& params, AdamState* adam,
                        const std::vector<RolloutGroup>& groups, const TrainConfig& cfg,
                        double alpha_t);

struct TrainSinks {
    std::string out_dir;        // empty: keep everything in memory only
    int checkpoint_every = 5;   // 0 disables checkpoints
    int log_diversity_every = 5;
    bool record_replay = false;
    int eval_n = 0;             // 0 disables the final evaluation
    double eval_strength = 200.0;
    int threads = 1;
};

struct TrainResult {
    PolicyParams params;
    std::vector<StepMetrics> metrics;
    std::string metrics_jsonl;
    double final_acc_clean = -1.0;
    double final_acc_distorted = -1.0;
};

TrainResult train(const TaskSpec& task, const TrainConfig& cfg, const TrainSinks& sinks);

// Reference single-set GRPO: clean rollouts only, no distortion machinery on
// the code path at all. Uses cfg.n1 + cfg.n2 clean rollouts per instance so a
// comparison against the hybrid loop holds total rollouts fixed.
TrainResult train_vanilla(const TaskSpec& task, const TrainConfig& cfg,
                          const TrainSinks& sinks);

double evaluate(const PolicyParams& params, const TaskSpec& spec, int n_eval,
                double eval_strength, std::uint64_t seed,
                DistortionKind kind = DistortionKind::GaussianSteps);

// Replay files capture exactly what an update step consumed so offline
// analyses can rerun it with loss terms masked by subgroup.
struct ReplayTraj {
    std::vector<int> tokens;
    std::vector<double> old_logprobs;
    double advantage = 0.0;
    bool noisy = false;
};

struct ReplayGroup {
    Raster raster_clean;
    // Present only when the update conditioned noisy trajectories on their
    // source image (OnSource mode).
    std::optional<Raster> raster_source;
    int query_shape = 0;
    std::vector<ReplayTraj> trajectories;
};

struct ReplayStep {
    int step = 0;
    std::vector<ReplayGroup> groups;
};

void write_replay(const std::string& path, const ReplayStep& replay);
ReplayStep read_replay(const std::string& path);

}  // namespace glyphrl
