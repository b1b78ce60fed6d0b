#pragma once

// Offline analyses over finished runs: rollout-diversity scoring, the
// anchor/subgroup gradient projection decomposition, and Bradley-Terry
// aggregation of pairwise comparisons.

#include "glyphrl/grpo.hpp"
#include "glyphrl/policy.hpp"

#include <string>
#include <vector>

namespace glyphrl {

inline constexpr int kEmbedDim = 256;

struct TrajectoryEmbedding {
    std::vector<double> v;  // kEmbedDim entries, unit norm or all zero
};

// Signed feature hashing of token n-grams (n = 1, 2, 3) with a fixed hash
// seed, then L2 normalization. An empty sequence embeds to the zero vector.
TrajectoryEmbedding embed_trajectory(const std::vector<int>& tokens);

double cosine(const TrajectoryEmbedding& a, const TrajectoryEmbedding& b);

// Mean pairwise cosine distance (1 - cosine) over all unordered pairs.
double diversity_from_embeddings(const std::vector<TrajectoryEmbedding>& embeddings);
double diversity(const std::vector<std::vector<int>>& trajectories);

// Parameter-difference analyses. The selection names trainable tensors; the
// flat vector concatenates them in the order given.
extern const std::vector<std::string> kDefaultGradSelection;  // W2, b2, W1, b1

std::vector<double> flatten_selection(const PolicyParams& params,
                                      const std::vector<std::string>& selection);

// theta_b - theta_a over the selection. The checkpoints must agree on dims
// and on the frozen projection checksum.
std::vector<double> anchor_gradient(const Checkpoint& ckpt_a, const Checkpoint& ckpt_b,
                                    const std::vector<std::string>& selection);

enum class SubgroupMask { CleanOnly, NoisyOnly };

// Re-runs the recorded updates starting from ckpt, with the loss terms of the
// other subgroup zeroed while keeping every token in the token-mean
// denominator and keeping the originally pooled advantages. Returns
// theta_end - theta_start over the selection, averaged over `runs`
// repetitions (the pipeline is deterministic, so repetitions agree; the knob
// exists for interface fidelity). Replays must cover consecutive steps
// starting right after the checkpoint. Adam replays start from a fresh
// optimizer state; use SGD where exact additivity matters.
std::vector<double> subgroup_gradient(const Checkpoint& ckpt,
                                      const std::vector<ReplayStep>& replays,
                                      SubgroupMask mask, const TrainConfig& cfg,
                                      const std::vector<std::string>& selection,
                                      int runs = 1);

// dot(g_sub, anchor) / ||anchor||^2
double projection_ratio(const std::vector<double>& g_sub, const std::vector<double>& anchor);

struct GradReport {
    int t = 0;
    int delta_t = 0;
    std::vector<double> anchor;
    std::vector<double> g_clean;
    std::vector<double> g_noisy;
    double r_clean = 0.0;
    double r_noisy = 0.0;
    int runs = 1;
};

GradReport make_grad_report(const Checkpoint& ckpt_a, const Checkpoint& ckpt_b,
                            const std::vector<ReplayStep>& replays, const TrainConfig& cfg,
                            const std::vector<std::string>& selection = kDefaultGradSelection,
                            int runs = 1);

// Bradley-Terry aggregation. Ties count as half a win for each side.
// Strengths are reported as pi_m = exp(beta_m), normalized to sum to 1;
// the minorization-maximization iteration stops when no pi moves by more
// than 1e-10 (or after 10^4 iterations).
enum class BtOutcome { FirstWins, SecondWins, Tie };

struct BtComparison {
    std::string first;
    std::string second;
    BtOutcome outcome = BtOutcome::Tie;
};

struct BtResult {
    std::vector<std::string> models;  // first-appearance order
    std::vector<double> pi;
    int iterations = 0;
    bool converged = false;

    int index_of(const std::string& model) const;
    double win_prob(const std::string& a, const std::string& b) const;
};

BtResult bt_fit(const std::vector<BtComparison>& comparisons);

}  // namespace glyphrl
