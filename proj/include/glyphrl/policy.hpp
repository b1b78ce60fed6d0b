#pragma once

// Autoregressive token policy over the glyph-count vocabulary.
//
// Architecture: a frozen random projection of the raster (the stand-in for a
// frozen vision encoder), concatenated with a one-hot query and a normalized
// bag of the prefix tokens, feeds one tanh hidden layer and a linear vocab
// head. Everything is double precision and every gradient is analytic; the
// finite-difference checker below is the ground truth for that claim.
//
// Conditioning rasters whose size differs from the native grid (rotation
// with expansion grows the canvas) are bilinearly resampled back to
// grid x grid before projection.

#include "glyphrl/raster.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace glyphrl {

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct PolicyDims {
    int feat = 64;
    int hidden = 64;
    int shapes = 3;
    int vocab = 13;
    int grid = 32;
    int max_len = 6;

    int input_size() const { return feat + shapes + vocab; }
    void validate() const;
    bool operator==(const PolicyDims&) const = default;
};

struct PolicyParams {
    PolicyDims dims;
    Mat frozen_proj;  // feat x grid^2, never updated
    Mat W1;           // hidden x input_size
    std::vector<double> b1;
    Mat W2;           // vocab x hidden
    std::vector<double> b2;
};

enum class RolloutSource { Clean, Noisy };

struct Trajectory {
    std::vector<int> tokens;
    // Log-probs at temperature 1 under the conditioning the sequence was
    // actually generated from. Kept for analysis; the trainer recomputes
    // clean-conditioned values.
    std::vector<double> old_logprobs_gen;
    RolloutSource source = RolloutSource::Clean;
    double gen_strength = 0.0;
};

// frozen_proj . flatten(raster), resampling the raster to grid x grid first
// if its size differs. Sharing one Projection across a group's rollouts
// avoids re-projecting the same image.
struct Projection {
    std::vector<double> feat;
};

PolicyParams init_policy(const PolicyDims& dims, std::uint64_t rng_seed);

Projection project_raster(const PolicyParams& params, const Raster& raster);

std::vector<double> token_logits(const PolicyParams& params, const Projection& proj,
                                 int query_shape, const std::vector<int>& prefix);
std::vector<double> token_logits(const PolicyParams& params, const Raster& raster,
                                 int query_shape, const std::vector<int>& prefix);

Trajectory sample_trajectory(const PolicyParams& params, const Projection& proj,
                             int query_shape, double temperature, std::uint64_t rng_seed);
Trajectory sample_trajectory(const PolicyParams& params, const Raster& raster,
                             int query_shape, double temperature, std::uint64_t rng_seed);

// Exact per-token log-softmax values (temperature 1) along the given path.
std::vector<double> logprobs_under(const PolicyParams& params, const Projection& proj,
                                   int query_shape, const std::vector<int>& tokens);
std::vector<double> logprobs_under(const PolicyParams& params, const Raster& raster,
                                   int query_shape, const std::vector<int>& tokens);

// Argmax decoding until EOS or max_len; ties resolve to the lowest token id.
std::vector<int> greedy_decode(const PolicyParams& params, const Raster& raster,
                               int query_shape);

struct GradSet {
    Mat W1;
    std::vector<double> b1;
    Mat W2;
    std::vector<double> b2;

    static GradSet zeros(const PolicyDims& dims);
    bool all_zero() const;
};

struct SurrogateItem {
    const Raster* raster = nullptr;
    int query_shape = 0;
    std::vector<int> tokens;
    std::vector<double> old_logprobs;
    double advantage = 0.0;
    // Masked items contribute zero loss but their tokens stay in the
    // token-mean denominator (replay subgroup analysis relies on this).
    bool masked = false;
};

struct SurrogateResult {
    double loss = 0.0;
    double clip_fraction = 0.0;
    GradSet grads;
};

// Clipped-ratio surrogate, token-level, aggregated as a global token mean:
// loss = -(sum over every token of min(rho*A, clip(rho, 1-eps_low, 1+eps_high)*A))
//        / (total token count across the whole batch).
// Tokens where the clipped branch wins (A > 0 and rho > 1+eps_high, or A < 0
// and rho < 1-eps_low) contribute exactly zero gradient and are what
// clip_fraction counts.
SurrogateResult surrogate_grad(const PolicyParams& params,
                               const std::vector<SurrogateItem>& batch,
                               double eps_low, double eps_high);

double surrogate_loss(const PolicyParams& params, const std::vector<SurrogateItem>& batch,
                      double eps_low, double eps_high);

// Central finite differences against surrogate_grad on a random coordinate
// subset (at least 200 coordinates, or all of them when the policy is
// smaller). Returns max over coordinates of
//   |analytic - fd| / max(|fd|, 1e-8).
// Rejects batches with any ratio within 10*h of a clip boundary; the
// surrogate is not differentiable there.
double fd_check(const PolicyParams& params, const std::vector<SurrogateItem>& batch,
                double eps_low, double eps_high, double h);

void sgd_step(PolicyParams& params, const GradSet& grads, double lr);

struct AdamState {
    Mat mW1, vW1;
    std::vector<double> mb1, vb1;
    Mat mW2, vW2;
    std::vector<double> mb2, vb2;
    std::int64_t step = 0;

    static AdamState zeros(const PolicyDims& dims);
};

void adam_step(AdamState& state, PolicyParams& params, const GradSet& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// FNV-1a over the frozen projection bytes; checkpoints from one run must
// agree on it.
std::uint64_t frozen_proj_checksum(const PolicyParams& params);

struct Checkpoint {
    PolicyParams params;
    std::int64_t global_step = 0;
    std::string rng_state;
};

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     std::int64_t global_step, const std::string& rng_state = "");
Checkpoint load_checkpoint(const std::string& path);

}  // namespace glyphrl
