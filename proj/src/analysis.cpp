#include "glyphrl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace glyphrl {

namespace {

// Committed hash seed. Chosen empirically so disjoint token sequences of
// realistic rollout lengths land well below cosine 0.3; do not change it
// without re-checking that bound.
constexpr std::uint64_t kEmbedHashSeed = 0x51ED2701ull;

}  // namespace

TrajectoryEmbedding embed_trajectory(const std::vector<int>& tokens) {
    TrajectoryEmbedding e;
    e.v.assign(kEmbedDim, 0.0);
    for (int n = 1; n <= 3; ++n) {
        if (tokens.size() < static_cast<std::size_t>(n)) break;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::uint64_t h = kEmbedHashSeed;
            for (int k = 0; k < n; ++k) {
                h ^= static_cast<std::uint64_t>(tokens[i + k]) + 0x9E37ull;
                h *= 0x100000001B3ull;
            }
            const double sign = ((h >> 8) & 1u) ? 1.0 : -1.0;
            e.v[h % kEmbedDim] += sign;
        }
    }
    double norm = 0.0;
    for (double x : e.v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : e.v) x /= norm;
    return e;
}

double cosine(const TrajectoryEmbedding& a, const TrajectoryEmbedding& b) {
    if (a.v.size() != b.v.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) dot += a.v[i] * b.v[i];
    return dot;
}

double diversity_from_embeddings(const std::vector<TrajectoryEmbedding>& embeddings) {
    if (embeddings.size() < 2)
        throw std::invalid_argument("diversity needs at least 2 trajectories");
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < embeddings.size(); ++i)
        for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
            sum += 1.0 - cosine(embeddings[i], embeddings[j]);
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

double diversity(const std::vector<std::vector<int>>& trajectories) {
    std::vector<TrajectoryEmbedding> embeddings;
    embeddings.reserve(trajectories.size());
    for (const std::vector<int>& t : trajectories) embeddings.push_back(embed_trajectory(t));
    return diversity_from_embeddings(embeddings);
}

const std::vector<std::string> kDefaultGradSelection = {"W2", "b2", "W1", "b1"};

namespace {

const std::vector<double>& tensor_by_name(const PolicyParams& params,
                                          const std::string& name) {
    if (name == "W1") return params.W1.data;
    if (name == "b1") return params.b1;
    if (name == "W2") return params.W2.data;
    if (name == "b2") return params.b2;
    throw std::invalid_argument("unknown tensor in selection: " + name);
}

}  // namespace

std::vector<double> flatten_selection(const PolicyParams& params,
                                      const std::vector<std::string>& selection) {
    if (selection.empty()) throw std::invalid_argument("selection is empty");
    std::vector<double> out;
    for (const std::string& name : selection) {
        const std::vector<double>& t = tensor_by_name(params, name);
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

std::vector<double> anchor_gradient(const Checkpoint& ckpt_a, const Checkpoint& ckpt_b,
                                    const std::vector<std::string>& selection) {
    if (!(ckpt_a.params.dims == ckpt_b.params.dims))
        throw std::invalid_argument("anchor_gradient: checkpoint dims differ");
    if (frozen_proj_checksum(ckpt_a.params) != frozen_proj_checksum(ckpt_b.params))
        throw std::invalid_argument(
            "anchor_gradient: frozen projections differ; checkpoints are from "
            "different runs");
    const std::vector<double> a = flatten_selection(ckpt_a.params, selection);
    const std::vector<double> b = flatten_selection(ckpt_b.params, selection);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = b[i] - a[i];
    return out;
}

namespace {

// One recorded update step with the unmasked subgroup's loss only. Mirrors
// the trainer's chunking so the replay hits the same optimizer sequence.
void replay_update(PolicyParams& params, AdamState* adam, const ReplayStep& step,
                   const TrainConfig& cfg, SubgroupMask mask) {
    const int n_groups = static_cast<int>(step.groups.size());
    const int upd = std::min(cfg.updates_per_collection, std::max(n_groups, 1));
    for (int c = 0; c < upd; ++c) {
        const int lo = static_cast<int>(static_cast<long long>(c) * n_groups / upd);
        const int hi = static_cast<int>(static_cast<long long>(c + 1) * n_groups / upd);
        if (lo == hi) continue;
        std::vector<SurrogateItem> items;
        for (int g = lo; g < hi; ++g) {
            const ReplayGroup& group = step.groups[g];
            for (const ReplayTraj& traj : group.trajectories) {
                SurrogateItem item;
                item.raster = (traj.noisy && group.raster_source)
                                  ? &*group.raster_source
                                  : &group.raster_clean;
                item.query_shape = group.query_shape;
                item.tokens = traj.tokens;
                item.old_logprobs = traj.old_logprobs;
                item.advantage = traj.advantage;
                item.masked =
                    (mask == SubgroupMask::CleanOnly) ? traj.noisy : !traj.noisy;
                items.push_back(std::move(item));
            }
        }
        const SurrogateResult res = surrogate_grad(params, items, cfg.eps_low, cfg.eps_high);
        if (res.grads.all_zero()) continue;
        if (cfg.optimizer == Optimizer::SGD)
            sgd_step(params, res.grads, cfg.lr);
        else
            adam_step(*adam, params, res.grads, cfg.lr);
    }
}

}  // namespace

std::vector<double> subgroup_gradient(const Checkpoint& ckpt,
                                      const std::vector<ReplayStep>& replays,
                                      SubgroupMask mask, const TrainConfig& cfg,
                                      const std::vector<std::string>& selection, int runs) {
    if (replays.empty()) throw std::invalid_argument("subgroup_gradient: no replay steps");
    if (runs < 1) throw std::invalid_argument("subgroup_gradient: runs must be >= 1");
    for (std::size_t i = 0; i < replays.size(); ++i) {
        const int expect = static_cast<int>(ckpt.global_step) + 1 + static_cast<int>(i);
        if (replays[i].step != expect)
            throw std::invalid_argument(
                "subgroup_gradient: replay steps must run " +
                std::to_string(ckpt.global_step + 1) + ".." +
                std::to_string(ckpt.global_step + replays.size()) + " but found step " +
                std::to_string(replays[i].step));
    }

    const std::vector<double> start = flatten_selection(ckpt.params, selection);
    std::vector<double> mean(start.size(), 0.0);
    for (int run = 0; run < runs; ++run) {
        PolicyParams params = ckpt.params;
        AdamState adam = AdamState::zeros(params.dims);
        for (const ReplayStep& step : replays)
            replay_update(params, cfg.optimizer == Optimizer::Adam ? &adam : nullptr, step,
                          cfg, mask);
        const std::vector<double> end = flatten_selection(params, selection);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += end[i] - start[i];
    }
    for (double& x : mean) x /= static_cast<double>(runs);
    return mean;
}

double projection_ratio(const std::vector<double>& g_sub, const std::vector<double>& anchor) {
    if (g_sub.size() != anchor.size())
        throw std::invalid_argument("projection_ratio: dimension mismatch");
    double dot = 0.0, norm2 = 0.0;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        dot += g_sub[i] * anchor[i];
        norm2 += anchor[i] * anchor[i];
    }
    if (norm2 <= 0.0) throw std::invalid_argument("projection_ratio: zero anchor");
    return dot / norm2;
}

GradReport make_grad_report(const Checkpoint& ckpt_a, const Checkpoint& ckpt_b,
                            const std::vector<ReplayStep>& replays, const TrainConfig& cfg,
                            const std::vector<std::string>& selection, int runs) {
    GradReport report;
    report.t = static_cast<int>(ckpt_a.global_step);
    report.delta_t = static_cast<int>(ckpt_b.global_step - ckpt_a.global_step);
    report.runs = runs;
    report.anchor = anchor_gradient(ckpt_a, ckpt_b, selection);
    report.g_clean =
        subgroup_gradient(ckpt_a, replays, SubgroupMask::CleanOnly, cfg, selection, runs);
    report.g_noisy =
        subgroup_gradient(ckpt_a, replays, SubgroupMask::NoisyOnly, cfg, selection, runs);
    report.r_clean = projection_ratio(report.g_clean, report.anchor);
    report.r_noisy = projection_ratio(report.g_noisy, report.anchor);
    return report;
}

int BtResult::index_of(const std::string& model) const {
    for (std::size_t i = 0; i < models.size(); ++i)
        if (models[i] == model) return static_cast<int>(i);
    throw std::invalid_argument("unknown model: " + model);
}

double BtResult::win_prob(const std::string& a, const std::string& b) const {
    const double pa = pi[index_of(a)];
    const double pb = pi[index_of(b)];
    return pa / (pa + pb);
}

BtResult bt_fit(const std::vector<BtComparison>& comparisons) {
    if (comparisons.empty()) throw std::invalid_argument("bt_fit: no comparisons");

    BtResult result;
    std::unordered_map<std::string, int> index;
    auto model_id = [&](const std::string& name) {
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        const int id = static_cast<int>(result.models.size());
        index.emplace(name, id);
        result.models.push_back(name);
        return id;
    };

    // wins[i][j]: win credit of i against j, ties half each.
    std::map<std::pair<int, int>, double> wins;
    std::map<std::pair<int, int>, double> games;
    for (const BtComparison& c : comparisons) {
        const int a = model_id(c.first);
        const int b = model_id(c.second);
        if (a == b) throw std::invalid_argument("bt_fit: comparison of a model with itself");
        const double wa =
            c.outcome == BtOutcome::FirstWins ? 1.0 : (c.outcome == BtOutcome::Tie ? 0.5 : 0.0);
        wins[{a, b}] += wa;
        wins[{b, a}] += 1.0 - wa;
        games[{a, b}] += 1.0;
        games[{b, a}] += 1.0;
    }
    const int n = static_cast<int>(result.models.size());
    if (n < 2) throw std::invalid_argument("bt_fit: need at least 2 models");

    // Connectivity via union-find.
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [key, count] : games) {
        (void)count;
        parent[find(key.first)] = find(key.second);
    }
    for (int i = 1; i < n; ++i)
        if (find(i) != find(0))
            throw std::invalid_argument("bt_fit: comparison graph is not connected");

    std::vector<double> total_wins(n, 0.0);
    for (const auto& [key, w] : wins) total_wins[key.first] += w;

    // Minorization-maximization on the pi scale.
    std::vector<double> pi(n, 1.0 / n), next(n);
    const int kMaxIters = 10000;
    for (int iter = 1; iter <= kMaxIters; ++iter) {
        for (int i = 0; i < n; ++i) next[i] = 0.0;
        for (int i = 0; i < n; ++i) {
            double denom = 0.0;
            for (const auto& [key, count] : games) {
                if (key.first != i) continue;
                const int j = key.second;
                denom += count / (pi[i] + pi[j]);
            }
            next[i] = denom > 0.0 ? total_wins[i] / denom : 0.0;
        }
        double sum = 0.0;
        for (double x : next) sum += x;
        if (sum <= 0.0) {
            // Everybody lost everything, which can't happen with wins summing
            // to the comparison count; bail defensively.
            throw std::runtime_error("bt_fit: iteration collapsed");
        }
        for (double& x : next) x /= sum;
        double delta = 0.0;
        for (int i = 0; i < n; ++i) delta = std::max(delta, std::abs(next[i] - pi[i]));
        pi = next;
        result.iterations = iter;
        if (delta < 1e-10) {
            result.converged = true;
            break;
        }
    }
    result.pi = std::move(pi);
    return result;
}

}  // namespace glyphrl
