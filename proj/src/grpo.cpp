#include "glyphrl/grpo.hpp"

#include "glyphrl/analysis.hpp"
#include "glyphrl/blobfile.hpp"
#include "glyphrl/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <thread>

namespace glyphrl {

const char* adv_variant_name(AdvVariant v) {
    return v == AdvVariant::StdNorm ? "std_norm" : "mean_only";
}

AdvVariant parse_adv_variant(const std::string& name) {
    if (name == "std_norm") return AdvVariant::StdNorm;
    if (name == "mean_only") return AdvVariant::MeanOnly;
    throw std::invalid_argument("unknown advantage variant: " + name);
}

const char* optimizer_name(Optimizer o) { return o == Optimizer::SGD ? "sgd" : "adam"; }

Optimizer parse_optimizer(const std::string& name) {
    if (name == "sgd") return Optimizer::SGD;
    if (name == "adam") return Optimizer::Adam;
    throw std::invalid_argument("unknown optimizer: " + name);
}

const char* condition_mode_name(ConditionMode m) {
    return m == ConditionMode::CleanOnly ? "clean_only" : "on_source";
}

ConditionMode parse_condition_mode(const std::string& name) {
    if (name == "clean_only") return ConditionMode::CleanOnly;
    if (name == "on_source") return ConditionMode::OnSource;
    throw std::invalid_argument("unknown condition mode: " + name);
}

void TrainConfig::validate() const {
    if (n1 < 0 || n2 < 0 || n1 + n2 < 2)
        throw std::invalid_argument("TrainConfig: need n1 >= 0, n2 >= 0, n1+n2 >= 2");
    if (t_max <= 0) throw std::invalid_argument("TrainConfig: t_max must be positive");
    if (rollout_batch <= 0)
        throw std::invalid_argument("TrainConfig: rollout_batch must be positive");
    if (updates_per_collection < 1 || updates_per_collection > rollout_batch)
        throw std::invalid_argument(
            "TrainConfig: updates_per_collection must be in [1, rollout_batch]");
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw std::invalid_argument("TrainConfig: lr must be positive and finite");
    if (!(eps_low > 0.0 && eps_low < 1.0) || !(eps_high > 0.0 && eps_high < 1.0))
        throw std::invalid_argument("TrainConfig: clip epsilons must lie in (0,1)");
    if (!(temp_clean > 0.0) || !(temp_noisy > 0.0))
        throw std::invalid_argument("TrainConfig: temperatures must be positive");
    if (noisy_reward_penalty > 0.0)
        throw std::invalid_argument("TrainConfig: noisy_reward_penalty must be <= 0");
    if (feat_dim <= 0 || hidden_dim <= 0)
        throw std::invalid_argument("TrainConfig: feat_dim and hidden_dim must be positive");
    if (fixed_dataset_size < 0)
        throw std::invalid_argument("TrainConfig: fixed_dataset_size must be >= 0");
    validate_schedule(schedule);
}

std::vector<double> compute_advantages(const std::vector<double>& rewards, AdvVariant variant) {
    if (rewards.size() < 2)
        throw std::invalid_argument("compute_advantages: need at least 2 rewards");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    std::vector<double> out(rewards.size());
    if (variant == AdvVariant::MeanOnly) {
        for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - mean;
        return out;
    }
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double stddev = std::sqrt(var / n);
    if (stddev < 1e-8) return out;  // degenerate group: all advantages zero
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / stddev;
    return out;
}

RolloutGroup collect_group(const PolicyParams& params_old, const TaskInstance& instance,
                           const TrainConfig& cfg, double alpha_t, std::uint64_t rng_seed) {
    if (!(alpha_t >= 0.0)) throw std::invalid_argument("collect_group: alpha_t must be >= 0");
    if (is_diagnostic_distortion(cfg.distortion) && !cfg.allow_diagnostic_distortion)
        throw std::invalid_argument(
            "collect_group: diagnostic distortion kinds degrade the task beyond recovery; "
            "set allow_diagnostic_distortion to proceed");

    RolloutGroup group;
    group.instance = instance;
    group.n1 = cfg.n1;
    group.n2 = cfg.n2;
    group.distorted = apply_distortion(instance.image, cfg.distortion, alpha_t,
                                       derive_seed(rng_seed, seed_tag::kDistortion));

    const Projection proj_clean = project_raster(params_old, instance.image);
    Projection proj_noisy;
    if (cfg.n2 > 0) proj_noisy = project_raster(params_old, group.distorted);

    group.trajectories.reserve(cfg.n1 + cfg.n2);
    for (int i = 0; i < cfg.n1; ++i) {
        Trajectory t = sample_trajectory(params_old, proj_clean, instance.query_shape,
                                         cfg.temp_clean,
                                         derive_seed(rng_seed, seed_tag::kTrajectory, i));
        t.source = RolloutSource::Clean;
        t.gen_strength = 0.0;
        group.trajectories.push_back(std::move(t));
    }
    for (int i = 0; i < cfg.n2; ++i) {
        Trajectory t = sample_trajectory(
            params_old, proj_noisy, instance.query_shape, cfg.temp_noisy,
            derive_seed(rng_seed, seed_tag::kTrajectory, cfg.n1 + i));
        t.source = RolloutSource::Noisy;
        t.gen_strength = alpha_t;
        group.trajectories.push_back(std::move(t));
    }

    group.rewards.resize(group.trajectories.size());
    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
        group.rewards[i] = reward(instance, group.trajectories[i].tokens);
        if (static_cast<int>(i) >= cfg.n1) group.rewards[i] += cfg.noisy_reward_penalty;
    }
    group.advantages = compute_advantages(group.rewards, cfg.adv_variant);

    group.old_clean_logprobs.reserve(group.trajectories.size());
    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
        const bool noisy = static_cast<int>(i) >= cfg.n1;
        const Projection& cond =
            (noisy && cfg.condition_mode == ConditionMode::OnSource) ? proj_noisy : proj_clean;
        group.old_clean_logprobs.push_back(logprobs_under(
            params_old, cond, instance.query_shape, group.trajectories[i].tokens));
    }
    return group;
}

std::string metrics_line(const StepMetrics& m) {
    nlohmann::ordered_json j;
    j["step"] = m.step;
    j["alpha_t"] = m.alpha_t;
    j["mean_reward"] = m.mean_reward;
    j["clean_mean_reward"] = m.clean_mean_reward;
    j["noisy_mean_reward"] = m.noisy_mean_reward;
    j["clip_fraction"] = m.clip_fraction;
    j["loss"] = m.loss;
    if (m.eval_acc_clean) j["eval_acc_clean"] = *m.eval_acc_clean;
    if (m.eval_acc_distorted) j["eval_acc_distorted"] = *m.eval_acc_distorted;
    if (m.diversity) j["diversity"] = *m.diversity;
    return j.dump();
}

StepMetrics update_step(PolicyParams& params, AdamState* adam,
                        const std::vector<RolloutGroup>& groups, const TrainConfig& cfg,
                        double alpha_t) {
    if (groups.empty()) throw std::invalid_argument("update_step: no groups");

    StepMetrics m;
    m.alpha_t = alpha_t;
    std::size_t clean_n = 0, noisy_n = 0;
    for (const RolloutGroup& g : groups) {
        for (std::size_t i = 0; i < g.rewards.size(); ++i) {
            m.mean_reward += g.rewards[i];
            if (static_cast<int>(i) < g.n1) {
                m.clean_mean_reward += g.rewards[i];
                ++clean_n;
            } else {
                m.noisy_mean_reward += g.rewards[i];
                ++noisy_n;
            }
        }
    }
    m.mean_reward /= static_cast<double>(clean_n + noisy_n);
    m.clean_mean_reward = clean_n ? m.clean_mean_reward / static_cast<double>(clean_n) : 0.0;
    m.noisy_mean_reward = noisy_n ? m.noisy_mean_reward / static_cast<double>(noisy_n) : 0.0;

    const int upd = cfg.updates_per_collection;
    const int n_groups = static_cast<int>(groups.size());
    double loss_weighted = 0.0, clip_weighted = 0.0;
    std::size_t tokens_total = 0;

    for (int c = 0; c < upd; ++c) {
        const int lo = static_cast<int>(static_cast<long long>(c) * n_groups / upd);
        const int hi = static_cast<int>(static_cast<long long>(c + 1) * n_groups / upd);
        if (lo == hi) continue;

        std::vector<SurrogateItem> items;
        std::size_t chunk_tokens = 0;
        for (int g = lo; g < hi; ++g) {
            const RolloutGroup& group = groups[g];
            for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
                SurrogateItem item;
                const bool noisy = static_cast<int>(i) >= group.n1;
                item.raster = (noisy && cfg.condition_mode == ConditionMode::OnSource)
                                  ? &group.distorted
                                  : &group.instance.image;
                item.query_shape = group.instance.query_shape;
                item.tokens = group.trajectories[i].tokens;
                item.old_logprobs = group.old_clean_logprobs[i];
                item.advantage = group.advantages[i];
                chunk_tokens += item.tokens.size();
                items.push_back(std::move(item));
            }
        }
        const SurrogateResult res = surrogate_grad(params, items, cfg.eps_low, cfg.eps_high);
        if (!res.grads.all_zero()) {
            if (cfg.optimizer == Optimizer::SGD) {
                sgd_step(params, res.grads, cfg.lr);
            } else {
                if (!adam) throw std::invalid_argument("update_step: Adam state missing");
                adam_step(*adam, params, res.grads, cfg.lr);
            }
        }
        loss_weighted += res.loss * static_cast<double>(chunk_tokens);
        clip_weighted += res.clip_fraction * static_cast<double>(chunk_tokens);
        tokens_total += chunk_tokens;
    }
    if (tokens_total > 0) {
        m.loss = loss_weighted / static_cast<double>(tokens_total);
        m.clip_fraction = clip_weighted / static_cast<double>(tokens_total);
    }
    return m;
}

double evaluate(const PolicyParams& params, const TaskSpec& spec, int n_eval,
                double eval_strength, std::uint64_t seed, DistortionKind kind) {
    if (n_eval < 1) throw std::invalid_argument("evaluate: n_eval must be >= 1");
    int correct = 0;
    for (int i = 0; i < n_eval; ++i) {
        const TaskInstance inst =
            sample_instance(spec, derive_seed(seed, seed_tag::kEval, i));
        std::vector<int> tokens;
        if (eval_strength > 0.0) {
            const Raster degraded =
                apply_distortion(inst.image, kind, eval_strength,
                                 derive_seed(seed, seed_tag::kDistortion, i));
            tokens = greedy_decode(params, degraded, inst.query_shape);
        } else {
            tokens = greedy_decode(params, inst.image, inst.query_shape);
        }
        if (reward(inst, tokens) == 1.0) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n_eval);
}

namespace {

// Instance sources: streamed (fresh per step) or a fixed epoch-shuffled pool.
struct InstanceFeed {
    const TaskSpec* spec;
    std::uint64_t master_seed;
    std::uint64_t data_seed;
    std::vector<TaskInstance> pool;
    std::vector<int> order;
    std::size_t cursor = 0;
    int epoch = 0;

    InstanceFeed(const TaskSpec& s, const TrainConfig& cfg)
        : spec(&s), master_seed(cfg.master_seed),
          data_seed(cfg.data_seed ? cfg.data_seed : cfg.master_seed) {
        if (cfg.fixed_dataset_size > 0) {
            pool.reserve(cfg.fixed_dataset_size);
            for (int i = 0; i < cfg.fixed_dataset_size; ++i)
                pool.push_back(
                    sample_instance(s, derive_seed(data_seed, seed_tag::kPool, i)));
            order.resize(pool.size());
            reshuffle();
        }
    }

    void reshuffle() {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        Rng rng(derive_seed(data_seed, seed_tag::kShuffle, epoch));
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const std::size_t j = i + rng.uniform_int(order.size() - i);
            std::swap(order[i], order[j]);
        }
        ++epoch;
        cursor = 0;
    }

    TaskInstance draw(int step, int g) {
        if (pool.empty())
            return sample_instance(*spec,
                                   derive_seed(master_seed, seed_tag::kInstance, step, g));
        if (cursor >= order.size()) reshuffle();
        return pool[order[cursor++]];
    }
};

void run_parallel(int count, int threads, const std::function<void(int)>& body) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    const int workers = std::min(threads, count);
    std::vector<std::thread> crew;
    crew.reserve(workers);
    for (int w = 0; w < workers; ++w)
        crew.emplace_back([&, w] {
            for (int i = w; i < count; i += workers) body(i);
        });
    for (std::thread& t : crew) t.join();
}

double batch_diversity(const std::vector<RolloutGroup>& groups) {
    double sum = 0.0;
    for (const RolloutGroup& g : groups) {
        std::vector<std::vector<int>> seqs;
        seqs.reserve(g.trajectories.size());
        for (const Trajectory& t : g.trajectories) seqs.push_back(t.tokens);
        sum += diversity(seqs);
    }
    return sum / static_cast<double>(groups.size());
}

ReplayStep replay_from_groups(int step, const std::vector<RolloutGroup>& groups,
                              const TrainConfig& cfg) {
    ReplayStep replay;
    replay.step = step;
    replay.groups.reserve(groups.size());
    for (const RolloutGroup& g : groups) {
        ReplayGroup rg;
        rg.raster_clean = g.instance.image;
        if (cfg.condition_mode == ConditionMode::OnSource && g.n2 > 0)
            rg.raster_source = g.distorted;
        rg.query_shape = g.instance.query_shape;
        for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
            ReplayTraj rt;
            rt.tokens = g.trajectories[i].tokens;
            rt.old_logprobs = g.old_clean_logprobs[i];
            rt.advantage = g.advantages[i];
            rt.noisy = static_cast<int>(i) >= g.n1;
            rg.trajectories.push_back(std::move(rt));
        }
        replay.groups.push_back(std::move(rg));
    }
    return replay;
}

struct LoopHooks {
    // Collects this step's groups; owns the difference between the hybrid
    // and the vanilla trainer.
    std::function<std::vector<RolloutGroup>(const PolicyParams&, int step, double alpha)>
        collect;
    std::function<double(int step)> alpha_at;
};

TrainResult run_training_loop(const TaskSpec& task, const TrainConfig& cfg,
                              const TrainSinks& sinks, const LoopHooks& hooks) {
    task.validate();
    cfg.validate();

    PolicyDims dims;
    dims.feat = cfg.feat_dim;
    dims.hidden = cfg.hidden_dim;
    dims.shapes = task.shapes;
    dims.vocab = kVocabSize;
    dims.grid = task.grid;
    dims.max_len = task.max_len;

    TrainResult result;
    result.params = init_policy(dims, cfg.master_seed);
    AdamState adam = AdamState::zeros(dims);

    const bool to_disk = !sinks.out_dir.empty();
    std::ofstream metrics_file;
    if (to_disk) {
        std::filesystem::create_directories(sinks.out_dir);
        metrics_file.open(sinks.out_dir + "/metrics.jsonl", std::ios::trunc);
        if (!metrics_file)
            throw std::runtime_error("cannot open metrics.jsonl in " + sinks.out_dir);
        if (sinks.checkpoint_every > 0)
            save_checkpoint(sinks.out_dir + "/step-0.ckpt", result.params, 0,
                            std::to_string(cfg.master_seed));
    }

    for (int t = 1; t <= cfg.t_max; ++t) {
        const double alpha = hooks.alpha_at(t);
        const std::vector<RolloutGroup> groups = hooks.collect(result.params, t, alpha);

        if (to_disk && sinks.record_replay) {
            const std::string path =
                sinks.out_dir + "/step-" + std::to_string(t) + ".replay";
            try {
                write_replay(path, replay_from_groups(t, groups, cfg));
            } catch (const std::exception& e) {
                throw std::runtime_error("step " + std::to_string(t) +
                                         ": replay write failed: " + e.what());
            }
        }

        StepMetrics m = update_step(result.params, &adam, groups, cfg, alpha);
        m.step = t;
        if (sinks.log_diversity_every > 0 && t % sinks.log_diversity_every == 0)
            m.diversity = batch_diversity(groups);
        if (t == cfg.t_max && sinks.eval_n > 0) {
            m.eval_acc_clean = evaluate(result.params, task, sinks.eval_n, 0.0,
                                        derive_seed(cfg.master_seed, seed_tag::kEval, 0));
            const DistortionKind eval_kind = is_diagnostic_distortion(cfg.distortion)
                                                 ? DistortionKind::GaussianSteps
                                                 : cfg.distortion;
            m.eval_acc_distorted =
                evaluate(result.params, task, sinks.eval_n, sinks.eval_strength,
                         derive_seed(cfg.master_seed, seed_tag::kEval, 1), eval_kind);
            result.final_acc_clean = *m.eval_acc_clean;
            result.final_acc_distorted = *m.eval_acc_distorted;
        }

        const std::string line = metrics_line(m);
        result.metrics_jsonl += line;
        result.metrics_jsonl += '\n';
        if (to_disk) {
            metrics_file << line << '\n';
            if (!metrics_file)
                throw std::runtime_error("step " + std::to_string(t) +
                                         ": metrics write failed");
            metrics_file.flush();
        }
        result.metrics.push_back(std::move(m));

        if (to_disk && sinks.checkpoint_every > 0 && t % sinks.checkpoint_every == 0) {
            try {
                save_checkpoint(sinks.out_dir + "/step-" + std::to_string(t) + ".ckpt",
                                result.params, t, std::to_string(cfg.master_seed));
            } catch (const std::exception& e) {
                throw std::runtime_error("step " + std::to_string(t) +
                                         ": checkpoint write failed: " + e.what());
            }
        }
    }
    return result;
}

}  // namespace

TrainResult train(const TaskSpec& task, const TrainConfig& cfg, const TrainSinks& sinks) {
    InstanceFeed feed(task, cfg);
    LoopHooks hooks;
    hooks.alpha_at = [&cfg](int t) { return eval_schedule(cfg.schedule, t, cfg.t_max); };
    hooks.collect = [&](const PolicyParams& params, int t, double alpha) {
        std::vector<TaskInstance> instances(cfg.rollout_batch);
        for (int g = 0; g < cfg.rollout_batch; ++g) instances[g] = feed.draw(t, g);
        std::vector<RolloutGroup> groups(cfg.rollout_batch);
        run_parallel(cfg.rollout_batch, sinks.threads, [&](int g) {
            groups[g] = collect_group(params, instances[g], cfg, alpha,
                                      derive_seed(cfg.master_seed, seed_tag::kGroup, t, g));
        });
        return groups;
    };
    return run_training_loop(task, cfg, sinks, hooks);
}

TrainResult train_vanilla(const TaskSpec& task, const TrainConfig& cfg,
                          const TrainSinks& sinks) {
    // Plain GRPO: every rollout conditions on the clean image and the noise
    // pipeline is never touched. Holds total rollouts at n1+n2.
    TrainConfig vcfg = cfg;
    vcfg.n1 = cfg.n1 + cfg.n2;
    vcfg.n2 = 0;
    vcfg.schedule = ScheduleSpec{};
    vcfg.schedule.kind = ScheduleKind::Constant;
    vcfg.schedule.alpha0 = 0.0;

    InstanceFeed feed(task, vcfg);
    LoopHooks hooks;
    hooks.alpha_at = [](int) { return 0.0; };
    hooks.collect = [&, vcfg](const PolicyParams& params, int t, double) {
        std::vector<TaskInstance> instances(vcfg.rollout_batch);
        for (int g = 0; g < vcfg.rollout_batch; ++g) instances[g] = feed.draw(t, g);
        std::vector<RolloutGroup> groups(vcfg.rollout_batch);
        run_parallel(vcfg.rollout_batch, sinks.threads, [&](int g) {
            const TaskInstance& inst = instances[g];
            const std::uint64_t seed =
                derive_seed(vcfg.master_seed, seed_tag::kGroup, t, g);
            RolloutGroup group;
            group.instance = inst;
            group.distorted = inst.image;
            group.n1 = vcfg.n1;
            group.n2 = 0;
            const Projection proj = project_raster(params, inst.image);
            for (int i = 0; i < vcfg.n1; ++i) {
                Trajectory traj =
                    sample_trajectory(params, proj, inst.query_shape, vcfg.temp_clean,
                                      derive_seed(seed, seed_tag::kTrajectory, i));
                traj.source = RolloutSource::Clean;
                group.trajectories.push_back(std::move(traj));
            }
            group.rewards.resize(group.trajectories.size());
            for (std::size_t i = 0; i < group.trajectories.size(); ++i)
                group.rewards[i] = reward(inst, group.trajectories[i].tokens);
            group.advantages = compute_advantages(group.rewards, vcfg.adv_variant);
            for (const Trajectory& traj : group.trajectories)
                group.old_clean_logprobs.push_back(
                    logprobs_under(params, proj, inst.query_shape, traj.tokens));
            groups[g] = std::move(group);
        });
        return groups;
    };
    return run_training_loop(task, vcfg, sinks, hooks);
}

void write_replay(const std::string& path, const ReplayStep& replay) {
    nlohmann::ordered_json manifest;
    manifest["version"] = 1;
    manifest["kind"] = "replay";
    manifest["step"] = replay.step;
    std::vector<double> blob;
    auto put_raster = [&blob](const Raster& r) {
        nlohmann::ordered_json j = {
            {"width", r.width}, {"height", r.height}, {"offset", blob.size()}};
        blob.insert(blob.end(), r.pixels.begin(), r.pixels.end());
        return j;
    };
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (const ReplayGroup& g : replay.groups) {
        nlohmann::ordered_json jg;
        jg["query"] = g.query_shape;
        jg["raster_clean"] = put_raster(g.raster_clean);
        if (g.raster_source) jg["raster_source"] = put_raster(*g.raster_source);
        nlohmann::ordered_json trajs = nlohmann::ordered_json::array();
        for (const ReplayTraj& t : g.trajectories) {
            nlohmann::ordered_json jt;
            jt["tokens"] = t.tokens;
            jt["advantage"] = t.advantage;
            jt["noisy"] = t.noisy;
            jt["lp_offset"] = blob.size();
            blob.insert(blob.end(), t.old_logprobs.begin(), t.old_logprobs.end());
            trajs.push_back(std::move(jt));
        }
        jg["trajectories"] = std::move(trajs);
        groups.push_back(std::move(jg));
    }
    manifest["groups"] = std::move(groups);
    write_blob_file(path, manifest, blob);
}

ReplayStep read_replay(const std::string& path) {
    const BlobFile file = read_blob_file(path);
    const nlohmann::json& manifest = file.manifest;
    if (manifest.value("kind", "") != "replay")
        throw std::runtime_error(path + ": not a replay file");

    auto get_raster = [&](const nlohmann::json& j) {
        Raster r(j.at("width").get<int>(), j.at("height").get<int>());
        const std::size_t offset = j.at("offset").get<std::size_t>();
        if (offset + r.size() > file.blob.size())
            throw std::runtime_error(path + ": raster extends past blob");
        std::copy(file.blob.begin() + offset, file.blob.begin() + offset + r.size(),
                  r.pixels.begin());
        return r;
    };

    ReplayStep replay;
    replay.step = manifest.at("step").get<int>();
    for (const nlohmann::json& jg : manifest.at("groups")) {
        ReplayGroup g;
        g.query_shape = jg.at("query").get<int>();
        g.raster_clean = get_raster(jg.at("raster_clean"));
        if (jg.contains("raster_source")) g.raster_source = get_raster(jg.at("raster_source"));
        for (const nlohmann::json& jt : jg.at("trajectories")) {
            ReplayTraj t;
            t.tokens = jt.at("tokens").get<std::vector<int>>();
            t.advantage = jt.at("advantage").get<double>();
            t.noisy = jt.at("noisy").get<bool>();
            const std::size_t offset = jt.at("lp_offset").get<std::size_t>();
            if (offset + t.tokens.size() > file.blob.size())
                throw std::runtime_error(path + ": logprobs extend past blob");
            t.old_logprobs.assign(file.blob.begin() + offset,
                                  file.blob.begin() + offset + t.tokens.size());
            g.trajectories.push_back(std::move(t));
        }
        replay.groups.push_back(std::move(g));
    }
    return replay;
}

}  // namespace glyphrl
