#include "glyphrl/analysis.hpp"
#include "glyphrl/config.hpp"
#include "glyphrl/env.hpp"
#include "glyphrl/grpo.hpp"
#include "glyphrl/raster.hpp"
#include "glyphrl/rng.hpp"
#include "glyphrl/schedule.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace glyphrl;

namespace {

std::string fmt_double(double v) {
    if (std::isfinite(v) && std::fabs(v) < 9007199254740992.0 && v == std::floor(v))
        return std::to_string(static_cast<long long>(v));
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

int worker_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("NR_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1)
            hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
    }
    return static_cast<int>(hw);
}

ExperimentConfig load_with_overrides(const std::string& path,
                                     const std::vector<std::string>& sets) {
    ExperimentConfig cfg = load_config(path);
    for (const std::string& s : sets) apply_override(cfg, s);
    cfg.validate();
    return cfg;
}

DistortionKind eval_kind_for(const TrainConfig& train) {
    return is_diagnostic_distortion(train.distortion) ? DistortionKind::GaussianSteps
                                                      : train.distortion;
}

TrainSinks sinks_from(const ExperimentConfig& cfg) {
    TrainSinks sinks;
    sinks.out_dir = cfg.io.out_dir;
    sinks.checkpoint_every = cfg.io.checkpoint_every;
    sinks.log_diversity_every = cfg.io.log_diversity_every;
    sinks.record_replay = cfg.io.record_replay;
    sinks.eval_n = cfg.eval.n_eval;
    sinks.eval_strength =
        cfg.eval.eval_strengths.size() >= 2 ? cfg.eval.eval_strengths[1] : 200.0;
    sinks.threads = worker_threads();
    return sinks;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets) {
    ExperimentConfig cfg = load_with_overrides(config_path, sets);
    if (cfg.io.out_dir.empty())
        throw ConfigError("io.out_dir is required for train");

    fs::create_directories(cfg.io.out_dir);
    write_text_file(cfg.io.out_dir + "/config.toml", resolved_config_toml(cfg));

    TrainResult res = train(cfg.task, cfg.train, sinks_from(cfg));

    for (std::size_t i = 0; i < cfg.eval.eval_strengths.size(); ++i) {
        const double strength = cfg.eval.eval_strengths[i];
        const double acc =
            evaluate(res.params, cfg.task, cfg.eval.n_eval, strength,
                     derive_seed(cfg.train.master_seed, seed_tag::kEval,
                                 static_cast<std::uint64_t>(i)),
                     eval_kind_for(cfg.train));
        std::printf("final_acc[strength=%s] = %.4f\n", fmt_double(strength).c_str(), acc);
    }
    std::printf("run artifacts in %s\n", cfg.io.out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& config_path,
             const std::vector<std::string>& sets, int n_override,
             std::vector<double> strengths, std::uint64_t seed_flag) {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_with_overrides(config_path, sets);

    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::uint64_t seed = seed_flag;
    if (seed == 0) {
        try {
            seed = std::stoull(ckpt.rng_state);
        } catch (...) {
            seed = 1;
        }
    }
    const int n_eval = n_override > 0 ? n_override : cfg.eval.n_eval;
    if (strengths.empty()) strengths = cfg.eval.eval_strengths;

    for (std::size_t i = 0; i < strengths.size(); ++i) {
        const double acc = evaluate(
            ckpt.params, cfg.task, n_eval, strengths[i],
            derive_seed(seed, seed_tag::kEval, static_cast<std::uint64_t>(i)),
            eval_kind_for(cfg.train));
        std::printf("strength=%s acc=%.4f\n", fmt_double(strengths[i]).c_str(), acc);
    }
    return 0;
}

struct ArmResult {
    TrainResult run;
    std::vector<double> final_accs;  // one per eval strength
};

int cmd_compare(const std::string& config_path, const std::vector<std::string>& sets,
                std::vector<std::uint64_t> seeds, std::string out_path) {
    ExperimentConfig cfg = load_with_overrides(config_path, sets);
    if (seeds.empty()) seeds = {1, 2, 3, 4, 5};

    TrainSinks sinks = sinks_from(cfg);
    sinks.out_dir.clear();  // comparison runs stay in memory
    sinks.record_replay = false;
    sinks.checkpoint_every = 0;
    sinks.log_diversity_every = 1;

    std::vector<ArmResult> noisy_arm, vanilla_arm;
    for (std::uint64_t seed : seeds) {
        TrainConfig tc = cfg.train;
        tc.master_seed = seed;
        for (bool vanilla : {false, true}) {
            ArmResult arm;
            arm.run = vanilla ? train_vanilla(cfg.task, tc, sinks) : train(cfg.task, tc, sinks);
            for (std::size_t i = 0; i < cfg.eval.eval_strengths.size(); ++i)
                arm.final_accs.push_back(evaluate(
                    arm.run.params, cfg.task, cfg.eval.n_eval, cfg.eval.eval_strengths[i],
                    derive_seed(seed, seed_tag::kEval, static_cast<std::uint64_t>(i)),
                    eval_kind_for(cfg.train)));
            (vanilla ? vanilla_arm : noisy_arm).push_back(std::move(arm));
        }
    }

    std::string csv = "step";
    const char* metrics[] = {"mean_reward", "diversity", "clip_fraction"};
    for (const char* metric : metrics)
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            csv += "," + std::string(metric) + "_noisy_s" + std::to_string(seeds[s]);
            csv += "," + std::string(metric) + "_vanilla_s" + std::to_string(seeds[s]);
        }
    csv += "\n";

    auto metric_cell = [](const StepMetrics& m, const std::string& name) -> std::string {
        if (name == "mean_reward") return fmt_double(m.mean_reward);
        if (name == "clip_fraction") return fmt_double(m.clip_fraction);
        return m.diversity ? fmt_double(*m.diversity) : "";
    };
    for (int t = 1; t <= cfg.train.t_max; ++t) {
        csv += std::to_string(t);
        for (const char* metric : metrics)
            for (std::size_t s = 0; s < seeds.size(); ++s) {
                csv += "," + metric_cell(noisy_arm[s].run.metrics[t - 1], metric);
                csv += "," + metric_cell(vanilla_arm[s].run.metrics[t - 1], metric);
            }
        csv += "\n";
    }
    // Final accuracies ride in the mean_reward column block, one row per
    // evaluation strength.
    const std::size_t other_cols = 2 * seeds.size() * 2;
    for (std::size_t i = 0; i < cfg.eval.eval_strengths.size(); ++i) {
        csv += "final_acc@" + fmt_double(cfg.eval.eval_strengths[i]);
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            csv += "," + fmt_double(noisy_arm[s].final_accs[i]);
            csv += "," + fmt_double(vanilla_arm[s].final_accs[i]);
        }
        csv += std::string(other_cols, ',');
        csv += "\n";
    }

    if (out_path.empty())
        out_path = cfg.io.out_dir.empty() ? "compare.csv" : cfg.io.out_dir + "/compare.csv";
    if (fs::path(out_path).has_parent_path())
        fs::create_directories(fs::path(out_path).parent_path());
    write_text_file(out_path, csv);

    for (std::size_t i = 0; i < cfg.eval.eval_strengths.size(); ++i) {
        double mn = 0.0, mv = 0.0;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            mn += noisy_arm[s].final_accs[i];
            mv += vanilla_arm[s].final_accs[i];
        }
        std::printf("strength=%s mean_acc noisy=%.4f vanilla=%.4f\n",
                    fmt_double(cfg.eval.eval_strengths[i]).c_str(),
                    mn / seeds.size(), mv / seeds.size());
    }
    std::printf("comparison csv: %s\n", out_path.c_str());
    return 0;
}

std::map<int, fs::path> scan_run_files(const std::string& dir, const std::string& ext) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::map<int, fs::path> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("step-", 0) != 0 || entry.path().extension() != ext) continue;
        const std::string num = name.substr(5, name.size() - 5 - ext.size());
        if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos) continue;
        found[std::atoi(num.c_str())] = entry.path();
    }
    return found;
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::fputs(text.c_str(), stdout);
        return;
    }
    write_text_file(out_path, text);
    std::printf("wrote %s\n", out_path.c_str());
}

int cmd_analyze_diversity(const std::string& run_dir, const std::string& out_path) {
    const std::map<int, fs::path> replays = scan_run_files(run_dir, ".replay");
    if (replays.empty())
        throw std::runtime_error("no step-*.replay files in " + run_dir +
                                 " (record them with io.record_replay = true)");
    std::string csv = "step,diversity\n";
    for (const auto& [step, path] : replays) {
        const ReplayStep replay = read_replay(path.string());
        double sum = 0.0;
        int counted = 0;
        for (const ReplayGroup& g : replay.groups) {
            if (g.trajectories.size() < 2) continue;
            std::vector<std::vector<int>> tokens;
            tokens.reserve(g.trajectories.size());
            for (const ReplayTraj& t : g.trajectories) tokens.push_back(t.tokens);
            sum += diversity(tokens);
            ++counted;
        }
        if (!counted) continue;
        csv += std::to_string(step) + "," + fmt_double(sum / counted) + "\n";
    }
    emit(out_path, csv);
    return 0;
}

int cmd_analyze_gradients(const std::string& run_dir, int delta_t, int runs,
                          const std::string& out_path) {
    if (delta_t < 1) throw ConfigError("--delta-t must be >= 1");
    const ExperimentConfig cfg = load_config(run_dir + "/config.toml");
    const std::map<int, fs::path> ckpts = scan_run_files(run_dir, ".ckpt");
    const std::map<int, fs::path> replays = scan_run_files(run_dir, ".replay");

    std::string csv = "t,r_clean,r_noisy\n";
    int pairs = 0;
    for (const auto& [t, path_a] : ckpts) {
        const auto it_b = ckpts.find(t + delta_t);
        if (it_b == ckpts.end()) continue;
        std::vector<ReplayStep> steps;
        for (int s = t + 1; s <= t + delta_t; ++s) {
            const auto it_r = replays.find(s);
            if (it_r == replays.end())
                throw std::runtime_error(
                    "missing replay for steps " + std::to_string(t + 1) + ".." +
                    std::to_string(t + delta_t) + ": step-" + std::to_string(s) +
                    ".replay not found in " + run_dir);
            steps.push_back(read_replay(it_r->second.string()));
        }
        const Checkpoint a = load_checkpoint(path_a.string());
        const Checkpoint b = load_checkpoint(it_b->second.string());
        const GradReport report =
            make_grad_report(a, b, steps, cfg.train, kDefaultGradSelection, runs);
        csv += std::to_string(report.t) + "," + fmt_double(report.r_clean) + "," +
               fmt_double(report.r_noisy) + "\n";
        ++pairs;
    }
    if (!pairs)
        throw std::runtime_error("no checkpoint pairs spaced " + std::to_string(delta_t) +
                                 " steps apart in " + run_dir);
    emit(out_path, csv);
    return 0;
}

int cmd_analyze_bt(const std::string& jsonl_path, const std::string& out_path) {
    std::ifstream in(jsonl_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + jsonl_path);
    std::vector<BtComparison> comparisons;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(jsonl_path + ":" + std::to_string(line_no) + ": " +
                                     e.what());
        }
        BtComparison c;
        c.first = j.at("first").get<std::string>();
        c.second = j.at("second").get<std::string>();
        const std::string outcome = j.at("outcome").get<std::string>();
        if (outcome == "first") c.outcome = BtOutcome::FirstWins;
        else if (outcome == "second") c.outcome = BtOutcome::SecondWins;
        else if (outcome == "tie") c.outcome = BtOutcome::Tie;
        else
            throw std::runtime_error(jsonl_path + ":" + std::to_string(line_no) +
                                     ": outcome must be first, second, or tie");
        comparisons.push_back(std::move(c));
    }
    const BtResult fit = bt_fit(comparisons);
    std::string csv = "model,strength\n";
    for (std::size_t i = 0; i < fit.models.size(); ++i)
        csv += fit.models[i] + "," + fmt_double(fit.pi[i]) + "\n";
    emit(out_path, csv);
    std::fprintf(stderr, "converged=%s iterations=%d\n", fit.converged ? "true" : "false",
                 fit.iterations);
    return 0;
}

int cmd_distort_preview(std::uint64_t seed, const std::string& kind_name,
                        const std::vector<double>& strengths, const std::string& out_dir) {
    DistortionKind kind;
    try {
        kind = parse_distortion_kind(kind_name);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    TaskSpec spec;
    const TaskInstance instance = sample_instance(spec, seed);
    fs::create_directories(out_dir);
    for (double strength : strengths) {
        const Raster out = apply_distortion(instance.image, kind, strength,
                                            derive_seed(seed, seed_tag::kDistortion));
        const std::string path =
            out_dir + "/" + kind_name + "-" + fmt_double(strength) + ".pgm";
        write_pgm(path, out);
        std::printf("wrote %s\n", path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GlyphCount RL laboratory: GRPO with hybrid clean/noisy rollouts"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, run_dir, out_path, kind_name, jsonl_path;
    std::vector<std::string> sets;
    std::vector<std::uint64_t> seeds;
    std::vector<double> strengths;
    int delta_t = 5, runs = 1, n_eval = 0;
    std::uint64_t seed = 0;

    CLI::App* train_cmd = app.add_subcommand("train", "Run one training job from a config");
    train_cmd->add_option("config", config_path, "TOML config path")->required();
    train_cmd->add_option("--set", sets, "Override, e.g. --set train.n2=0");

    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
    eval_cmd->add_option("config", config_path, "TOML config path (optional)");
    eval_cmd->add_option("--set", sets, "Config override");
    eval_cmd->add_option("--n", n_eval, "Evaluation episodes (default: config)");
    eval_cmd->add_option("--strengths", strengths, "Distortion strengths (default: config)");
    eval_cmd->add_option("--seed", seed, "Eval seed (default: stored in checkpoint)");

    CLI::App* compare_cmd = app.add_subcommand(
        "compare", "Train the config and its vanilla twin (n1+n2 clean rollouts) per seed");
    compare_cmd->add_option("config", config_path, "TOML config path")->required();
    compare_cmd->add_option("--set", sets, "Config override");
    compare_cmd->add_option("--seeds", seeds, "Seeds (default: 1 2 3 4 5)");
    compare_cmd->add_option("--out", out_path, "CSV path (default: <out_dir>/compare.csv)");

    CLI::App* analyze_cmd = app.add_subcommand("analyze", "Offline analyses of a stored run");
    analyze_cmd->require_subcommand(1);
    CLI::App* div_cmd =
        analyze_cmd->add_subcommand("diversity", "Per-step rollout diversity from replays");
    div_cmd->add_option("run_dir", run_dir, "Run directory")->required();
    div_cmd->add_option("--out", out_path, "CSV path (default: stdout)");
    CLI::App* grad_cmd = analyze_cmd->add_subcommand(
        "gradients", "Clean/noisy gradient projections onto parameter-update anchors");
    grad_cmd->add_option("run_dir", run_dir, "Run directory")->required();
    grad_cmd->add_option("--delta-t", delta_t, "Checkpoint spacing (default 5)");
    grad_cmd->add_option("--runs", runs, "Replay repetitions to average (default 1)");
    grad_cmd->add_option("--out", out_path, "CSV path (default: stdout)");
    CLI::App* bt_cmd =
        analyze_cmd->add_subcommand("bt", "Fit Bradley-Terry strengths from comparisons");
    bt_cmd->add_option("comparisons", jsonl_path,
                       "JSONL file of {first, second, outcome} objects")
        ->required();
    bt_cmd->add_option("--out", out_path, "CSV path (default: stdout)");

    CLI::App* preview_cmd = app.add_subcommand(
        "distort-preview", "Render one sampled instance at several distortion strengths");
    preview_cmd->add_option("--kind", kind_name, "Distortion kind")->required();
    preview_cmd
        ->add_option("--strengths", strengths, "Strengths (default: 0 300 500 700 900)")
        ->expected(-1);
    preview_cmd->add_option("--seed", seed, "Instance seed (default 1)");
    preview_cmd->add_option("--out-dir", out_path, "Output directory (default .)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train_cmd) return cmd_train(config_path, sets);
        if (*eval_cmd) return cmd_eval(ckpt_path, config_path, sets, n_eval, strengths, seed);
        if (*compare_cmd) return cmd_compare(config_path, sets, seeds, out_path);
        if (*div_cmd) return cmd_analyze_diversity(run_dir, out_path);
        if (*grad_cmd) return cmd_analyze_gradients(run_dir, delta_t, runs, out_path);
        if (*bt_cmd) return cmd_analyze_bt(jsonl_path, out_path);
        if (*preview_cmd) {
            if (strengths.empty()) strengths = {0, 300, 500, 700, 900};
            if (seed == 0) seed = 1;
            return cmd_distort_preview(seed, kind_name,
                                       strengths, out_path.empty() ? "." : out_path);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}
