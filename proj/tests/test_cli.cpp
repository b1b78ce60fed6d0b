// Drives the glyphrl binary as a subprocess. The test runner passes the
// binary path as argv[1] (wired up in CMakeLists.txt).

#include "glyphrl/analysis.hpp"
#include "glyphrl/config.hpp"
#include "glyphrl/env.hpp"
#include "glyphrl/grpo.hpp"
#include "glyphrl/policy.hpp"
#include "glyphrl/raster.hpp"
#include "glyphrl/rng.hpp"

#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace glyphrl;

namespace {

std::string g_binary;
fs::path g_work;

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) ADD_FAILURE() << "cannot open " << path;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    ASSERT_TRUE(out.good()) << "cannot write " << path;
}

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr,
            std::string* err = nullptr) {
    static int call = 0;
    const fs::path out_file = g_work / ("stdout." + std::to_string(call));
    const fs::path err_file = g_work / ("stderr." + std::to_string(call));
    ++call;

    std::string cmd = g_binary;
    for (const std::string& a : args) cmd += " " + a;
    cmd += " >" + out_file.string() + " 2>" + err_file.string();

    const int status = std::system(cmd.c_str());
    if (out) *out = slurp(out_file);
    if (err) *err = slurp(err_file);
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

// Small run that finishes in well under a second. Rewards stay at zero for
// an untrained policy this tiny, which is fine: these tests exercise the
// command surface and artifact layout, not learning.
std::string tiny_config(const std::string& out_dir) {
    return "[task]\n"
           "grid = 32\n"
           "[train]\n"
           "n1 = 2\n"
           "n2 = 2\n"
           "t_max = 4\n"
           "rollout_batch = 2\n"
           "feat_dim = 8\n"
           "hidden_dim = 8\n"
           "master_seed = 7\n"
           "[eval]\n"
           "n_eval = 10\n"
           "eval_strengths = [0, 200]\n"
           "[io]\n"
           "out_dir = \"" +
           out_dir +
           "\"\n"
           "checkpoint_every = 2\n"
           "log_diversity_every = 2\n"
           "record_replay = true\n";
}

fs::path write_tiny_config(const std::string& name) {
    const fs::path run_dir = g_work / ("run_" + name);
    const fs::path cfg_path = g_work / (name + ".toml");
    spit(cfg_path, tiny_config(run_dir.string()));
    return cfg_path;
}

}  // namespace

TEST(Cli, NoSubcommandFails) {
    std::string err;
    EXPECT_EQ(run_cli({}, nullptr, &err), 2);
    EXPECT_NE(err.find("subcommand"), std::string::npos) << err;
}

TEST(Cli, HelpExitsCleanly) {
    std::string out;
    EXPECT_EQ(run_cli({"--help"}, &out), 0);
    EXPECT_NE(out.find("train"), std::string::npos);
    EXPECT_NE(out.find("analyze"), std::string::npos);
}

TEST(Cli, TrainRejectsMissingConfig) {
    const std::string missing = (g_work / "nope.toml").string();
    std::string err;
    EXPECT_EQ(run_cli({"train", missing}, nullptr, &err), 2);
    EXPECT_NE(err.find("nope.toml"), std::string::npos) << err;
}

TEST(Cli, TrainRejectsBadOverride) {
    const fs::path cfg = write_tiny_config("badset");
    std::string err;
    EXPECT_EQ(run_cli({"train", cfg.string(), "--set", "train.flux=1"}, nullptr, &err), 2);
    EXPECT_NE(err.find("flux"), std::string::npos) << err;
}

TEST(Cli, TrainWritesRunArtifacts) {
    const fs::path cfg = write_tiny_config("artifacts");
    const fs::path run_dir = g_work / "run_artifacts";

    std::string out;
    ASSERT_EQ(run_cli({"train", cfg.string()}, &out), 0);
    EXPECT_NE(out.find("final_acc"), std::string::npos) << out;

    EXPECT_TRUE(fs::exists(run_dir / "config.toml"));
    for (int t : {0, 2, 4})
        EXPECT_TRUE(fs::exists(run_dir / ("step-" + std::to_string(t) + ".ckpt"))) << t;
    EXPECT_FALSE(fs::exists(run_dir / "step-1.ckpt"));
    for (int t : {1, 2, 3, 4})
        EXPECT_TRUE(fs::exists(run_dir / ("step-" + std::to_string(t) + ".replay"))) << t;

    const std::string metrics = slurp(run_dir / "metrics.jsonl");
    ASSERT_EQ(count_lines(metrics), 4);
    std::istringstream lines(metrics);
    std::string line;
    int step = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.at("step").get<int>(), ++step);
        EXPECT_TRUE(j.contains("mean_reward"));
        EXPECT_EQ(j.contains("diversity"), step % 2 == 0) << line;
    }

    // The resolved config in the run dir reparses to the same settings.
    const ExperimentConfig resolved = load_config((run_dir / "config.toml").string());
    EXPECT_EQ(resolved.train.t_max, 4);
    EXPECT_EQ(resolved.io.out_dir, run_dir.string());
}

TEST(Cli, TrainRerunsAreByteIdentical) {
    const fs::path cfg = write_tiny_config("rerun");
    const fs::path dir_a = g_work / "rerun_a";
    const fs::path dir_b = g_work / "rerun_b";
    ASSERT_EQ(run_cli({"train", cfg.string(), "--set", "io.out_dir=" + dir_a.string()}), 0);
    ASSERT_EQ(run_cli({"train", cfg.string(), "--set", "io.out_dir=" + dir_b.string()}), 0);

    EXPECT_EQ(slurp(dir_a / "metrics.jsonl"), slurp(dir_b / "metrics.jsonl"));
    EXPECT_EQ(slurp(dir_a / "step-4.ckpt"), slurp(dir_b / "step-4.ckpt"));
}

TEST(Cli, EvalReportsAccuracyPerStrength) {
    const fs::path cfg = write_tiny_config("eval");
    const fs::path run_dir = g_work / "run_eval";
    ASSERT_EQ(run_cli({"train", cfg.string()}), 0);

    std::string out;
    ASSERT_EQ(run_cli({"eval", "--ckpt", (run_dir / "step-4.ckpt").string(), cfg.string(),
                       "--n", "10"},
                      &out),
              0);
    EXPECT_NE(out.find("strength=0 acc="), std::string::npos) << out;
    EXPECT_NE(out.find("strength=200 acc="), std::string::npos) << out;
}

TEST(Cli, EvalRequiresCheckpoint) {
    std::string err;
    EXPECT_EQ(run_cli({"eval"}, nullptr, &err), 2);
    EXPECT_NE(err.find("--ckpt"), std::string::npos) << err;
}

TEST(Cli, DistortPreviewWritesReadableImages) {
    const fs::path dir = g_work / "preview";
    ASSERT_EQ(run_cli({"distort-preview", "--kind", "gaussian", "--strengths", "0", "400",
                       "--seed", "3", "--out-dir", dir.string()}),
              0);

    const Raster zero = read_pgm((dir / "gaussian-0.pgm").string());
    const Raster noisy = read_pgm((dir / "gaussian-400.pgm").string());

    // Strength zero reproduces the source scene; its binary pixels survive
    // the 8-bit image format exactly.
    const TaskInstance instance = sample_instance(TaskSpec{}, 3);
    ASSERT_EQ(zero.width, instance.image.width);
    ASSERT_EQ(zero.height, instance.image.height);
    EXPECT_EQ(zero.pixels, instance.image.pixels);
    EXPECT_NE(noisy.pixels, zero.pixels);
}

TEST(Cli, DistortPreviewRejectsUnknownKind) {
    std::string err;
    EXPECT_EQ(run_cli({"distort-preview", "--kind", "swirl"}, nullptr, &err), 2);
    EXPECT_NE(err.find("swirl"), std::string::npos) << err;
}

TEST(Cli, AnalyzeBtRecoversWinRate) {
    const fs::path jsonl = g_work / "duels.jsonl";
    std::string text;
    for (int i = 0; i < 7; ++i)
        text += R"({"first":"A","second":"B","outcome":"first"})" "\n";
    for (int i = 0; i < 3; ++i)
        text += R"({"first":"A","second":"B","outcome":"second"})" "\n";
    spit(jsonl, text);

    const fs::path csv_path = g_work / "bt.csv";
    ASSERT_EQ(run_cli({"analyze", "bt", jsonl.string(), "--out", csv_path.string()}), 0);

    std::istringstream csv(slurp(csv_path));
    std::string header, row_a, row_b;
    ASSERT_TRUE(std::getline(csv, header));
    EXPECT_EQ(header, "model,strength");
    ASSERT_TRUE(std::getline(csv, row_a));
    ASSERT_TRUE(std::getline(csv, row_b));
    ASSERT_EQ(row_a.substr(0, 2), "A,");
    ASSERT_EQ(row_b.substr(0, 2), "B,");
    const double pa = std::stod(row_a.substr(2));
    const double pb = std::stod(row_b.substr(2));
    EXPECT_NEAR(pa / (pa + pb), 0.7, 1e-6);
}

TEST(Cli, AnalyzeBtRejectsMalformedLine) {
    const fs::path jsonl = g_work / "bad.jsonl";
    spit(jsonl, "{\"first\":\"A\"\n");
    std::string err;
    EXPECT_EQ(run_cli({"analyze", "bt", jsonl.string()}, nullptr, &err), 3);
    EXPECT_NE(err.find(":1:"), std::string::npos) << err;
}

TEST(Cli, AnalyzeDiversityReadsRecordedReplays) {
    const fs::path cfg = write_tiny_config("diversity");
    const fs::path run_dir = g_work / "run_diversity";
    ASSERT_EQ(run_cli({"train", cfg.string()}), 0);

    const fs::path csv_path = g_work / "diversity.csv";
    ASSERT_EQ(
        run_cli({"analyze", "diversity", run_dir.string(), "--out", csv_path.string()}), 0);

    std::istringstream csv(slurp(csv_path));
    std::string header;
    ASSERT_TRUE(std::getline(csv, header));
    EXPECT_EQ(header, "step,diversity");
    int rows = 0;
    std::string row;
    while (std::getline(csv, row)) {
        ++rows;
        const auto comma = row.find(',');
        ASSERT_NE(comma, std::string::npos);
        EXPECT_EQ(std::stoi(row.substr(0, comma)), rows);
        const double d = std::stod(row.substr(comma + 1));
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 2.0);
    }
    EXPECT_EQ(rows, 4);
}

TEST(Cli, AnalyzeDiversityNeedsReplays) {
    const fs::path cfg = write_tiny_config("noreplay");
    const fs::path run_dir = g_work / "run_noreplay";
    ASSERT_EQ(
        run_cli({"train", cfg.string(), "--set", "io.record_replay=false"}), 0);

    std::string err;
    EXPECT_EQ(run_cli({"analyze", "diversity", run_dir.string()}, nullptr, &err), 3);
    EXPECT_NE(err.find("record_replay"), std::string::npos) << err;
}

TEST(Cli, AnalyzeGradientsNeedsReplays) {
    const fs::path run_dir = g_work / "run_noreplay";  // from the previous test
    ASSERT_TRUE(fs::exists(run_dir / "step-0.ckpt"));

    std::string err;
    EXPECT_EQ(run_cli({"analyze", "gradients", run_dir.string(), "--delta-t", "2"}, nullptr,
                      &err),
              3);
    EXPECT_NE(err.find("replay"), std::string::npos) << err;
}

TEST(Cli, AnalyzeGradientsSplitsRecordedUpdate) {
    // Fabricate a one-step run whose update actually moved the parameters,
    // so the projection ratios are well defined.
    const fs::path run_dir = g_work / "run_fabricated";
    fs::create_directories(run_dir);

    ExperimentConfig cfg;
    cfg.train.optimizer = Optimizer::SGD;
    cfg.train.lr = 0.05;
    cfg.train.feat_dim = 8;
    cfg.train.hidden_dim = 6;
    spit(run_dir / "config.toml", resolved_config_toml(cfg));

    const PolicyParams start = init_policy(PolicyDims{.feat = 8, .hidden = 6}, 11);

    ReplayStep replay;
    replay.step = 1;
    Rng rng(77);
    for (std::uint64_t g = 0; g < 2; ++g) {
        const TaskInstance inst = sample_instance(TaskSpec{}, 60 + g);
        const Raster noisy_img = gaussian_steps(inst.image, 200, 95 + g);
        ReplayGroup group;
        group.raster_clean = inst.image;
        group.query_shape = inst.query_shape;
        std::vector<double> rewards;
        for (int i = 0; i < 4; ++i) {
            const bool is_noisy = i >= 2;
            const Trajectory traj =
                sample_trajectory(start, is_noisy ? noisy_img : inst.image,
                                  inst.query_shape, 1.0, rng.raw());
            ReplayTraj rt;
            rt.tokens = traj.tokens;
            rt.old_logprobs =
                logprobs_under(start, inst.image, inst.query_shape, traj.tokens);
            rt.noisy = is_noisy;
            group.trajectories.push_back(std::move(rt));
            rewards.push_back(i == 0 ? 1.0 : 0.0);
        }
        const auto adv = compute_advantages(rewards, AdvVariant::StdNorm);
        for (int i = 0; i < 4; ++i) group.trajectories[i].advantage = adv[i];
        replay.groups.push_back(std::move(group));
    }
    write_replay((run_dir / "step-1.replay").string(), replay);

    std::vector<SurrogateItem> items;
    for (const ReplayGroup& g : replay.groups)
        for (const ReplayTraj& t : g.trajectories) {
            SurrogateItem item;
            item.raster = &g.raster_clean;
            item.query_shape = g.query_shape;
            item.tokens = t.tokens;
            item.old_logprobs = t.old_logprobs;
            item.advantage = t.advantage;
            items.push_back(std::move(item));
        }
    PolicyParams end = start;
    const SurrogateResult res =
        surrogate_grad(end, items, cfg.train.eps_low, cfg.train.eps_high);
    sgd_step(end, res.grads, cfg.train.lr);

    save_checkpoint((run_dir / "step-0.ckpt").string(), start, 0, "11");
    save_checkpoint((run_dir / "step-1.ckpt").string(), end, 1, "11");

    const fs::path csv_path = g_work / "gradients.csv";
    std::string err;
    ASSERT_EQ(run_cli({"analyze", "gradients", run_dir.string(), "--delta-t", "1", "--out",
                       csv_path.string()},
                      nullptr, &err),
              0)
        << err;

    std::istringstream csv(slurp(csv_path));
    std::string header, row;
    ASSERT_TRUE(std::getline(csv, header));
    EXPECT_EQ(header, "t,r_clean,r_noisy");
    ASSERT_TRUE(std::getline(csv, row));
    int t = -1;
    double r_clean = 0.0, r_noisy = 0.0;
    ASSERT_EQ(std::sscanf(row.c_str(), "%d,%lf,%lf", &t, &r_clean, &r_noisy), 3) << row;
    EXPECT_EQ(t, 0);
    EXPECT_NEAR(r_clean + r_noisy, 1.0, 1e-9);
}

TEST(Cli, CompareWritesPairedCsv) {
    const fs::path cfg = write_tiny_config("compare");
    const fs::path csv_path = g_work / "compare.csv";
    std::string out;
    ASSERT_EQ(run_cli({"compare", cfg.string(), "--seeds", "1", "--set", "train.t_max=2",
                       "--out", csv_path.string()},
                      &out),
              0);

    std::istringstream csv(slurp(csv_path));
    std::string header;
    ASSERT_TRUE(std::getline(csv, header));
    EXPECT_NE(header.find("mean_reward_noisy_s1"), std::string::npos) << header;
    EXPECT_NE(header.find("mean_reward_vanilla_s1"), std::string::npos) << header;
    EXPECT_NE(header.find("diversity_noisy_s1"), std::string::npos) << header;

    std::vector<std::string> rows;
    for (std::string row; std::getline(csv, row);) rows.push_back(row);
    ASSERT_EQ(rows.size(), 4u);  // two training steps, then one row per strength
    EXPECT_EQ(rows[0].substr(0, 2), "1,");
    EXPECT_EQ(rows[1].substr(0, 2), "2,");
    EXPECT_EQ(rows[2].rfind("final_acc@0,", 0), 0u) << rows[2];
    EXPECT_EQ(rows[3].rfind("final_acc@200,", 0), 0u) << rows[3];
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path-to-glyphrl-binary>\n");
        return 1;
    }
    g_binary = argv[1];
    g_work = fs::temp_directory_path() / "glyphrl-cli-tests";
    fs::remove_all(g_work);
    fs::create_directories(g_work);
    return RUN_ALL_TESTS();
}
