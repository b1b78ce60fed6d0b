#pragma once

#include "glyphrl/env.hpp"
#include "glyphrl/grpo.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace glyphrl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EvalConfig {
    int n_eval = 1000;
    std::vector<double> eval_strengths = {0.0, 200.0};
};

struct IoConfig {
    std::string out_dir;
    int checkpoint_every = 5;
    int log_diversity_every = 5;
    bool record_replay = false;
};

// Everything a run needs, grouped the same way the file sections are:
// [task], [train], [schedule] (folded into train.schedule), [eval], [io].
struct ExperimentConfig {
    TaskSpec task;
    TrainConfig train;
    EvalConfig eval;
    IoConfig io;

    void validate() const;
};

// Parses the strict TOML subset used for experiment files: [section] headers,
// key = value lines, '#' comments, integers, floats, booleans, quoted
// strings, and flat numeric arrays. Unknown sections or keys, duplicate
// keys, and malformed values all throw ConfigError naming source:line.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name);

// Reads and parses a config file. A missing file throws ConfigError with the
// path in the message.
ExperimentConfig load_config(const std::string& path);

// Applies one dotted override like "train.n2=0" or "schedule.kind=constant".
// Values use the same syntax as the file; bare words are accepted for
// string-valued keys.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Serializes every key with its resolved value, parseable by
// parse_config_text and sufficient to reproduce the run.
std::string resolved_config_toml(const ExperimentConfig& cfg);

}  // namespace glyphrl
