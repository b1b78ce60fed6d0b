#include "glyphrl/config.hpp"

#include "glyphrl/raster.hpp"
#include "glyphrl/schedule.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace glyphrl {

namespace {

enum class FieldType { Int, UInt, Double, Bool, String, DoubleList };

struct Value {
    FieldType type = FieldType::Int;
    long long i = 0;
    std::uint64_t u = 0;
    double d = 0.0;
    bool b = false;
    std::string s;
    std::vector<double> list;
};

struct FieldDef {
    const char* section;
    const char* key;
    FieldType type;
    std::function<void(ExperimentConfig&, const Value&)> set;
    std::function<Value(const ExperimentConfig&)> get;
};

Value make_int(long long v) {
    Value val;
    val.type = FieldType::Int;
    val.i = v;
    return val;
}

Value make_uint(std::uint64_t v) {
    Value val;
    val.type = FieldType::UInt;
    val.u = v;
    return val;
}

Value make_double(double v) {
    Value val;
    val.type = FieldType::Double;
    val.d = v;
    return val;
}

Value make_bool(bool v) {
    Value val;
    val.type = FieldType::Bool;
    val.b = v;
    return val;
}

Value make_string(std::string v) {
    Value val;
    val.type = FieldType::String;
    val.s = std::move(v);
    return val;
}

Value make_list(std::vector<double> v) {
    Value val;
    val.type = FieldType::DoubleList;
    val.list = std::move(v);
    return val;
}

// Shortest decimal representation that strtod parses back to the same bits.
std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    std::string s = buf;
    // Keep real-valued keys visibly real so the snapshot parses back into the
    // same field type without relying on coercion.
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

std::string format_value(const Value& v) {
    switch (v.type) {
        case FieldType::Int: return std::to_string(v.i);
        case FieldType::UInt: return std::to_string(v.u);
        case FieldType::Double: return format_double(v.d);
        case FieldType::Bool: return v.b ? "true" : "false";
        case FieldType::String: return "\"" + v.s + "\"";
        case FieldType::DoubleList: {
            std::string out = "[";
            for (std::size_t i = 0; i < v.list.size(); ++i) {
                if (i) out += ", ";
                out += format_double(v.list[i]);
            }
            return out + "]";
        }
    }
    return "";
}

const std::vector<FieldDef>& field_registry() {
    static const std::vector<FieldDef> defs = [] {
        std::vector<FieldDef> f;
        auto add_int = [&](const char* sec, const char* key, auto ref) {
            f.push_back({sec, key, FieldType::Int,
                         [ref](ExperimentConfig& c, const Value& v) {
                             ref(c) = static_cast<int>(v.i);
                         },
                         [ref](const ExperimentConfig& c) {
                             return make_int(ref(const_cast<ExperimentConfig&>(c)));
                         }});
        };
        auto add_uint = [&](const char* sec, const char* key, auto ref) {
            f.push_back({sec, key, FieldType::UInt,
                         [ref](ExperimentConfig& c, const Value& v) { ref(c) = v.u; },
                         [ref](const ExperimentConfig& c) {
                             return make_uint(ref(const_cast<ExperimentConfig&>(c)));
                         }});
        };
        auto add_double = [&](const char* sec, const char* key, auto ref) {
            f.push_back({sec, key, FieldType::Double,
                         [ref](ExperimentConfig& c, const Value& v) { ref(c) = v.d; },
                         [ref](const ExperimentConfig& c) {
                             return make_double(ref(const_cast<ExperimentConfig&>(c)));
                         }});
        };
        auto add_bool = [&](const char* sec, const char* key, auto ref) {
            f.push_back({sec, key, FieldType::Bool,
                         [ref](ExperimentConfig& c, const Value& v) { ref(c) = v.b; },
                         [ref](const ExperimentConfig& c) {
                             return make_bool(ref(const_cast<ExperimentConfig&>(c)));
                         }});
        };
        auto add_string = [&](const char* sec, const char* key, auto setter, auto getter) {
            f.push_back({sec, key, FieldType::String,
                         [setter](ExperimentConfig& c, const Value& v) { setter(c, v.s); },
                         [getter](const ExperimentConfig& c) { return make_string(getter(c)); }});
        };

        add_int("task", "grid", [](ExperimentConfig& c) -> int& { return c.task.grid; });
        add_int("task", "shapes", [](ExperimentConfig& c) -> int& { return c.task.shapes; });
        add_int("task", "max_per_shape",
                [](ExperimentConfig& c) -> int& { return c.task.max_per_shape; });
        add_int("task", "max_len", [](ExperimentConfig& c) -> int& { return c.task.max_len; });

        add_int("train", "n1", [](ExperimentConfig& c) -> int& { return c.train.n1; });
        add_int("train", "n2", [](ExperimentConfig& c) -> int& { return c.train.n2; });
        add_int("train", "t_max", [](ExperimentConfig& c) -> int& { return c.train.t_max; });
        add_int("train", "rollout_batch",
                [](ExperimentConfig& c) -> int& { return c.train.rollout_batch; });
        add_int("train", "updates_per_collection",
                [](ExperimentConfig& c) -> int& { return c.train.updates_per_collection; });
        add_double("train", "lr", [](ExperimentConfig& c) -> double& { return c.train.lr; });
        add_string(
            "train", "optimizer",
            [](ExperimentConfig& c, const std::string& s) { c.train.optimizer = parse_optimizer(s); },
            [](const ExperimentConfig& c) { return std::string(optimizer_name(c.train.optimizer)); });
        add_double("train", "eps_low",
                   [](ExperimentConfig& c) -> double& { return c.train.eps_low; });
        add_double("train", "eps_high",
                   [](ExperimentConfig& c) -> double& { return c.train.eps_high; });
        add_string(
            "train", "adv_variant",
            [](ExperimentConfig& c, const std::string& s) {
                c.train.adv_variant = parse_adv_variant(s);
            },
            [](const ExperimentConfig& c) {
                return std::string(adv_variant_name(c.train.adv_variant));
            });
        add_string(
            "train", "distortion",
            [](ExperimentConfig& c, const std::string& s) {
                c.train.distortion = parse_distortion_kind(s);
            },
            [](const ExperimentConfig& c) {
                return std::string(distortion_kind_name(c.train.distortion));
            });
        add_double("train", "temp_clean",
                   [](ExperimentConfig& c) -> double& { return c.train.temp_clean; });
        add_double("train", "temp_noisy",
                   [](ExperimentConfig& c) -> double& { return c.train.temp_noisy; });
        add_string(
            "train", "condition_mode",
            [](ExperimentConfig& c, const std::string& s) {
                c.train.condition_mode = parse_condition_mode(s);
            },
            [](const ExperimentConfig& c) {
                return std::string(condition_mode_name(c.train.condition_mode));
            });
        add_double("train", "noisy_reward_penalty",
                   [](ExperimentConfig& c) -> double& { return c.train.noisy_reward_penalty; });
        add_uint("train", "master_seed",
                 [](ExperimentConfig& c) -> std::uint64_t& { return c.train.master_seed; });
        add_int("train", "feat_dim", [](ExperimentConfig& c) -> int& { return c.train.feat_dim; });
        add_int("train", "hidden_dim",
                [](ExperimentConfig& c) -> int& { return c.train.hidden_dim; });
        add_int("train", "fixed_dataset_size",
                [](ExperimentConfig& c) -> int& { return c.train.fixed_dataset_size; });
        add_uint("train", "data_seed",
                 [](ExperimentConfig& c) -> std::uint64_t& { return c.train.data_seed; });
        add_bool("train", "allow_diagnostic_distortion",
                 [](ExperimentConfig& c) -> bool& { return c.train.allow_diagnostic_distortion; });

        add_string(
            "schedule", "kind",
            [](ExperimentConfig& c, const std::string& s) {
                c.train.schedule.kind = parse_schedule_kind(s);
            },
            [](const ExperimentConfig& c) {
                return std::string(schedule_kind_name(c.train.schedule.kind));
            });
        add_double("schedule", "alpha0",
                   [](ExperimentConfig& c) -> double& { return c.train.schedule.alpha0; });
        add_double("schedule", "gamma_mid",
                   [](ExperimentConfig& c) -> double& { return c.train.schedule.gamma_mid; });
        add_double("schedule", "lambda_steep",
                   [](ExperimentConfig& c) -> double& { return c.train.schedule.lambda_steep; });
        add_double("schedule", "p_exp",
                   [](ExperimentConfig& c) -> double& { return c.train.schedule.p_exp; });
        add_double("schedule", "decay",
                   [](ExperimentConfig& c) -> double& { return c.train.schedule.decay; });

        add_int("eval", "n_eval", [](ExperimentConfig& c) -> int& { return c.eval.n_eval; });
        f.push_back({"eval", "eval_strengths", FieldType::DoubleList,
                     [](ExperimentConfig& c, const Value& v) { c.eval.eval_strengths = v.list; },
                     [](const ExperimentConfig& c) { return make_list(c.eval.eval_strengths); }});

        add_string(
            "io", "out_dir",
            [](ExperimentConfig& c, const std::string& s) { c.io.out_dir = s; },
            [](const ExperimentConfig& c) { return c.io.out_dir; });
        add_int("io", "checkpoint_every",
                [](ExperimentConfig& c) -> int& { return c.io.checkpoint_every; });
        add_int("io", "log_diversity_every",
                [](ExperimentConfig& c) -> int& { return c.io.log_diversity_every; });
        add_bool("io", "record_replay",
                 [](ExperimentConfig& c) -> bool& { return c.io.record_replay; });
        return f;
    }();
    return defs;
}

const FieldDef* find_field(const std::string& section, const std::string& key) {
    for (const FieldDef& f : field_registry())
        if (section == f.section && key == f.key) return &f;
    return nullptr;
}

bool known_section(const std::string& section) {
    for (const FieldDef& f : field_registry())
        if (section == f.section) return true;
    return false;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

bool parse_integer(const std::string& text, long long& out_i, std::uint64_t& out_u) {
    if (text.empty()) return false;
    std::size_t start = (text[0] == '+' || text[0] == '-') ? 1 : 0;
    if (start == text.size()) return false;
    for (std::size_t i = start; i < text.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    errno = 0;
    char* end = nullptr;
    if (text[0] == '-') {
        out_i = std::strtoll(text.c_str(), &end, 10);
        if (errno || *end) return false;
        out_u = 0;
    } else {
        out_u = std::strtoull(text.c_str(), &end, 10);
        if (errno || *end) return false;
        out_i = out_u <= static_cast<std::uint64_t>(std::numeric_limits<long long>::max())
                    ? static_cast<long long>(out_u)
                    : 0;
    }
    return true;
}

bool parse_number(const std::string& text, double& out) {
    if (text.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(text.c_str(), &end);
    return !errno && end == text.c_str() + text.size();
}

// Parses one raw value token. `where` prefixes error messages.
Value parse_value(const std::string& raw, const std::string& where) {
    const std::string text = trim(raw);
    if (text.empty()) throw ConfigError(where + ": missing value");

    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"')
            throw ConfigError(where + ": unterminated string");
        const std::string body = text.substr(1, text.size() - 2);
        if (body.find('"') != std::string::npos)
            throw ConfigError(where + ": stray quote inside string");
        return make_string(body);
    }
    if (text == "true") return make_bool(true);
    if (text == "false") return make_bool(false);
    if (text.front() == '[') {
        if (text.back() != ']') throw ConfigError(where + ": unterminated array");
        std::vector<double> items;
        std::string body = text.substr(1, text.size() - 2);
        if (!trim(body).empty()) {
            std::stringstream ss(body);
            std::string elem;
            while (std::getline(ss, elem, ',')) {
                double d = 0.0;
                if (!parse_number(trim(elem), d))
                    throw ConfigError(where + ": array element '" + trim(elem) +
                                      "' is not a number");
                items.push_back(d);
            }
        }
        return make_list(std::move(items));
    }

    long long i = 0;
    std::uint64_t u = 0;
    if (parse_integer(text, i, u)) {
        Value v = make_int(i);
        v.u = u;
        v.d = text[0] == '-' ? static_cast<double>(i) : static_cast<double>(u);
        return v;
    }
    double d = 0.0;
    if (parse_number(text, d)) return make_double(d);
    throw ConfigError(where + ": cannot parse value '" + text + "'");
}

// Integer literals are accepted for real-valued keys; everything else must
// match the field's type exactly.
void assign_field(ExperimentConfig& cfg, const FieldDef& field, Value value,
                  const std::string& where) {
    switch (field.type) {
        case FieldType::Int:
            if (value.type != FieldType::Int)
                throw ConfigError(where + ": expected an integer for " +
                                  std::string(field.section) + "." + field.key);
            break;
        case FieldType::UInt:
            if (value.type != FieldType::Int || value.i < 0)
                throw ConfigError(where + ": expected a non-negative integer for " +
                                  std::string(field.section) + "." + field.key);
            value.type = FieldType::UInt;
            break;
        case FieldType::Double:
            if (value.type == FieldType::Int)
                value = make_double(value.d);
            else if (value.type != FieldType::Double)
                throw ConfigError(where + ": expected a number for " +
                                  std::string(field.section) + "." + field.key);
            break;
        case FieldType::Bool:
            if (value.type != FieldType::Bool)
                throw ConfigError(where + ": expected true or false for " +
                                  std::string(field.section) + "." + field.key);
            break;
        case FieldType::String:
            if (value.type != FieldType::String)
                throw ConfigError(where + ": expected a quoted string for " +
                                  std::string(field.section) + "." + field.key);
            break;
        case FieldType::DoubleList:
            if (value.type != FieldType::DoubleList)
                throw ConfigError(where + ": expected an array for " +
                                  std::string(field.section) + "." + field.key);
            break;
    }
    try {
        field.set(cfg, value);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

}  // namespace

void ExperimentConfig::validate() const {
    try {
        task.validate();
        train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (eval.n_eval < 1) throw ConfigError("eval.n_eval must be >= 1");
    if (eval.eval_strengths.empty()) throw ConfigError("eval.eval_strengths must not be empty");
    for (double s : eval.eval_strengths)
        if (s < 0.0) throw ConfigError("eval.eval_strengths entries must be >= 0");
    if (io.checkpoint_every < 1) throw ConfigError("io.checkpoint_every must be >= 1");
    if (io.log_diversity_every < 1) throw ConfigError("io.log_diversity_every must be >= 1");
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name) {
    ExperimentConfig cfg;
    std::set<std::pair<std::string, std::string>> seen;
    std::string section;

    std::stringstream ss(text);
    std::string raw_line;
    int line_no = 0;
    while (std::getline(ss, raw_line)) {
        ++line_no;
        const std::string where = source_name + ":" + std::to_string(line_no);
        const std::string line = trim(strip_comment(raw_line));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!known_section(section))
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected 'key = value' or '[section]'");
        const std::string key = trim(line.substr(0, eq));
        if (!is_identifier(key)) throw ConfigError(where + ": malformed key '" + key + "'");
        if (section.empty())
            throw ConfigError(where + ": key '" + key + "' appears before any [section]");

        const FieldDef* field = find_field(section, key);
        if (!field)
            throw ConfigError(where + ": unknown key " + section + "." + key);
        if (!seen.insert({section, key}).second)
            throw ConfigError(where + ": duplicate key " + section + "." + key);

        assign_field(cfg, *field, parse_value(line.substr(eq + 1), where), where);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const std::string where = "--set " + assignment;
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError(where + ": expected section.key=value");
    const std::string path = trim(assignment.substr(0, eq));
    const std::size_t dot = path.find('.');
    if (dot == std::string::npos || path.find('.', dot + 1) != std::string::npos)
        throw ConfigError(where + ": key must be section.key");
    const std::string section = path.substr(0, dot);
    const std::string key = path.substr(dot + 1);
    const FieldDef* field = find_field(section, key);
    if (!field) throw ConfigError(where + ": unknown key " + section + "." + key);

    std::string raw = trim(assignment.substr(eq + 1));
    // Bare words are a CLI convenience for string keys only.
    if (field->type == FieldType::String && !raw.empty() && raw.front() != '"')
        raw = "\"" + raw + "\"";
    assign_field(cfg, *field, parse_value(raw, where), where);
}

std::string resolved_config_toml(const ExperimentConfig& cfg) {
    std::string out;
    std::string current;
    for (const FieldDef& f : field_registry()) {
        if (current != f.section) {
            if (!out.empty()) out += "\n";
            current = f.section;
            out += "[" + current + "]\n";
        }
        out += std::string(f.key) + " = " + format_value(f.get(cfg)) + "\n";
    }
    return out;
}

}  // namespace glyphrl
