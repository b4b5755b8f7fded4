#include "xdiff/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "xdiff/errors.hpp"
#include "xdiff/policy.hpp"

namespace xdiff {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Field {
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

double to_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value '" + v + "' for key " + key);
    }
}

long to_long(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value '" + v + "' for key " + key);
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: bad boolean value '" + v + "' for key " + key);
}

const std::map<std::string, Field>& field_table() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> t;
        auto add_d = [&](const std::string& key, double ExperimentConfig::* mem) {
            t[key] = {[mem](const ExperimentConfig& c) { return fmt_double(c.*mem); },
                      [mem, key](ExperimentConfig& c, const std::string& v) {
                          c.*mem = to_double(v, key);
                      }};
        };
        auto add_i = [&](const std::string& key, int ExperimentConfig::* mem) {
            t[key] = {[mem](const ExperimentConfig& c) { return std::to_string(c.*mem); },
                      [mem, key](ExperimentConfig& c, const std::string& v) {
                          c.*mem = static_cast<int>(to_long(v, key));
                      }};
        };
        auto add_s = [&](const std::string& key, std::string ExperimentConfig::* mem) {
            t[key] = {[mem](const ExperimentConfig& c) { return c.*mem; },
                      [mem](ExperimentConfig& c, const std::string& v) { c.*mem = v; }};
        };
        auto add_b = [&](const std::string& key, bool ExperimentConfig::* mem) {
            t[key] = {[mem](const ExperimentConfig& c) { return c.*mem ? "true" : "false"; },
                      [mem, key](ExperimentConfig& c, const std::string& v) {
                          c.*mem = to_bool(v, key);
                      }};
        };

        t["seed"] = {[](const ExperimentConfig& c) { return std::to_string(c.seed); },
                     [](ExperimentConfig& c, const std::string& v) {
                         c.seed = static_cast<uint64_t>(to_long(v, "seed"));
                     }};
        add_s("out_dir", &ExperimentConfig::out_dir);

        t["task.kind"] = {
            [](const ExperimentConfig& c) { return task_kind_name(c.task.kind); },
            [](ExperimentConfig& c, const std::string& v) {
                c.task.kind = task_kind_from_name(v);
            }};

        auto add_task_d = [&](const std::string& key,
                              std::function<double&(ExperimentConfig&)> ref) {
            t[key] = {[ref](const ExperimentConfig& c) {
                          return fmt_double(ref(const_cast<ExperimentConfig&>(c)));
                      },
                      [ref, key](ExperimentConfig& c, const std::string& v) {
                          ref(c) = to_double(v, key);
                      }};
        };
        add_task_d("task.goal_x", [](ExperimentConfig& c) -> double& { return c.task.goal.x; });
        add_task_d("task.goal_y", [](ExperimentConfig& c) -> double& { return c.task.goal.y; });
        add_task_d("task.goal_radius",
                   [](ExperimentConfig& c) -> double& { return c.task.goal.radius; });
        add_task_d("task.v_max", [](ExperimentConfig& c) -> double& { return c.task.v_max; });
        add_task_d("task.theta_max",
                   [](ExperimentConfig& c) -> double& { return c.task.theta_max; });
        add_task_d("task.object_x_min",
                   [](ExperimentConfig& c) -> double& { return c.task.object_x.lo; });
        add_task_d("task.object_x_max",
                   [](ExperimentConfig& c) -> double& { return c.task.object_x.hi; });
        add_task_d("task.object_y_min",
                   [](ExperimentConfig& c) -> double& { return c.task.object_y.lo; });
        add_task_d("task.object_y_max",
                   [](ExperimentConfig& c) -> double& { return c.task.object_y.hi; });
        t["task.gripper_latency"] = {
            [](const ExperimentConfig& c) { return std::to_string(c.task.gripper_latency); },
            [](ExperimentConfig& c, const std::string& v) {
                c.task.gripper_latency = static_cast<int>(to_long(v, "task.gripper_latency"));
            }};
        t["task.episode_cap"] = {
            [](const ExperimentConfig& c) { return std::to_string(c.task.episode_cap); },
            [](ExperimentConfig& c, const std::string& v) {
                c.task.episode_cap = static_cast<int>(to_long(v, "task.episode_cap"));
            }};

        add_i("data.robot_demos", &ExperimentConfig::robot_demos);
        add_i("data.human_demos", &ExperimentConfig::human_demos);
        auto add_mix = [&](const std::string& key, double StyleMix::* mem) {
            t[key] = {[mem](const ExperimentConfig& c) { return fmt_double(c.style_mix.*mem); },
                      [mem, key](ExperimentConfig& c, const std::string& v) {
                          c.style_mix.*mem = to_double(v, key);
                      }};
        };
        add_mix("data.style_top_down", &StyleMix::top_down);
        add_mix("data.style_side_grasp", &StyleMix::side_grasp);
        add_mix("data.style_fast_sweep", &StyleMix::fast_sweep);
        t["data.jitter_pos"] = {
            [](const ExperimentConfig& c) { return fmt_double(c.human_noise.jitter_pos); },
            [](ExperimentConfig& c, const std::string& v) {
                c.human_noise.jitter_pos = to_double(v, "data.jitter_pos");
            }};
        t["data.jitter_theta"] = {
            [](const ExperimentConfig& c) { return fmt_double(c.human_noise.jitter_theta); },
            [](ExperimentConfig& c, const std::string& v) {
                c.human_noise.jitter_theta = to_double(v, "data.jitter_theta");
            }};
        add_d("data.val_fraction", &ExperimentConfig::val_fraction);

        add_i("schedule.steps", &ExperimentConfig::schedule_steps);
        t["schedule.kind"] = {
            [](const ExperimentConfig& c) { return schedule_kind_name(c.schedule_kind); },
            [](ExperimentConfig& c, const std::string& v) {
                c.schedule_kind = schedule_kind_from_name(v);
            }};
        add_d("schedule.beta_min", &ExperimentConfig::beta_min);
        add_d("schedule.beta_max", &ExperimentConfig::beta_max);

        add_i("net.hidden_width", &ExperimentConfig::hidden_width);
        add_i("net.hidden_layers", &ExperimentConfig::hidden_layers);
        add_s("net.activation", &ExperimentConfig::activation);

        add_i("classifier.steps", &ExperimentConfig::classifier_steps);
        add_i("classifier.batch", &ExperimentConfig::classifier_batch);
        add_d("classifier.lr", &ExperimentConfig::classifier_lr);
        add_i("classifier.n_draws", &ExperimentConfig::n_draws);

        add_s("policy.regimes", &ExperimentConfig::regimes);
        add_i("policy.steps", &ExperimentConfig::policy_steps);
        add_i("policy.batch", &ExperimentConfig::policy_batch);
        add_d("policy.lr", &ExperimentConfig::policy_lr);
        add_d("policy.human_sample_frac", &ExperimentConfig::human_sample_frac);
        add_i("policy.prediction_horizon", &ExperimentConfig::prediction_horizon);
        add_i("policy.action_horizon", &ExperimentConfig::action_horizon);
        add_i("policy.inference_steps", &ExperimentConfig::inference_steps);
        add_d("policy.ema_decay", &ExperimentConfig::ema_decay);
        add_i("policy.train_seeds", &ExperimentConfig::policy_train_seeds);

        add_i("eval.rollouts", &ExperimentConfig::eval_rollouts);
        add_b("eval.demodiffusion", &ExperimentConfig::eval_demodiffusion);
        add_d("eval.demodiffusion_split", &ExperimentConfig::demodiffusion_split);
        add_i("analysis.k_stride", &ExperimentConfig::analysis_k_stride);
        return t;
    }();
    return table;
}

}  // namespace

NoiseSchedule ExperimentConfig::make_schedule() const {
    return make_training_schedule(schedule_steps, schedule_kind, beta_min, beta_max);
}

std::vector<std::string> ExperimentConfig::regime_list() const {
    std::vector<std::string> out;
    std::stringstream ss(regimes);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        regime_from_name(item);  // validates
        out.push_back(item);
    }
    if (out.empty()) throw ConfigError("config: policy.regimes is empty");
    return out;
}

std::string ExperimentConfig::canonical() const {
    std::string out;
    for (const auto& [key, field] : field_table()) {  // std::map iterates sorted
        if (key == "out_dir") continue;  // a location, not an experiment parameter
        out += key + " = " + field.get(*this) + "\n";
    }
    return out;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(ss, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: " + origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto it = field_table().find(key);
        if (it == field_table().end())
            throw ConfigError("config: " + origin + ":" + std::to_string(line_no) +
                              ": unknown key '" + key + "'");
        it->second.set(cfg, value);
    }
    cfg.task.validate();
    cfg.style_mix.validate();
    cfg.regime_list();
    if (cfg.inference_steps > cfg.schedule_steps)
        throw ConfigError("config: policy.inference_steps must be <= schedule.steps");
    if (cfg.action_horizon > cfg.prediction_horizon)
        throw ConfigError("config: policy.action_horizon must be <= prediction_horizon");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str(), path);
}

void write_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << cfg.canonical();
    if (!os) throw IoError("write failed: " + path);
}

namespace {
std::string fnv1a_hex(const unsigned char* data, size_t n) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}
}  // namespace

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string c = cfg.canonical();
    return fnv1a_hex(reinterpret_cast<const unsigned char*>(c.data()), c.size());
}

std::string file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for hashing: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    const std::string s = buf.str();
    return fnv1a_hex(reinterpret_cast<const unsigned char*>(s.data()), s.size());
}

}  // namespace xdiff
