#include "xdiff/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xdiff/errors.hpp"

namespace xdiff {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void append_vec(std::string& out, const Vec& v) {
    out += '[';
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt_double(v[i]);
    }
    out += ']';
}

void append_vec_list(std::string& out, const std::vector<Vec>& rows) {
    out += '[';
    for (size_t i = 0; i < rows.size(); ++i) {
        if (i) out += ',';
        append_vec(out, rows[i]);
    }
    out += ']';
}

json task_to_json(const TaskSpec& t) {
    return json{{"kind", task_kind_name(t.kind)},
                {"goal", {{"x", t.goal.x}, {"y", t.goal.y}, {"radius", t.goal.radius}}},
                {"v_max", t.v_max},
                {"theta_max", t.theta_max},
                {"gripper_latency", t.gripper_latency},
                {"episode_cap", t.episode_cap},
                {"object_x", {{"lo", t.object_x.lo}, {"hi", t.object_x.hi}}},
                {"object_y", {{"lo", t.object_y.lo}, {"hi", t.object_y.hi}}},
                {"start_x", {{"lo", t.start_x.lo}, {"hi", t.start_x.hi}}},
                {"start_y", {{"lo", t.start_y.lo}, {"hi", t.start_y.hi}}},
                {"grasp_radius", t.grasp_radius},
                {"push_radius", t.push_radius},
                {"upright_tol", t.upright_tol},
                {"lying_theta", t.lying_theta}};
}

TaskSpec task_from_json(const json& j) {
    TaskSpec t;
    t.kind = task_kind_from_name(j.at("kind").get<std::string>());
    t.goal = {j.at("goal").at("x"), j.at("goal").at("y"), j.at("goal").at("radius")};
    t.v_max = j.at("v_max");
    t.theta_max = j.at("theta_max");
    t.gripper_latency = j.at("gripper_latency");
    t.episode_cap = j.at("episode_cap");
    auto range = [&](const char* key) {
        return RandRange{j.at(key).at("lo"), j.at(key).at("hi")};
    };
    t.object_x = range("object_x");
    t.object_y = range("object_y");
    t.start_x = range("start_x");
    t.start_y = range("start_y");
    t.grasp_radius = j.at("grasp_radius");
    t.push_radius = j.at("push_radius");
    t.upright_tol = j.at("upright_tol");
    t.lying_theta = j.at("lying_theta");
    return t;
}

Vec vec_from_json(const json& j) {
    Vec v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(x.get<double>());
    return v;
}

std::vector<Vec> vec_list_from_json(const json& j) {
    std::vector<Vec> rows;
    rows.reserve(j.size());
    for (const auto& r : j) rows.push_back(vec_from_json(r));
    return rows;
}

}  // namespace

void save_dataset(const DemoDataset& ds, const std::string& path,
                  const std::string& config_hash) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);

    json header{{"record", "header"},
                {"version", kDatasetFormatVersion},
                {"task", task_to_json(ds.task)},
                {"config_hash", config_hash},
                {"val_fraction", ds.val_fraction},
                {"trajectory_count", ds.trajectories.size()}};
    os << header.dump() << '\n';

    std::string norm_line = "{\"record\":\"normalizer\",\"action_mean\":";
    append_vec(norm_line, ds.norm.action_mean);
    norm_line += ",\"action_std\":";
    append_vec(norm_line, ds.norm.action_std);
    norm_line += ",\"state_mean\":";
    append_vec(norm_line, ds.norm.state_mean);
    norm_line += ",\"state_std\":";
    append_vec(norm_line, ds.norm.state_std);
    norm_line += '}';
    os << norm_line << '\n';

    for (const Trajectory& t : ds.trajectories) {
        std::string line = "{\"record\":\"trajectory\",\"embodiment\":\"";
        line += embodiment_name(t.embodiment);
        line += "\",\"style\":\"";
        line += style_name(t.style);
        line += "\",\"seed\":" + std::to_string(t.seed);
        line += ",\"feasible\":";
        line += t.feasible ? "true" : "false";
        line += ",\"states\":";
        append_vec_list(line, t.states);
        line += ",\"actions\":";
        append_vec_list(line, t.actions);
        line += '}';
        os << line << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

DemoDataset load_dataset(const std::string& path, std::string* config_hash_out) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);

    DemoDataset ds;
    std::string line;
    int record = 0;
    size_t declared_count = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ++record;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("dataset parse error at record " + std::to_string(record) + " of " +
                          path + ": " + e.what());
        }
        try {
            const std::string kind = j.at("record");
            if (kind == "header") {
                const int version = j.at("version");
                if (version != kDatasetFormatVersion)
                    throw IoError("unsupported dataset version " + std::to_string(version));
                ds.task = task_from_json(j.at("task"));
                ds.val_fraction = j.at("val_fraction");
                declared_count = j.at("trajectory_count");
                if (config_hash_out) *config_hash_out = j.at("config_hash");
            } else if (kind == "normalizer") {
                ds.norm.action_mean = vec_from_json(j.at("action_mean"));
                ds.norm.action_std = vec_from_json(j.at("action_std"));
                ds.norm.state_mean = vec_from_json(j.at("state_mean"));
                ds.norm.state_std = vec_from_json(j.at("state_std"));
            } else if (kind == "trajectory") {
                Trajectory t;
                t.embodiment = embodiment_from_name(j.at("embodiment"));
                t.style = style_from_name(j.at("style"));
                t.seed = j.at("seed").get<uint64_t>();
                t.feasible = j.at("feasible");
                t.states = vec_list_from_json(j.at("states"));
                t.actions = vec_list_from_json(j.at("actions"));
                if (t.states.size() != t.actions.size() + 1)
                    throw IoError("state/action length mismatch");
                ds.trajectories.push_back(std::move(t));
            } else {
                throw IoError("unknown record kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            throw IoError("dataset parse error at record " + std::to_string(record) + " of " +
                          path + ": " + e.what());
        } catch (const IoError& e) {
            throw IoError("dataset parse error at record " + std::to_string(record) + " of " +
                          path + ": " + e.what());
        }
    }
    if (record == 0) throw IoError("empty dataset file: " + path);
    if (ds.trajectories.size() != declared_count)
        throw IoError("dataset " + path + " truncated: header declares " +
                      std::to_string(declared_count) + " trajectories, found " +
                      std::to_string(ds.trajectories.size()));
    return ds;
}

}  // namespace xdiff
