#include "xdiff/evaluate.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xdiff/errors.hpp"

namespace xdiff {

using nlohmann::json;

double RegimeResult::success_rate() const {
    if (rollouts.empty()) return 0.0;
    long s = 0;
    for (const RolloutRow& r : rollouts) s += r.success ? 1 : 0;
    return static_cast<double>(s) / static_cast<double>(rollouts.size());
}

double RegimeResult::mean_infeasible() const {
    if (rollouts.empty()) return 0.0;
    long s = 0;
    for (const RolloutRow& r : rollouts) s += r.infeasible_events;
    return static_cast<double>(s) / static_cast<double>(rollouts.size());
}

const RegimeResult* EvalReport::find(const std::string& regime) const {
    for (const RegimeResult& r : regimes)
        if (r.regime == regime) return &r;
    return nullptr;
}

RegimeResult evaluate_policy(const std::string& regime_tag,
                             const std::function<ChunkPolicy(uint64_t env_seed)>& make_policy,
                             const TaskSpec& task, const std::vector<uint64_t>& env_seeds,
                             uint64_t train_seed, int action_horizon) {
    if (env_seeds.empty()) throw std::invalid_argument("evaluate_policy: need at least one seed");
    RegimeResult result;
    result.regime = regime_tag;
    for (uint64_t env_seed : env_seeds) {
        RolloutRow row;
        row.train_seed = train_seed;
        row.env_seed = env_seed;
        try {
            const ChunkPolicy policy = make_policy(env_seed);
            const RolloutOutcome out = env_rollout(task, policy, env_seed, action_horizon);
            row.success = out.success;
            row.steps = out.steps;
            row.infeasible_events = out.infeasible_events;
            row.note = out.note;
        } catch (const std::exception& e) {
            row.success = false;
            row.note = std::string("rollout exception: ") + e.what();
        }
        result.rollouts.push_back(std::move(row));
    }
    return result;
}

namespace {

json report_to_json(const EvalReport& report) {
    json regimes = json::array();
    for (const RegimeResult& r : report.regimes) {
        json rows = json::array();
        for (const RolloutRow& row : r.rollouts)
            rows.push_back(json{{"train_seed", row.train_seed},
                                {"env_seed", row.env_seed},
                                {"success", row.success},
                                {"steps", row.steps},
                                {"infeasible_events", row.infeasible_events},
                                {"note", row.note}});
        regimes.push_back(json{{"regime", r.regime},
                               {"success_rate", r.success_rate()},
                               {"mean_infeasible_events", r.mean_infeasible()},
                               {"rollouts", rows}});
    }
    return json{{"task", report.task},
                {"config_hash", report.config_hash},
                {"version", report.version},
                {"env_seeds", report.env_seeds},
                {"regimes", regimes}};
}

std::string timestamp_line() {
    char buf[64];
    const std::time_t now = std::time(nullptr);
    std::tm tm_buf{};
    gmtime_r(&now, &tm_buf);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_buf);
    return std::string("# generated_at ") + buf;
}

}  // namespace

void export_report(const EvalReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << timestamp_line() << '\n';
    os << report_to_json(report).dump(2) << '\n';
    if (!os) throw IoError("write failed: " + path);
}

EvalReport parse_report(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    std::stringstream body;
    std::string line;
    while (std::getline(is, line))
        if (line.empty() || line[0] != '#') body << line << '\n';
    json j;
    try {
        j = json::parse(body.str());
    } catch (const json::exception& e) {
        throw IoError("bad report " + path + ": " + e.what());
    }
    EvalReport r;
    r.task = j.at("task");
    r.config_hash = j.at("config_hash");
    r.version = j.at("version");
    r.env_seeds = j.at("env_seeds").get<std::vector<uint64_t>>();
    for (const json& jr : j.at("regimes")) {
        RegimeResult reg;
        reg.regime = jr.at("regime");
        for (const json& row : jr.at("rollouts")) {
            RolloutRow rr;
            rr.train_seed = row.at("train_seed").get<uint64_t>();
            rr.env_seed = row.at("env_seed").get<uint64_t>();
            rr.success = row.at("success");
            rr.steps = row.at("steps");
            rr.infeasible_events = row.at("infeasible_events");
            rr.note = row.at("note");
            reg.rollouts.push_back(std::move(rr));
        }
        r.regimes.push_back(std::move(reg));
    }
    return r;
}

void export_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "regime,task,seed,success,steps,infeasible_events\n";
    for (const RegimeResult& r : report.regimes)
        for (const RolloutRow& row : r.rollouts)
            os << r.regime << ',' << report.task << ',' << row.env_seed << ','
               << (row.success ? 1 : 0) << ',' << row.steps << ',' << row.infeasible_events
               << '\n';
    if (!os) throw IoError("write failed: " + path);
}

void export_curve_csv(const OverlapCurve& curve, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "k,kl,prob_gap,se\n";
    char buf[40];
    for (size_t i = 0; i < curve.ks.size(); ++i) {
        os << curve.ks[i] << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", curve.kl[i]);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", i < curve.prob_gap.size() ? curve.prob_gap[i] : 0.0);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", i < curve.se.size() ? curve.se[i] : 0.0);
        os << buf << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

OverlapCurve parse_curve_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    OverlapCurve c;
    std::string line;
    if (!std::getline(is, line) || line != "k,kl,prob_gap,se")
        throw IoError("bad curve csv header in " + path);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        c.ks.push_back(std::stoi(field));
        std::getline(ss, field, ',');
        c.kl.push_back(std::stod(field));
        std::getline(ss, field, ',');
        c.prob_gap.push_back(std::stod(field));
        std::getline(ss, field, ',');
        c.se.push_back(std::stod(field));
    }
    return c;
}

void export_curve(const OverlapCurve& curve, const std::string& path,
                  const std::string& config_hash) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << timestamp_line() << '\n';
    json j{{"estimator", curve.estimator},
           {"config_hash", config_hash},
           {"ks", curve.ks},
           {"kl", curve.kl},
           {"prob_gap", curve.prob_gap},
           {"se", curve.se},
           {"clamp_count", curve.clamp_count},
           {"floor_count", curve.floor_count},
           {"spearman_kl_vs_gap", curve.spearman}};
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace xdiff
