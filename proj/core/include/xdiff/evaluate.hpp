#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdiff/env.hpp"
#include "xdiff/klcurve.hpp"

namespace xdiff {

inline constexpr const char* kVersionString = "xdiff 0.1.0";

struct RolloutRow {
    uint64_t train_seed = 0;
    uint64_t env_seed = 0;
    bool success = false;
    int steps = 0;
    int infeasible_events = 0;
    std::string note;
};

struct RegimeResult {
    std::string regime;
    std::vector<RolloutRow> rollouts;

    double success_rate() const;
    double mean_infeasible() const;
};

/// Closed-loop evaluation report. Determinism contract: identical config +
/// seeds produce byte-identical exports apart from the single timestamp
/// header line.
struct EvalReport {
    std::string task;
    std::string config_hash;
    std::string version = kVersionString;
    std::vector<uint64_t> env_seeds;
    std::vector<RegimeResult> regimes;

    const RegimeResult* find(const std::string& regime) const;
};

/// Run env_rollout for every seed; rollout exceptions are recorded as failed
/// rows, never aborting the batch. `make_policy` builds a fresh seeded policy
/// per rollout so evaluation stays deterministic.
RegimeResult evaluate_policy(const std::string& regime_tag,
                             const std::function<ChunkPolicy(uint64_t env_seed)>& make_policy,
                             const TaskSpec& task, const std::vector<uint64_t>& env_seeds,
                             uint64_t train_seed, int action_horizon);

// ---- export formats ----

/// Structured-text (JSON body after a single '#' timestamp header line).
void export_report(const EvalReport& report, const std::string& path);
EvalReport parse_report(const std::string& path);

/// CSV, documented column order: regime,task,seed,success,steps,infeasible_events
void export_report_csv(const EvalReport& report, const std::string& path);

/// CSV, documented column order: k,kl,prob_gap,se
void export_curve_csv(const OverlapCurve& curve, const std::string& path);
OverlapCurve parse_curve_csv(const std::string& path);

/// JSON export of the overlap curve with estimator metadata.
void export_curve(const OverlapCurve& curve, const std::string& path,
                  const std::string& config_hash);

}  // namespace xdiff
