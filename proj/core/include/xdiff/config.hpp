#pragma once

#include <cstdint>
#include <string>

#include "xdiff/generate.hpp"
#include "xdiff/schedule.hpp"
#include "xdiff/task.hpp"

namespace xdiff {

/// Experiment configuration. Every downstream module receives its parameters
/// through this object; the flat key=value config file is the only input
/// channel (no environment variables). Unknown keys are rejected.
struct ExperimentConfig {
    uint64_t seed = 12345;
    std::string out_dir = "runs/default";

    // task
    TaskSpec task = default_task(TaskKind::pick_place);

    // data
    int robot_demos = 5;
    int human_demos = 100;
    StyleMix style_mix;
    HumanNoise human_noise;
    double val_fraction = 0.15;

    // schedule
    int schedule_steps = 100;
    ScheduleKind schedule_kind = ScheduleKind::linear;
    double beta_min = 1e-3;
    double beta_max = 0.15;

    // shared net architecture
    int hidden_width = 96;
    int hidden_layers = 3;
    std::string activation = "silu";

    // classifier
    int classifier_steps = 8000;
    int classifier_batch = 64;
    double classifier_lr = 1e-3;
    int n_draws = 16;

    // policy
    std::string regimes = "ROBOT,NAIVE,FILTERED,XDIFFUSION";
    int policy_steps = 6000;
    int policy_batch = 32;
    double policy_lr = 3e-4;
    double human_sample_frac = 0.5;
    int prediction_horizon = 8;
    int action_horizon = 8;
    int inference_steps = 20;
    double ema_decay = 0.0;
    int policy_train_seeds = 3;

    // eval / analysis
    int eval_rollouts = 20;
    bool eval_demodiffusion = false;
    double demodiffusion_split = 0.6;
    int analysis_k_stride = 5;

    NoiseSchedule make_schedule() const;
    std::vector<std::string> regime_list() const;

    /// Canonical sorted key=value serialization (basis of the config hash).
    std::string canonical() const;
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");
ExperimentConfig load_config(const std::string& path);
void write_config(const ExperimentConfig& cfg, const std::string& path);

/// FNV-1a 64-bit over the canonical serialization, hex-encoded.
std::string config_hash(const ExperimentConfig& cfg);

/// FNV-1a 64-bit over raw file bytes, hex-encoded (artifact chain ids).
std::string file_hash(const std::string& path);

}  // namespace xdiff
