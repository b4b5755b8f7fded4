#pragma once

#include <optional>
#include <string>

#include "xdiff/classifier.hpp"
#include "xdiff/diffusion.hpp"
#include "xdiff/env.hpp"
#include "xdiff/trajectory.hpp"

namespace xdiff {

enum class TrainRegime { ROBOT = 0, NAIVE = 1, FILTERED = 2, XDIFFUSION = 3 };

const char* regime_name(TrainRegime r);
TrainRegime regime_from_name(const std::string& name);

/// Conditional diffusion policy: epsilon-prediction denoiser over
/// [step embedding | noisy chunk | state], plus the normalizer and the
/// schedule parameters it was trained with.
struct PolicyModel {
    FeedForwardNet net;
    TrainRegime regime = TrainRegime::ROBOT;
    int horizon = 0;
    int action_dim = 0;
    int state_dim = 0;
    int embed_dim = kStepEmbedDim;
    NormStats norm;
    int schedule_steps = 0;
    double beta_min = 0.0, beta_max = 0.0;
    uint64_t seed = 0;

    int input_width() const { return embed_dim + horizon * action_dim + state_dim; }
};

struct PolicyConfig {
    int steps = 6000;
    int batch = 32;
    double lr = 3e-4;
    uint64_t seed = 0;
    double human_sample_frac = 0.5;
    int hidden_width = 64;
    int hidden_layers = 3;
    Activation activation = Activation::silu;
    int horizon = 8;
    double grad_clip = 5.0;
    double ema_decay = 0.0;   // 0 disables the parameter EMA
    bool lr_cosine = true;    // cosine decay of the learning rate to lr/10
    int val_probe_every = 0;  // 0 disables validation-loss probes
};

struct PolicyTrace {
    std::vector<double> loss;                        // mean masked batch loss per step
    std::vector<std::pair<int, double>> val_loss;    // (step, robot-val eps loss)
    long robot_samples = 0;
    long human_samples = 0;
    long human_passed_mask = 0;  // human samples with k >= k*
};

/// Train a policy under one data regime.
///   ROBOT      robot chunks only (human fraction forced to 0)
///   NAIVE      robot/human per sample at human_sample_frac
///   FILTERED   as NAIVE, human sampling restricted to oracle-feasible chunks
///   XDIFFUSION as NAIVE, human loss masked to zero when k < k*(chunk)
/// All regimes share the sampler code path, so regime identities (e.g.
/// XDIFFUSION with k* = 0 vs NAIVE) hold bitwise under a shared seed.
/// Throws ConfigError if XDIFFUSION lacks an annotation, DivergenceError on
/// non-finite loss.
PolicyModel train_policy(TrainRegime regime, const DemoDataset& d_robot,
                         const DemoDataset& d_human, const KStarAnnotation* annotation,
                         const NoiseSchedule& schedule, const PolicyConfig& cfg,
                         PolicyTrace* trace = nullptr);

/// Reverse-process sampling in normalized space, then de-normalization.
/// The gripper channel is clamped to [0, 1].
ActionChunk infer_action(const PolicyModel& policy, const NoiseSchedule& schedule,
                         const Vec& state_raw, int inference_steps, SeededRng& rng);

/// Per-step policy choice for the two-policy DemoDiffusion sampler: the first
/// ceil(split * inference_steps) reverse updates use the human policy.
std::vector<bool> demodiffusion_step_plan(int inference_steps, double split);

/// Two-policy sampler: human policy for the first ceil(split * n) visited
/// steps, robot policy for the rest. split = 0 reproduces the robot-only
/// sampler bitwise; split = 1 the human-only sampler.
ActionChunk demodiffusion_sample(const PolicyModel& human_policy,
                                 const PolicyModel& robot_policy,
                                 const NoiseSchedule& schedule, const Vec& state_raw,
                                 int inference_steps, double split, SeededRng& rng);

/// Closed-loop policy adapter for env_rollout. Rollout noise is drawn from
/// `rng` forks keyed by call index, so the adapter is deterministic.
ChunkPolicy policy_as_chunk_policy(const PolicyModel& policy, const NoiseSchedule& schedule,
                                   int inference_steps, uint64_t seed);

// ---- persistence: net checkpoint + structured-text sidecar ----

void save_policy(const PolicyModel& policy, const std::string& prefix,
                 const std::string& sidecar_extra_json = "{}");
PolicyModel load_policy(const std::string& prefix, std::string* sidecar_json_out = nullptr);

}  // namespace xdiff
