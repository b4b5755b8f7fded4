#pragma once

#include <optional>
#include <string>

#include "xdiff/diffusion.hpp"
#include "xdiff/trajectory.hpp"

namespace xdiff {

/// Noised-action embodiment classifier c(k, A^k, s): logit of the probability
/// that the (normalized) action chunk came from the robot.
struct ClassifierModel {
    FeedForwardNet net;
    int horizon = 0;
    int action_dim = 0;
    int state_dim = 0;
    int embed_dim = kStepEmbedDim;
    NormStats norm;

    int input_width() const { return embed_dim + horizon * action_dim + state_dim; }
};

struct ClassifierConfig {
    int steps = 8000;
    int batch = 64;
    double lr = 1e-3;
    uint64_t seed = 0;
    int hidden_width = 96;
    int hidden_layers = 3;
    Activation activation = Activation::silu;
    int horizon = 8;
    double grad_clip = 5.0;
    // scene-translation augmentation (workspace units). The robot pool is
    // tiny (a handful of demos), so without it the classifier memorizes
    // absolute positions instead of learning execution-style cues.
    double augment_shift = 0.15;
    // training-time Gaussian noise on the (normalized) state input. Keeps the
    // embodiment decision anchored on the noised action chunk rather than on
    // fine state details, which the forward process never randomizes.
    double state_noise = 0.35;
};

struct ClassifierTrace {
    std::vector<double> loss;        // mean BCE per step
    long robot_samples = 0;          // balanced-sampling audit counters
    long human_samples = 0;
};

/// Balanced binary cross-entropy training: each sample picks robot (label 1)
/// or human (label 0) with probability 1/2, a step k ~ U{1..K}, fresh noise,
/// and the noised chunk as input. Throws DivergenceError on non-finite loss.
ClassifierModel train_classifier(const DemoDataset& d_robot, const DemoDataset& d_human,
                                 const NoiseSchedule& schedule, const ClassifierConfig& cfg,
                                 ClassifierTrace* trace = nullptr);

/// Robot probability of a raw (unnormalized) chunk at noise level k, averaged
/// over n_draws independent noisings. k = 0 evaluates the clean chunk.
double robot_probability(const ClassifierModel& model, const NoiseSchedule& schedule,
                         const ActionChunk& chunk_raw, const Vec& state_raw, int k,
                         int n_draws, SeededRng& rng);

/// Full probability curve p(k) for k = 0..K of one normalized chunk.
Vec probability_curve_for_chunk(const ClassifierModel& model, const NoiseSchedule& schedule,
                                const ActionChunk& chunk_norm, const Vec& state_norm,
                                int n_draws, SeededRng& rng);

/// Running-maximum monotonization; makes the 0.5 crossing unique.
Vec isotonic_running_max(const Vec& curve);

struct KStarRecord {
    int traj = 0;
    int chunk = 0;
    int k_star = 0;
    Vec curve;  // raw p(k) on [0..K]; empty for robot chunks (k* = 0 by definition)
};

struct KStarAnnotation {
    std::string dataset_id;  // content hash of the annotated dataset file
    int schedule_steps = 0;
    int n_draws = 0;
    bool per_trajectory_max = false;
    std::vector<KStarRecord> records;

    /// k* lookup by (trajectory, chunk) index; throws if missing.
    int lookup(int traj, int chunk) const;
};

/// Annotate every chunk of the dataset with its minimum indistinguishability
/// step: the first k on the full grid where the smoothed probability curve
/// reaches 0.5, capped at K. Robot chunks get k* = 0 by definition.
/// `per_trajectory_max` replaces each chunk's k* with the max over its
/// trajectory (optional aggregate mode). Deterministic given (model, dataset,
/// rng seed, n_draws); parallel across chunks when jobs > 1.
KStarAnnotation annotate_kstar(const ClassifierModel& model, const NoiseSchedule& schedule,
                               const DemoDataset& ds, int n_draws, const SeededRng& rng,
                               bool per_trajectory_max = false, int jobs = 1);

struct ProbabilityCurve {
    std::vector<int> ks;
    Vec mean_robot, se_robot;
    Vec mean_human, se_human;

    double gap(size_t i) const { return mean_robot[i] - mean_human[i]; }
};

/// Mean robot probability vs k for human and robot chunks separately
/// (held-out split by default).
ProbabilityCurve probability_curve(const ClassifierModel& model, const NoiseSchedule& schedule,
                                   const DemoDataset& ds, const std::vector<int>& ks,
                                   int n_draws, const SeededRng& rng, Split split = Split::val);

/// Held-out accuracy at noise level k over 2*n_pairs single-draw evaluations
/// (balanced robot/human).
double classifier_accuracy(const ClassifierModel& model, const NoiseSchedule& schedule,
                           const DemoDataset& d_robot, const DemoDataset& d_human, int k,
                           int n_pairs, SeededRng& rng, Split split = Split::val);

// ---- persistence ----

/// Writes `<prefix>.bin` (net checkpoint) and `<prefix>.json` (dims,
/// normalizer, schedule/seed metadata plus caller-supplied chain fields).
void save_classifier(const ClassifierModel& model, const std::string& prefix,
                     const std::string& sidecar_extra_json = "{}");
ClassifierModel load_classifier(const std::string& prefix,
                                std::string* sidecar_json_out = nullptr);

void save_annotation(const KStarAnnotation& annot, const std::string& path,
                     const std::string& config_hash = "",
                     const std::string& classifier_hash = "");
KStarAnnotation load_annotation(const std::string& path,
                                std::string* config_hash_out = nullptr,
                                std::string* classifier_hash_out = nullptr);

}  // namespace xdiff
