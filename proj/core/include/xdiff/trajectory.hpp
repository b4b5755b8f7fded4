#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdiff/matrix.hpp"
#include "xdiff/task.hpp"

namespace xdiff {

enum class Embodiment { human = 0, robot = 1 };
enum class Style { top_down = 0, side_grasp = 1, fast_sweep = 2, scripted_robot = 3 };

const char* embodiment_name(Embodiment e);
Embodiment embodiment_from_name(const std::string& name);
const char* style_name(Style s);
Style style_from_name(const std::string& name);

/// One demonstration. Actions are next-step proprioception: actions[t] equals
/// the proprio slice of states[t+1], exactly.
struct Trajectory {
    Embodiment embodiment = Embodiment::robot;
    Style style = Style::scripted_robot;
    uint64_t seed = 0;
    bool feasible = true;  // feasibility-oracle output, stored with the data
    std::vector<Vec> states;   // length n+1, width state_dim
    std::vector<Vec> actions;  // length n, width action_dim

    int length() const { return static_cast<int>(actions.size()); }
};

/// Per-dimension normalization statistics, computed from the robot subset
/// only so both embodiments share one coordinate system.
struct NormStats {
    Vec action_mean, action_std;  // width d_a
    Vec state_mean, state_std;    // width d_s

    bool valid() const { return !action_mean.empty() && !state_mean.empty(); }
    bool operator==(const NormStats& o) const = default;
};

struct DemoDataset {
    TaskSpec task;
    std::vector<Trajectory> trajectories;
    NormStats norm;
    double val_fraction = 0.15;
};

/// True iff every step respects the robot constraints: per-step speed at most
/// v_max, grasp angle inside the window whenever the gripper closes, and
/// gripper toggles separated by at least the latency. Vacuously true for
/// action-free trajectories.
bool feasibility_oracle(const Trajectory& traj, const TaskSpec& task);

// ---- chunking: stride 1, horizon S, tail padded with the final action ----

struct ChunkRef {
    int traj = 0;
    int chunk = 0;  // == start action index
};

/// Chunk `chunk` of a trajectory: actions[start .. start+S-1], repeating the
/// final action past the end. The conditioning state is states[start].
ActionChunk make_chunk(const Trajectory& traj, int start, int horizon);

enum class Split { train = 0, val = 1, all = 2 };

/// Trajectory indices in a split. The validation tail is the last
/// ceil(val_fraction * n) trajectories (at least 1 when n > 1).
std::vector<int> split_trajectories(const DemoDataset& ds, Split split);

/// Chunk references for a split; one chunk per action (stride 1).
std::vector<ChunkRef> chunk_refs(const DemoDataset& ds, Split split);

NormStats compute_norm_stats(const std::vector<Trajectory>& robot_trajectories, int state_dim,
                             int action_dim);

Vec normalize_state(const NormStats& n, const Vec& state);
ActionChunk normalize_chunk(const NormStats& n, const ActionChunk& chunk);
ActionChunk denormalize_chunk(const NormStats& n, const ActionChunk& chunk);

/// Normalized chunk + normalized conditioning state for a chunk reference.
struct ChunkSample {
    ActionChunk chunk;  // normalized
    Vec state;          // normalized
};
ChunkSample chunk_sample(const DemoDataset& ds, const ChunkRef& ref, int horizon);

/// Pre-normalized chunks of one split, flattened for training loops.
struct ChunkCache {
    std::vector<ActionChunk> chunks;  // normalized
    std::vector<Vec> states;          // normalized
    std::vector<ChunkRef> refs;
    std::vector<char> feasible;       // trajectory-level oracle flag per chunk

    size_t size() const { return chunks.size(); }
};
ChunkCache build_chunk_cache(const DemoDataset& ds, Split split, int horizon);

/// Concatenate datasets (shared task/normalizer), e.g. to build a mixed
/// human+robot view for curve evaluation.
DemoDataset merge_datasets(const DemoDataset& a, const DemoDataset& b);

}  // namespace xdiff
