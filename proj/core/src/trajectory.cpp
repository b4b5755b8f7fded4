#include "xdiff/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xdiff/errors.hpp"

namespace xdiff {

const char* embodiment_name(Embodiment e) {
    return e == Embodiment::human ? "human" : "robot";
}

Embodiment embodiment_from_name(const std::string& name) {
    if (name == "human") return Embodiment::human;
    if (name == "robot") return Embodiment::robot;
    throw IoError("unknown embodiment: " + name);
}

const char* style_name(Style s) {
    switch (s) {
        case Style::top_down: return "top_down";
        case Style::side_grasp: return "side_grasp";
        case Style::fast_sweep: return "fast_sweep";
        case Style::scripted_robot: return "scripted_robot";
    }
    return "unknown";
}

Style style_from_name(const std::string& name) {
    if (name == "top_down") return Style::top_down;
    if (name == "side_grasp") return Style::side_grasp;
    if (name == "fast_sweep") return Style::fast_sweep;
    if (name == "scripted_robot") return Style::scripted_robot;
    throw IoError("unknown style: " + name);
}

bool feasibility_oracle(const Trajectory& traj, const TaskSpec& task) {
    const double speed_tol = task.v_max * (1.0 + 1e-9);
    bool closed = false;
    if (!traj.states.empty()) closed = traj.states.front()[3] >= 0.5;
    int last_toggle = -task.gripper_latency - 1;

    for (int t = 0; t < traj.length(); ++t) {
        const Vec& s = traj.states[static_cast<size_t>(t)];
        const Vec& a = traj.actions[static_cast<size_t>(t)];
        const double dx = a[0] - s[0], dy = a[1] - s[1];
        if (std::hypot(dx, dy) > speed_tol) return false;

        const bool next_closed = a[3] >= 0.5;
        if (next_closed != closed) {
            if (t - last_toggle < task.gripper_latency) return false;
            if (next_closed && std::fabs(wrap_angle(a[2])) > task.theta_max) return false;
            last_toggle = t;
            closed = next_closed;
        }
    }
    return true;
}

ActionChunk make_chunk(const Trajectory& traj, int start, int horizon) {
    const int n = traj.length();
    if (start < 0 || start >= n) throw std::out_of_range("make_chunk: start outside [0, n)");
    const int da = static_cast<int>(traj.actions.front().size());
    ActionChunk c(horizon, da);
    for (int r = 0; r < horizon; ++r) {
        const int t = std::min(start + r, n - 1);  // tail pad: repeat final action
        const Vec& a = traj.actions[static_cast<size_t>(t)];
        for (int j = 0; j < da; ++j) c.at(r, j) = a[static_cast<size_t>(j)];
    }
    return c;
}

std::vector<int> split_trajectories(const DemoDataset& ds, Split split) {
    const int n = static_cast<int>(ds.trajectories.size());
    std::vector<int> idx;
    if (n == 0) return idx;
    int n_val = static_cast<int>(std::ceil(ds.val_fraction * n));
    if (n > 1) n_val = std::max(1, std::min(n_val, n - 1));
    else n_val = 0;
    const int n_train = n - n_val;
    switch (split) {
        case Split::train:
            for (int i = 0; i < n_train; ++i) idx.push_back(i);
            break;
        case Split::val:
            for (int i = n_train; i < n; ++i) idx.push_back(i);
            break;
        case Split::all:
            for (int i = 0; i < n; ++i) idx.push_back(i);
            break;
    }
    return idx;
}

std::vector<ChunkRef> chunk_refs(const DemoDataset& ds, Split split) {
    std::vector<ChunkRef> refs;
    for (int ti : split_trajectories(ds, split)) {
        const int n = ds.trajectories[static_cast<size_t>(ti)].length();
        for (int c = 0; c < n; ++c) refs.push_back({ti, c});
    }
    return refs;
}

NormStats compute_norm_stats(const std::vector<Trajectory>& robot_trajectories, int state_dim,
                             int action_dim) {
    // std floored so near-constant robot dimensions do not explode the
    // normalized coordinates of off-distribution human data
    constexpr double kStdFloor = 0.1;

    NormStats n;
    n.action_mean.assign(static_cast<size_t>(action_dim), 0.0);
    n.action_std.assign(static_cast<size_t>(action_dim), 0.0);
    n.state_mean.assign(static_cast<size_t>(state_dim), 0.0);
    n.state_std.assign(static_cast<size_t>(state_dim), 0.0);

    long n_actions = 0, n_states = 0;
    for (const Trajectory& t : robot_trajectories) {
        for (const Vec& a : t.actions) {
            for (int j = 0; j < action_dim; ++j) n.action_mean[j] += a[j];
            ++n_actions;
        }
        for (const Vec& s : t.states) {
            for (int j = 0; j < state_dim; ++j) n.state_mean[j] += s[j];
            ++n_states;
        }
    }
    if (n_actions == 0 || n_states == 0)
        throw std::invalid_argument("compute_norm_stats: empty robot dataset");
    for (double& m : n.action_mean) m /= static_cast<double>(n_actions);
    for (double& m : n.state_mean) m /= static_cast<double>(n_states);

    for (const Trajectory& t : robot_trajectories) {
        for (const Vec& a : t.actions)
            for (int j = 0; j < action_dim; ++j) {
                const double d = a[j] - n.action_mean[j];
                n.action_std[j] += d * d;
            }
        for (const Vec& s : t.states)
            for (int j = 0; j < state_dim; ++j) {
                const double d = s[j] - n.state_mean[j];
                n.state_std[j] += d * d;
            }
    }
    for (double& v : n.action_std) v = std::max(std::sqrt(v / n_actions), kStdFloor);
    for (double& v : n.state_std) v = std::max(std::sqrt(v / n_states), kStdFloor);
    return n;
}

Vec normalize_state(const NormStats& n, const Vec& state) {
    Vec out(state.size());
    for (size_t j = 0; j < state.size(); ++j)
        out[j] = (state[j] - n.state_mean[j]) / n.state_std[j];
    return out;
}

ActionChunk normalize_chunk(const NormStats& n, const ActionChunk& chunk) {
    ActionChunk out(chunk.rows, chunk.cols);
    for (int r = 0; r < chunk.rows; ++r)
        for (int c = 0; c < chunk.cols; ++c)
            out.at(r, c) = (chunk.at(r, c) - n.action_mean[c]) / n.action_std[c];
    return out;
}

ActionChunk denormalize_chunk(const NormStats& n, const ActionChunk& chunk) {
    ActionChunk out(chunk.rows, chunk.cols);
    for (int r = 0; r < chunk.rows; ++r)
        for (int c = 0; c < chunk.cols; ++c)
            out.at(r, c) = chunk.at(r, c) * n.action_std[c] + n.action_mean[c];
    return out;
}

ChunkSample chunk_sample(const DemoDataset& ds, const ChunkRef& ref, int horizon) {
    const Trajectory& t = ds.trajectories[static_cast<size_t>(ref.traj)];
    ChunkSample s;
    s.chunk = normalize_chunk(ds.norm, make_chunk(t, ref.chunk, horizon));
    s.state = normalize_state(ds.norm, t.states[static_cast<size_t>(ref.chunk)]);
    return s;
}

ChunkCache build_chunk_cache(const DemoDataset& ds, Split split, int horizon) {
    ChunkCache cache;
    const std::vector<ChunkRef> refs = chunk_refs(ds, split);
    cache.chunks.reserve(refs.size());
    cache.states.reserve(refs.size());
    cache.feasible.reserve(refs.size());
    for (const ChunkRef& r : refs) {
        ChunkSample s = chunk_sample(ds, r, horizon);
        cache.chunks.push_back(std::move(s.chunk));
        cache.states.push_back(std::move(s.state));
        cache.feasible.push_back(ds.trajectories[static_cast<size_t>(r.traj)].feasible ? 1 : 0);
    }
    cache.refs = refs;
    return cache;
}

DemoDataset merge_datasets(const DemoDataset& a, const DemoDataset& b) {
    if (!(a.norm == b.norm))
        throw std::invalid_argument("merge_datasets: normalizer mismatch");
    DemoDataset out = a;
    out.trajectories.insert(out.trajectories.end(), b.trajectories.begin(),
                            b.trajectories.end());
    return out;
}

}  // namespace xdiff
