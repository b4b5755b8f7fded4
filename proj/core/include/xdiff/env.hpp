#pragma once

#include <functional>
#include <string>

#include "xdiff/rng.hpp"
#include "xdiff/task.hpp"
#include "xdiff/trajectory.hpp"

namespace xdiff {

struct RolloutOutcome {
    bool success = false;
    int steps = 0;
    int infeasible_events = 0;
    std::string note;
};

/// Scripted 2D manipulation environment. One instance is one episode.
///
/// Commands are desired next proprioception (the action convention). Under
/// constrained (robot) execution, steps are clipped to v_max, grasp attempts
/// outside the angle window fail, and gripper toggles inside the latency
/// window are rejected; each counts as an infeasible-action event. Under
/// unconstrained (human) execution, commands execute verbatim.
class Env {
public:
    Env(const TaskSpec& task, uint64_t seed);

    struct StepEvents {
        bool clipped_speed = false;
        bool rejected_toggle = false;
        bool failed_grasp = false;
        int count() const {
            return (clipped_speed ? 1 : 0) + (rejected_toggle ? 1 : 0) + (failed_grasp ? 1 : 0);
        }
    };

    StepEvents step(const Vec& action, bool constrained);

    Vec state() const;
    const Proprio& proprio() const { return ee_; }
    double object_x() const { return obj_x_; }
    double object_y() const { return obj_y_; }
    double object_theta() const { return obj_theta_; }
    bool attached() const { return attached_; }
    bool succeeded() const { return success_; }
    bool done() const { return success_ || t_ >= task_.episode_cap; }
    int t() const { return t_; }
    const TaskSpec& task() const { return task_; }

    /// Rebuild an episode mid-state from a StateVec (used by scripted experts
    /// to plan action chunks). Attachment is inferred from gripper + proximity.
    static Env from_state(const TaskSpec& task, const Vec& state);

private:
    Env(const TaskSpec& task);  // uninitialized; used by from_state
    void check_success();

    TaskSpec task_;
    Proprio ee_;
    double obj_x_ = 0.0, obj_y_ = 0.0, obj_theta_ = 0.0;
    bool attached_ = false;
    double attach_dx_ = 0.0, attach_dy_ = 0.0, attach_dtheta_ = 0.0;
    bool closed_ = false;
    int last_toggle_ = 0;
    int t_ = 0;
    bool success_ = false;
};

/// Policy interface for closed-loop evaluation: current state -> action chunk.
using ChunkPolicy = std::function<ActionChunk(const Vec& state)>;

/// Closed-loop episode under robot constraints: execute the first
/// `action_horizon` rows of each predicted chunk, replan, repeat until
/// success or the episode cap. Non-finite actions mark the episode failed.
RolloutOutcome env_rollout(const TaskSpec& task, const ChunkPolicy& policy, uint64_t seed,
                           int action_horizon);

}  // namespace xdiff
