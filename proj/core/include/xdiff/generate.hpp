#pragma once

#include "xdiff/env.hpp"
#include "xdiff/trajectory.hpp"

namespace xdiff {

/// Fractions of human execution styles; must sum to 1. top_down is
/// robot-feasible; side_grasp violates the grasp-angle window; fast_sweep
/// violates the per-step speed cap.
struct StyleMix {
    double top_down = 0.5;
    double side_grasp = 0.25;
    double fast_sweep = 0.25;

    double feasible_mass() const { return top_down; }
    void validate() const;
};

/// Retargeting-noise model for human demonstrations.
struct HumanNoise {
    double jitter_pos = 0.004;   // per-step waypoint jitter, workspace units
    double jitter_theta = 0.035; // per-step orientation jitter, radians
};

/// Scripted constraint-respecting expert demos. Every trajectory passes the
/// feasibility oracle and succeeds in the constrained environment.
/// Throws a GenerationError-style IoError with the failing seed if the
/// controller cannot solve an episode within the retry budget.
DemoDataset generate_robot_demos(const TaskSpec& task, int n, uint64_t seed);

/// Human demos: style drawn per trajectory from `mix`, executed in
/// unconstrained dynamics with per-step jitter. All styles complete the task;
/// top_down trajectories are oracle-feasible, the others are not (each by its
/// designed violation). `robot_norm` is the robot-dataset normalizer to embed
/// (both embodiments must share one coordinate system).
DemoDataset generate_human_demos(const TaskSpec& task, int n, const StyleMix& mix,
                                 const HumanNoise& noise, uint64_t seed,
                                 const NormStats& robot_norm);

/// The robot expert as a closed-loop chunk policy (plans `horizon` steps by
/// simulating its controller on an internal model of the environment).
ChunkPolicy scripted_expert_policy(const TaskSpec& task, int horizon);

/// Largest per-step translation in a trajectory (diagnostic for speed checks).
double max_step_speed(const Trajectory& traj);

}  // namespace xdiff
