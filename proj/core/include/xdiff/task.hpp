#pragma once

#include <cmath>
#include <string>

#include "xdiff/matrix.hpp"

namespace xdiff {

enum class TaskKind { push_plate = 0, pick_place = 1, reorient = 2 };

const char* task_kind_name(TaskKind k);
TaskKind task_kind_from_name(const std::string& name);

struct RandRange {
    double lo = 0.0;
    double hi = 0.0;
    double sample(double u) const { return lo + u * (hi - lo); }
};

struct GoalRegion {
    double x = 0.0;
    double y = 0.0;
    double radius = 0.0;
};

/// End-effector proprioception: planar position, orientation, gripper in [0,1].
struct Proprio {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
    double grip = 0.0;
};

/// 2D manipulation task on the unit square. Robot constraints (speed cap,
/// grasp-angle window, gripper toggle latency) apply only to robot execution;
/// the same dynamics run unconstrained for human demonstrations.
struct TaskSpec {
    TaskKind kind = TaskKind::pick_place;
    GoalRegion goal{0.78, 0.50, 0.07};
    double v_max = 0.12;        // per-step speed cap, workspace units
    double theta_max = 0.45;    // grasp-angle half window, radians
    int gripper_latency = 3;    // min steps between gripper toggles
    int episode_cap = 40;
    RandRange object_x{0.08, 0.58};
    RandRange object_y{0.15, 0.85};
    RandRange start_x{0.06, 0.16};
    RandRange start_y{0.25, 0.75};
    double grasp_radius = 0.08;
    double push_radius = 0.035;  // contact distance; must stay below grasp_radius
    double upright_tol = 0.30;  // reorient success angle tolerance
    double lying_theta = 1.5707963267948966;  // initial object orientation (reorient)

    // State layout: [x, y, theta, grip, obj_x, obj_y, obj_theta, goal_dx, goal_dy]
    int state_dim() const { return 9; }
    int action_dim() const { return 4; }

    void validate() const;
};

TaskSpec default_task(TaskKind kind);

inline double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
}

inline Vec make_state(const Proprio& ee, double ox, double oy, double otheta,
                      const GoalRegion& goal) {
    return Vec{ee.x, ee.y, ee.theta, ee.grip, ox, oy, otheta, goal.x - ox, goal.y - oy};
}

inline Proprio proprio_from_action(const Vec& a) {
    return Proprio{a[0], a[1], a[2], a[3]};
}

inline Vec action_from_proprio(const Proprio& p) { return Vec{p.x, p.y, p.theta, p.grip}; }

}  // namespace xdiff
