#include "xdiff/task.hpp"

#include <stdexcept>

#include "xdiff/errors.hpp"

namespace xdiff {

const char* task_kind_name(TaskKind k) {
    switch (k) {
        case TaskKind::push_plate: return "push_plate";
        case TaskKind::pick_place: return "pick_place";
        case TaskKind::reorient: return "reorient";
    }
    return "unknown";
}

TaskKind task_kind_from_name(const std::string& name) {
    if (name == "push_plate") return TaskKind::push_plate;
    if (name == "pick_place") return TaskKind::pick_place;
    if (name == "reorient") return TaskKind::reorient;
    throw ConfigError("unknown task kind: " + name);
}

void TaskSpec::validate() const {
    auto inside = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!inside(goal.x - goal.radius) || !inside(goal.x + goal.radius) ||
        !inside(goal.y - goal.radius) || !inside(goal.y + goal.radius))
        throw ConfigError("task: goal region must lie inside the unit workspace");
    if (!(v_max > 0.0)) throw ConfigError("task: v_max must be positive");
    if (!(theta_max > 0.0) || !(theta_max < M_PI))
        throw ConfigError("task: theta_max must be in (0, pi)");
    if (gripper_latency < 0) throw ConfigError("task: gripper_latency must be >= 0");
    if (episode_cap < 1) throw ConfigError("task: episode_cap must be >= 1");
    if (!(goal.radius > 0.0)) throw ConfigError("task: goal radius must be positive");
}

TaskSpec default_task(TaskKind kind) {
    TaskSpec t;
    t.kind = kind;
    if (kind == TaskKind::push_plate) {
        // pushing needs headroom between spawn area and goal, a wider contact
        // disc, and more steps (press steps are shorter than free travel)
        t.goal = GoalRegion{0.80, 0.50, 0.07};
        t.object_x = RandRange{0.25, 0.45};
        t.object_y = RandRange{0.30, 0.70};
        t.episode_cap = 70;
        t.push_radius = 0.05;
        t.grasp_radius = 0.08;
    } else if (kind == TaskKind::reorient) {
        t.episode_cap = 45;
    }
    t.validate();
    return t;
}

}  // namespace xdiff
