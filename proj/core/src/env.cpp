#include "xdiff/env.hpp"

#include <algorithm>
#include <cmath>

namespace xdiff {

namespace {
inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
}

Env::Env(const TaskSpec& task) : task_(task) {}

Env::Env(const TaskSpec& task, uint64_t seed) : task_(task) {
    task_.validate();
    SeededRng rng(seed);
    ee_.x = task_.start_x.sample(rng.uniform01());
    ee_.y = task_.start_y.sample(rng.uniform01());
    ee_.theta = 0.0;
    ee_.grip = 0.0;
    obj_x_ = task_.object_x.sample(rng.uniform01());
    obj_y_ = task_.object_y.sample(rng.uniform01());
    obj_theta_ = task_.kind == TaskKind::reorient ? task_.lying_theta : 0.0;
    last_toggle_ = -task_.gripper_latency - 1;
}

Env Env::from_state(const TaskSpec& task, const Vec& state) {
    Env e(task);
    e.ee_ = Proprio{state[0], state[1], state[2], state[3]};
    e.obj_x_ = state[4];
    e.obj_y_ = state[5];
    e.obj_theta_ = state[6];
    e.closed_ = e.ee_.grip >= 0.5;
    const double d = std::hypot(e.ee_.x - e.obj_x_, e.ee_.y - e.obj_y_);
    e.attached_ = e.closed_ && d <= task.grasp_radius * 1.5;
    if (e.attached_) {
        e.attach_dx_ = e.obj_x_ - e.ee_.x;
        e.attach_dy_ = e.obj_y_ - e.ee_.y;
        e.attach_dtheta_ = e.obj_theta_ - e.ee_.theta;
    }
    e.last_toggle_ = -task.gripper_latency - 1;
    e.check_success();
    return e;
}

Env::StepEvents Env::step(const Vec& action, bool constrained) {
    StepEvents ev;

    const double tx = action[0], ty = action[1];
    const double ttheta = wrap_angle(action[2]);
    const double tgrip = clamp01(action[3]);

    // translation, speed-capped under robot constraints
    double dx = tx - ee_.x, dy = ty - ee_.y;
    const double dist = std::hypot(dx, dy);
    if (constrained && dist > task_.v_max * (1.0 + 1e-12)) {
        const double scale = task_.v_max / dist;
        dx *= scale;
        dy *= scale;
        ev.clipped_speed = true;
    }
    const double old_x = ee_.x, old_y = ee_.y;
    ee_.x = clamp01(ee_.x + dx);
    ee_.y = clamp01(ee_.y + dy);
    ee_.theta = ttheta;

    // gripper toggle with latency; closing is a grasp attempt
    const bool want_closed = tgrip >= 0.5;
    double new_grip = tgrip;
    if (want_closed != closed_) {
        if (constrained && (t_ - last_toggle_) < task_.gripper_latency) {
            ev.rejected_toggle = true;
            new_grip = closed_ ? 1.0 : 0.0;  // toggle rejected, state holds
        } else {
            last_toggle_ = t_;
            closed_ = want_closed;
            if (want_closed) {
                const bool angle_ok =
                    !constrained || std::fabs(wrap_angle(ee_.theta)) <= task_.theta_max;
                if (!angle_ok) ev.failed_grasp = true;  // fingers close, grasp fails
            } else {
                attached_ = false;
            }
        }
    }
    ee_.grip = new_grip;

    // attachment is a continuous condition: a closed gripper near the object
    // at a legal wrist angle holds it (closing early or a step late still
    // ends in a grasp; an out-of-window wrist never does)
    if (closed_ && !attached_) {
        const bool angle_ok =
            !constrained || std::fabs(wrap_angle(ee_.theta)) <= task_.theta_max;
        const double d = std::hypot(ee_.x - obj_x_, ee_.y - obj_y_);
        if (angle_ok && d <= task_.grasp_radius) {
            attached_ = true;
            attach_dx_ = obj_x_ - ee_.x;
            attach_dy_ = obj_y_ - ee_.y;
            attach_dtheta_ = obj_theta_ - ee_.theta;
        }
    }

    if (attached_) {
        obj_x_ = clamp01(ee_.x + attach_dx_);
        obj_y_ = clamp01(ee_.y + attach_dy_);
        // only the reorientation task couples object orientation to the wrist
        if (task_.kind == TaskKind::reorient)
            obj_theta_ = wrap_angle(ee_.theta + attach_dtheta_);
    } else {
        // non-penetration contact: the end-effector displaces the object out
        // to the contact distance. Gentle contact resolves radially; if the
        // end-effector passed through the object this step, the object is
        // carried ahead along the motion direction instead.
        const double d = std::hypot(ee_.x - obj_x_, ee_.y - obj_y_);
        if (d < task_.push_radius) {
            const double exec_dx = ee_.x - old_x, exec_dy = ee_.y - old_y;
            double dirx = obj_x_ - ee_.x, diry = obj_y_ - ee_.y;
            const bool behind = dirx * exec_dx + diry * exec_dy < 0.0;
            if (d < 1e-9 || behind) {
                const double exec = std::hypot(exec_dx, exec_dy);
                if (exec > 1e-12) {
                    dirx = exec_dx / exec;
                    diry = exec_dy / exec;
                } else {
                    dirx = 1.0;
                    diry = 0.0;
                }
            } else {
                dirx /= d;
                diry /= d;
            }
            obj_x_ = clamp01(ee_.x + dirx * task_.push_radius);
            obj_y_ = clamp01(ee_.y + diry * task_.push_radius);
        }
    }

    ++t_;
    check_success();
    return ev;
}

void Env::check_success() {
    const double d = std::hypot(obj_x_ - task_.goal.x, obj_y_ - task_.goal.y);
    switch (task_.kind) {
        case TaskKind::push_plate:
            if (d <= task_.goal.radius) success_ = true;
            break;
        case TaskKind::pick_place:
            if (d <= task_.goal.radius && !attached_ && !closed_) success_ = true;
            break;
        case TaskKind::reorient:
            if (d <= task_.goal.radius && !attached_ && !closed_ &&
                std::fabs(wrap_angle(obj_theta_)) <= task_.upright_tol)
                success_ = true;
            break;
    }
}

Vec Env::state() const { return make_state(ee_, obj_x_, obj_y_, obj_theta_, task_.goal); }

RolloutOutcome env_rollout(const TaskSpec& task, const ChunkPolicy& policy, uint64_t seed,
                           int action_horizon) {
    RolloutOutcome out;
    Env env(task, seed);
    while (!env.done()) {
        ActionChunk chunk;
        try {
            chunk = policy(env.state());
        } catch (const std::exception& e) {
            out.note = std::string("policy exception: ") + e.what();
            break;
        }
        if (!all_finite(chunk)) {
            out.note = "non-finite action";
            break;
        }
        const int n_exec = std::min(action_horizon, chunk.rows);
        for (int r = 0; r < n_exec && !env.done(); ++r) {
            Vec a(chunk.row(r), chunk.row(r) + chunk.cols);
            out.infeasible_events += env.step(a, /*constrained=*/true).count();
        }
    }
    out.success = env.succeeded();
    out.steps = env.t();
    return out;
}

}  // namespace xdiff
