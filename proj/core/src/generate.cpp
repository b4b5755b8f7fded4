#include "xdiff/generate.hpp"

#include <algorithm>
#include <cmath>

#include "xdiff/errors.hpp"

namespace xdiff {

namespace {

constexpr double kThetaRate = 0.35;  // max commanded orientation change per step

// Speeds are ranges, drawn fresh every step: per-episode constants would be
// point-identifiable from a handful of robot demos, while per-step draws make
// the execution-style distribution the only learnable signature.
struct ControllerParams {
    Style style = Style::scripted_robot;
    double speed_lo = 0.0, speed_hi = 0.0;  // per-step translation range
    double grasp_theta = 0.0;  // approach angle commanded at the grasp step
    double carry_theta = 0.0;  // wrist angle held while transporting
    double jitter_pos = 0.0;
    double jitter_theta = 0.0;
    double side_offset = 0.0;  // lateral pre-grasp waypoint offset (side_grasp)
    // hand sway: humans travel in gentle arcs; the lateral offset oscillates
    // along the path, so it shows up across a chunk but not in single states
    double sway_amp = 0.0;
    double sway_freq = 0.0;
    double sway_phase = 0.0;
};

ControllerParams draw_params(Style style, const TaskSpec& task, const HumanNoise& noise,
                             SeededRng& rng) {
    ControllerParams p;
    p.style = style;
    // pushing spends most of its steps in short press moves, so travel
    // between waypoints runs faster there
    const double boost = task.kind == TaskKind::push_plate ? 0.15 : 0.0;
    switch (style) {
        case Style::scripted_robot:
            p.speed_lo = (0.30 + boost) * task.v_max;
            p.speed_hi = (0.42 + boost) * task.v_max;
            p.grasp_theta = (rng.uniform01() - 0.5) * task.theta_max;  // inside the window
            p.carry_theta = p.grasp_theta;
            break;
        case Style::top_down:
            p.speed_lo = 0.50 * task.v_max;
            p.speed_hi = 0.66 * task.v_max;
            p.grasp_theta = (rng.uniform01() - 0.5) * task.theta_max;
            p.carry_theta = p.grasp_theta;
            p.jitter_pos = noise.jitter_pos;
            p.jitter_theta = noise.jitter_theta;
            p.sway_amp = 0.004 + 0.007 * rng.uniform01();
            p.sway_freq = 0.6 + 0.8 * rng.uniform01();
            p.sway_phase = rng.uniform01() * 2.0 * M_PI;
            break;
        case Style::side_grasp: {
            p.speed_lo = 0.50 * task.v_max;
            p.speed_hi = 0.66 * task.v_max;
            const double excess = 0.35 + 0.45 * rng.uniform01();
            const double mag = std::min(task.theta_max + excess, 0.55 * M_PI);
            p.grasp_theta = rng.uniform01() < 0.5 ? mag : -mag;
            // the wrist straightens back into the window while transporting;
            // the grasp action itself is what violates the robot limits
            p.carry_theta = (p.grasp_theta > 0 ? 1.0 : -1.0) * 0.45 * task.theta_max;
            p.jitter_pos = noise.jitter_pos;
            p.jitter_theta = noise.jitter_theta;
            p.sway_amp = 0.004 + 0.007 * rng.uniform01();
            p.sway_freq = 0.6 + 0.8 * rng.uniform01();
            p.sway_phase = rng.uniform01() * 2.0 * M_PI;
            p.side_offset = p.grasp_theta > 0 ? 0.09 : -0.09;
            break;
        }
        case Style::fast_sweep:
            p.speed_lo = 1.4 * task.v_max;
            p.speed_hi = 1.9 * task.v_max;
            p.grasp_theta = (rng.uniform01() - 0.5) * task.theta_max;
            p.carry_theta = p.grasp_theta;
            p.jitter_pos = noise.jitter_pos;
            p.jitter_theta = noise.jitter_theta;
            p.sway_amp = 0.004 + 0.007 * rng.uniform01();
            p.sway_freq = 0.6 + 0.8 * rng.uniform01();
            p.sway_phase = rng.uniform01() * 2.0 * M_PI;
            break;
    }
    return p;
}

double step_toward(double cur, double target, double rate) {
    const double d = target - cur;
    return cur + std::clamp(d, -rate, rate);
}

/// Next commanded proprio for the current environment observation.
/// One deterministic state machine serves every style; style differences are
/// carried entirely by the parameters (speed, grasp angle, waypoint offset).
Vec controller_command(const Env& env, const ControllerParams& p, SeededRng& jitter_rng) {
    const TaskSpec& task = env.task();
    const Proprio& ee = env.proprio();
    const bool grasp_task = task.kind != TaskKind::push_plate || p.style == Style::side_grasp;
    const double speed = p.speed_lo + (p.speed_hi - p.speed_lo) * jitter_rng.uniform01();

    double cx = ee.x, cy = ee.y;
    double ctheta = ee.theta;
    double cgrip = ee.grip >= 0.5 ? 1.0 : 0.0;

    auto move_to = [&](double txp, double typ, double speed) {
        const double dx = txp - ee.x, dy = typ - ee.y;
        const double d = std::hypot(dx, dy);
        if (d > 1e-12) {
            const double s = std::min(speed, d) / d;
            cx = ee.x + dx * s;
            cy = ee.y + dy * s;
        }
    };

    if (grasp_task) {
        // approach -> grasp -> carry (reorienting if needed) -> release
        const double reach = task.grasp_radius * 0.9;
        const double hover = task.push_radius * 1.1;  // park outside contact
        if (!env.attached() && cgrip < 0.5) {
            const double ox = env.object_x(), oy = env.object_y();
            double wx = ox, wy = oy;
            if (p.side_offset != 0.0 && std::hypot(ee.x - ox, ee.y - oy) > 0.14) {
                // lateral approach: swing through an offset waypoint first
                wy += p.side_offset;
            }
            const double d = std::hypot(ee.x - ox, ee.y - oy);
            if (d > reach) {
                // stop just outside the contact distance on my side
                const double dirx = (ee.x - ox) / std::max(d, 1e-9);
                const double diry = (ee.y - oy) / std::max(d, 1e-9);
                if (wx == ox && wy == oy) {
                    wx = ox + dirx * hover;
                    wy = oy + diry * hover;
                }
                move_to(wx, wy, speed);
                ctheta = step_toward(ee.theta, p.grasp_theta, kThetaRate);
            } else {
                ctheta = p.grasp_theta;  // grasp step
                cgrip = 1.0;
            }
        } else if (env.attached() || cgrip >= 0.5) {
            const double offx = env.attached() ? env.object_x() - ee.x : 0.0;
            const double offy = env.attached() ? env.object_y() - ee.y : 0.0;
            const double tx = task.goal.x - offx, ty = task.goal.y - offy;
            const double carry_theta =
                task.kind == TaskKind::reorient
                    ? wrap_angle(ee.theta - wrap_angle(env.object_theta()))
                    : p.carry_theta;
            const double d_obj = std::hypot(env.object_x() - task.goal.x,
                                            env.object_y() - task.goal.y);
            const bool upright_ok = task.kind != TaskKind::reorient ||
                                    std::fabs(wrap_angle(env.object_theta())) <
                                        task.upright_tol * 0.5;
            if (d_obj > task.goal.radius * 0.4) {
                move_to(tx, ty, speed);
                ctheta = step_toward(ee.theta, carry_theta, kThetaRate);
            } else if (!upright_ok) {
                ctheta = step_toward(ee.theta, carry_theta, kThetaRate);
            } else {
                cgrip = 0.0;  // release
            }
        }
    } else {
        // push: line up behind the object relative to the goal, then press
        // through it so the contact resolution walks it toward the goal
        const double ox = env.object_x(), oy = env.object_y();
        const double gx = task.goal.x - ox;
        const double gy = task.goal.y - oy;
        const double gd = std::hypot(gx, gy);
        const double ux = gd > 1e-12 ? gx / gd : 1.0;
        const double uy = gd > 1e-12 ? gy / gd : 0.0;
        const double d_obj = std::hypot(ee.x - ox, ee.y - oy);
        const double align =
            d_obj > 1e-12 ? ((ox - ee.x) * ux + (oy - ee.y) * uy) / d_obj : 1.0;
        if (align > 0.75 && d_obj < task.push_radius * 3.0) {
            // aligned and close: press along the goal direction; press steps
            // stay below the contact distance so the end-effector cannot hop
            // past the object center in one step
            const double press = std::min(speed, task.push_radius * 0.55);
            move_to(ee.x + ux * press, ee.y + uy * press, press);
        } else {
            const double stage = task.push_radius * 1.6;  // inside press range
            move_to(ox - ux * stage, oy - uy * stage, speed);
        }
        ctheta = step_toward(ee.theta, 0.0, kThetaRate);
    }

    // hand sway: lateral arc along the direction of travel
    if (p.sway_amp > 0.0) {
        const double mx = cx - ee.x, my = cy - ee.y;
        const double md = std::hypot(mx, my);
        if (md > 1e-9) {
            const double s = p.sway_amp * std::sin(p.sway_phase + p.sway_freq * env.t());
            cx += -my / md * s;
            cy += mx / md * s;
        }
    }
    // human retargeting jitter; the gripper value is estimated from hand
    // keypoints, so it is analog and noisy rather than exactly binary
    if (p.jitter_pos > 0.0) {
        cx += jitter_rng.normal() * p.jitter_pos;
        cy += jitter_rng.normal() * p.jitter_pos;
        ctheta += jitter_rng.normal() * p.jitter_theta;
        const double g_noise = 0.07 * jitter_rng.normal();
        cgrip = cgrip >= 0.5 ? std::clamp(cgrip + g_noise, 0.55, 1.0)
                             : std::clamp(cgrip + g_noise, 0.0, 0.45);
    }

    // styles other than fast_sweep stay under the speed cap even after jitter
    if (p.style != Style::fast_sweep) {
        const double dx = cx - ee.x, dy = cy - ee.y;
        const double d = std::hypot(dx, dy);
        const double cap = task.v_max * 0.97;
        if (d > cap) {
            cx = ee.x + dx / d * cap;
            cy = ee.y + dy / d * cap;
        }
    }
    // styles other than side_grasp keep the grasp angle inside the window
    if (p.style != Style::side_grasp && cgrip >= 0.5 && (ee.grip < 0.5)) {
        const double lim = task.theta_max * 0.9;
        ctheta = std::clamp(wrap_angle(ctheta), -lim, lim);
    }

    return Vec{std::clamp(cx, 0.0, 1.0), std::clamp(cy, 0.0, 1.0), wrap_angle(ctheta), cgrip};
}

struct EpisodeResult {
    Trajectory traj;
    bool success = false;
};

/// Post-success retreat toward the rest area. Keeps the recorded tail of a
/// demo dynamic, so tail-padded chunks still carry execution style.
Vec retreat_command(const Env& env, const ControllerParams& p, SeededRng& jitter_rng) {
    const TaskSpec& task = env.task();
    const Proprio& ee = env.proprio();
    const double speed = p.speed_lo + (p.speed_hi - p.speed_lo) * jitter_rng.uniform01();
    const double rx = 0.5 * (task.start_x.lo + task.start_x.hi);
    const double ry = 0.5 * (task.start_y.lo + task.start_y.hi);
    const double dx = rx - ee.x, dy = ry - ee.y;
    const double d = std::hypot(dx, dy);
    double cx = ee.x, cy = ee.y;
    if (d > 1e-12) {
        const double s = std::min(speed, d) / d;
        cx += dx * s;
        cy += dy * s;
    }
    double ctheta = step_toward(ee.theta, 0.0, kThetaRate);
    double cgrip = ee.grip >= 0.5 ? 1.0 : 0.0;
    if (p.jitter_pos > 0.0) {
        cx += jitter_rng.normal() * p.jitter_pos;
        cy += jitter_rng.normal() * p.jitter_pos;
        ctheta += jitter_rng.normal() * p.jitter_theta;
        const double g_noise = 0.07 * jitter_rng.normal();
        cgrip = cgrip >= 0.5 ? std::clamp(cgrip + g_noise, 0.55, 1.0)
                             : std::clamp(cgrip + g_noise, 0.0, 0.45);
    }
    if (p.style != Style::fast_sweep) {
        const double ddx = cx - ee.x, ddy = cy - ee.y;
        const double dd = std::hypot(ddx, ddy);
        const double cap = task.v_max * 0.97;
        if (dd > cap) {
            cx = ee.x + ddx / dd * cap;
            cy = ee.y + ddy / dd * cap;
        }
    }
    return Vec{std::clamp(cx, 0.0, 1.0), std::clamp(cy, 0.0, 1.0), wrap_angle(ctheta), cgrip};
}

constexpr int kRetreatSteps = 6;

EpisodeResult run_episode(const TaskSpec& task, const ControllerParams& p, uint64_t seed,
                          bool constrained) {
    Env env(task, seed);
    SeededRng jitter_rng = SeededRng(seed).fork(0xA11CE);
    EpisodeResult r;
    r.traj.seed = seed;
    r.traj.states.push_back(env.state());
    while (!env.done()) {
        const Vec cmd = controller_command(env, p, jitter_rng);
        env.step(cmd, constrained);
        r.traj.actions.push_back(action_from_proprio(env.proprio()));
        r.traj.states.push_back(env.state());
    }
    r.success = env.succeeded();
    if (r.success) {
        for (int i = 0; i < kRetreatSteps; ++i) {
            const Vec cmd = retreat_command(env, p, jitter_rng);
            env.step(cmd, constrained);
            r.traj.actions.push_back(action_from_proprio(env.proprio()));
            r.traj.states.push_back(env.state());
        }
    }
    return r;
}

}  // namespace

void StyleMix::validate() const {
    if (top_down < 0 || side_grasp < 0 || fast_sweep < 0 ||
        std::fabs(top_down + side_grasp + fast_sweep - 1.0) > 1e-9)
        throw ConfigError("style mix fractions must be nonnegative and sum to 1");
}

double max_step_speed(const Trajectory& traj) {
    double m = 0.0;
    for (int t = 0; t < traj.length(); ++t) {
        const Vec& s = traj.states[static_cast<size_t>(t)];
        const Vec& a = traj.actions[static_cast<size_t>(t)];
        m = std::max(m, std::hypot(a[0] - s[0], a[1] - s[1]));
    }
    return m;
}

DemoDataset generate_robot_demos(const TaskSpec& task, int n, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_robot_demos: n must be >= 1");
    task.validate();
    constexpr int kRetries = 64;

    DemoDataset ds;
    ds.task = task;
    SeededRng root(seed);
    for (int i = 0; i < n; ++i) {
        bool ok = false;
        for (int attempt = 0; attempt < kRetries && !ok; ++attempt) {
            const uint64_t ep_seed = root.fork(static_cast<uint64_t>(i)).fork(attempt).seed();
            SeededRng param_rng = SeededRng(ep_seed).fork(0xBEEF);
            const ControllerParams p =
                draw_params(Style::scripted_robot, task, HumanNoise{}, param_rng);
            EpisodeResult r = run_episode(task, p, ep_seed, /*constrained=*/true);
            if (!r.success) continue;
            r.traj.embodiment = Embodiment::robot;
            r.traj.style = Style::scripted_robot;
            r.traj.feasible = feasibility_oracle(r.traj, task);
            if (!r.traj.feasible) continue;
            ds.trajectories.push_back(std::move(r.traj));
            ok = true;
        }
        if (!ok)
            throw IoError("robot demo generation failed for index " + std::to_string(i) +
                          " (seed " + std::to_string(seed) + "): expert exhausted retries");
    }
    ds.norm = compute_norm_stats(ds.trajectories, task.state_dim(), task.action_dim());
    return ds;
}

DemoDataset generate_human_demos(const TaskSpec& task, int n, const StyleMix& mix,
                                 const HumanNoise& noise, uint64_t seed,
                                 const NormStats& robot_norm) {
    if (n < 1) throw std::invalid_argument("generate_human_demos: n must be >= 1");
    task.validate();
    mix.validate();
    if (!robot_norm.valid())
        throw std::invalid_argument("generate_human_demos: robot normalizer required");
    constexpr int kRetries = 64;

    DemoDataset ds;
    ds.task = task;
    ds.norm = robot_norm;
    SeededRng root(seed);
    for (int i = 0; i < n; ++i) {
        SeededRng style_rng = root.fork(static_cast<uint64_t>(i)).fork(0x5771E);
        const double u = style_rng.uniform01();
        Style style = Style::top_down;
        if (u >= mix.top_down) style = u < mix.top_down + mix.side_grasp ? Style::side_grasp : Style::fast_sweep;
        const bool want_feasible = style == Style::top_down;

        bool ok = false;
        for (int attempt = 0; attempt < kRetries && !ok; ++attempt) {
            const uint64_t ep_seed = root.fork(static_cast<uint64_t>(i)).fork(attempt).seed();
            SeededRng param_rng = SeededRng(ep_seed).fork(0xBEEF);
            const ControllerParams p = draw_params(style, task, noise, param_rng);
            EpisodeResult r = run_episode(task, p, ep_seed, /*constrained=*/false);
            if (!r.success) continue;
            r.traj.embodiment = Embodiment::human;
            r.traj.style = style;
            r.traj.feasible = feasibility_oracle(r.traj, task);
            if (r.traj.feasible != want_feasible) continue;
            if (style == Style::fast_sweep && max_step_speed(r.traj) <= task.v_max) continue;
            ds.trajectories.push_back(std::move(r.traj));
            ok = true;
        }
        if (!ok)
            throw IoError("human demo generation failed for index " + std::to_string(i) +
                          " style " + style_name(style) + " (seed " + std::to_string(seed) +
                          "): exhausted retries");
    }
    return ds;
}

ChunkPolicy scripted_expert_policy(const TaskSpec& task, int horizon) {
    return [task, horizon](const Vec& state) -> ActionChunk {
        Env model = Env::from_state(task, state);
        SeededRng param_rng(0x0E);
        ControllerParams p = draw_params(Style::scripted_robot, task, HumanNoise{}, param_rng);
        SeededRng jitter_rng(0);
        ActionChunk chunk(horizon, task.action_dim());
        for (int r = 0; r < horizon; ++r) {
            Vec cmd = model.done() ? action_from_proprio(model.proprio())
                                   : controller_command(model, p, jitter_rng);
            model.step(cmd, /*constrained=*/true);
            const Vec achieved = action_from_proprio(model.proprio());
            for (int j = 0; j < chunk.cols; ++j) chunk.at(r, j) = achieved[static_cast<size_t>(j)];
        }
        return chunk;
    };
}

}  // namespace xdiff
