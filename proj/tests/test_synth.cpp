#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "xdiff/dataset_io.hpp"
#include "xdiff/errors.hpp"
#include "xdiff/generate.hpp"

using namespace xdiff;

namespace {

bool trajectories_identical(const Trajectory& a, const Trajectory& b) {
    if (a.embodiment != b.embodiment || a.style != b.style || a.seed != b.seed ||
        a.feasible != b.feasible || a.states.size() != b.states.size() ||
        a.actions.size() != b.actions.size())
        return false;
    for (size_t i = 0; i < a.states.size(); ++i)
        if (a.states[i] != b.states[i]) return false;
    for (size_t i = 0; i < a.actions.size(); ++i)
        if (a.actions[i] != b.actions[i]) return false;
    return true;
}

int count_feasible(const DemoDataset& ds) {
    int n = 0;
    for (const Trajectory& t : ds.trajectories) n += t.feasible ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("robot demos: generated set is oracle-feasible and replayable open-loop") {
    for (TaskKind kind : {TaskKind::pick_place, TaskKind::push_plate, TaskKind::reorient}) {
        const TaskSpec task = default_task(kind);
        const DemoDataset ds = generate_robot_demos(task, 5, 42);
        REQUIRE(ds.trajectories.size() == 5);
        int replay_success = 0;
        for (const Trajectory& t : ds.trajectories) {
            CHECK(t.embodiment == Embodiment::robot);
            CHECK(feasibility_oracle(t, task));
            // open-loop replay from the same seed reproduces the episode
            Env env(task, t.seed);
            for (const Vec& a : t.actions)
                if (!env.done()) env.step(a, true);
            replay_success += env.succeeded() ? 1 : 0;
        }
        CHECK(replay_success >= 5 * 95 / 100);
    }
}

TEST_CASE("robot demos: deterministic given the seed") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset a = generate_robot_demos(task, 3, 7);
    const DemoDataset b = generate_robot_demos(task, 3, 7);
    REQUIRE(a.trajectories.size() == b.trajectories.size());
    for (size_t i = 0; i < a.trajectories.size(); ++i)
        CHECK(trajectories_identical(a.trajectories[i], b.trajectories[i]));
}

TEST_CASE("human demos: degenerate top_down mix is fully feasible") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 3, 1);
    const DemoDataset human =
        generate_human_demos(task, 20, StyleMix{1.0, 0.0, 0.0}, HumanNoise{}, 2, robot.norm);
    CHECK(count_feasible(human) == 20);
    for (const Trajectory& t : human.trajectories) {
        CHECK(t.embodiment == Embodiment::human);
        CHECK(t.style == Style::top_down);
    }
}

TEST_CASE("human demos: feasible fraction tracks the style mix") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 3, 1);
    const StyleMix mix{0.5, 0.3, 0.2};
    const int n = 120;
    const DemoDataset human = generate_human_demos(task, n, mix, HumanNoise{}, 3, robot.norm);
    const double frac = static_cast<double>(count_feasible(human)) / n;
    const double se = std::sqrt(0.5 * 0.5 / n);
    CHECK(std::fabs(frac - mix.feasible_mass()) <= 3.0 * se);

    int styles[3] = {0, 0, 0};
    for (const Trajectory& t : human.trajectories) {
        REQUIRE(t.style != Style::scripted_robot);
        styles[static_cast<int>(t.style)]++;
        CHECK(t.feasible == (t.style == Style::top_down));
    }
    CHECK(styles[0] > 0);
    CHECK(styles[1] > 0);
    CHECK(styles[2] > 0);
}

TEST_CASE("human demos: fast_sweep violates the speed cap on at least one step") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 3, 1);
    const DemoDataset human =
        generate_human_demos(task, 10, StyleMix{0.0, 0.0, 1.0}, HumanNoise{}, 4, robot.norm);
    for (const Trajectory& t : human.trajectories) {
        CHECK(t.style == Style::fast_sweep);
        CHECK_FALSE(t.feasible);
        CHECK(max_step_speed(t) > task.v_max);
    }
}

TEST_CASE("human demos: side_grasp closes the gripper outside the angle window") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 3, 1);
    const DemoDataset human =
        generate_human_demos(task, 10, StyleMix{0.0, 1.0, 0.0}, HumanNoise{}, 5, robot.norm);
    for (const Trajectory& t : human.trajectories) {
        CHECK_FALSE(t.feasible);
        CHECK(max_step_speed(t) <= task.v_max * (1 + 1e-9));  // violation is kinematic only
        bool closed = false;
        bool bad_angle_at_close = false;
        for (int i = 0; i < t.length(); ++i) {
            const bool next_closed = t.actions[static_cast<size_t>(i)][3] >= 0.5;
            if (next_closed && !closed)
                bad_angle_at_close |=
                    std::fabs(wrap_angle(t.actions[static_cast<size_t>(i)][2])) > task.theta_max;
            closed = next_closed;
        }
        CHECK(bad_angle_at_close);
    }
}

TEST_CASE("human demos: invalid style mix is rejected") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 2, 1);
    CHECK_THROWS_AS(generate_human_demos(task, 4, StyleMix{0.5, 0.2, 0.2}, HumanNoise{}, 9,
                                         robot.norm),
                    ConfigError);
}

TEST_CASE("feasibility oracle: action-free trajectory is vacuously feasible") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    Trajectory t;
    t.states.push_back(Vec(static_cast<size_t>(task.state_dim()), 0.0));
    CHECK(feasibility_oracle(t, task));
}

TEST_CASE("feasibility oracle: speed, angle, and latency violations are caught") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    auto base_state = [&](double x, double g) {
        Vec s(static_cast<size_t>(task.state_dim()), 0.0);
        s[0] = x;
        s[1] = 0.5;
        s[3] = g;
        return s;
    };
    auto act = [&](double x, double theta, double g) { return Vec{x, 0.5, theta, g}; };

    Trajectory speedy;
    speedy.states = {base_state(0.1, 0), base_state(0.1 + 2 * task.v_max, 0)};
    speedy.actions = {act(0.1 + 2 * task.v_max, 0.0, 0.0)};
    CHECK_FALSE(feasibility_oracle(speedy, task));

    Trajectory side;
    side.states = {base_state(0.1, 0), base_state(0.1, 1)};
    side.actions = {act(0.1, task.theta_max + 0.3, 1.0)};
    CHECK_FALSE(feasibility_oracle(side, task));

    Trajectory chatter;  // close at t=0, open at t=1: violates the latency
    chatter.states = {base_state(0.1, 0), base_state(0.1, 1), base_state(0.1, 0)};
    chatter.actions = {act(0.1, 0.0, 1.0), act(0.1, 0.0, 0.0)};
    CHECK_FALSE(feasibility_oracle(chatter, task));

    Trajectory fine;
    fine.states = {base_state(0.1, 0), base_state(0.1 + 0.5 * task.v_max, 0)};
    fine.actions = {act(0.1 + 0.5 * task.v_max, 0.0, 0.0)};
    CHECK(feasibility_oracle(fine, task));
}

TEST_CASE("env_rollout: scripted expert succeeds with zero infeasible events") {
    for (TaskKind kind : {TaskKind::pick_place, TaskKind::push_plate, TaskKind::reorient}) {
        const TaskSpec task = default_task(kind);
        const ChunkPolicy expert = scripted_expert_policy(task, 8);
        for (uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
            const RolloutOutcome out = env_rollout(task, expert, seed, 8);
            CHECK(out.success);
            CHECK(out.infeasible_events == 0);
        }
    }
}

TEST_CASE("env_rollout: side-grasp imitation fails with infeasible events") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    // drives at the object and insists on closing at a side angle
    const ChunkPolicy side_grasper = [&task](const Vec& state) {
        ActionChunk chunk(8, 4);
        double x = state[0], y = state[1];
        for (int r = 0; r < 8; ++r) {
            const double dx = state[4] - x, dy = state[5] - y;
            const double d = std::hypot(dx, dy);
            const double s = d > 1e-12 ? std::min(task.v_max * 0.9, d) / d : 0.0;
            x += dx * s;
            y += dy * s;
            const bool near = d < task.grasp_radius;
            chunk.at(r, 0) = x;
            chunk.at(r, 1) = y;
            chunk.at(r, 2) = M_PI / 2.0;  // far outside the window
            chunk.at(r, 3) = near ? 1.0 : 0.0;
        }
        return chunk;
    };
    int failures = 0, with_events = 0;
    for (uint64_t seed : {21u, 22u, 23u, 24u, 25u}) {
        const RolloutOutcome out = env_rollout(task, side_grasper, seed, 8);
        failures += out.success ? 0 : 1;
        with_events += out.infeasible_events >= 1 ? 1 : 0;
    }
    CHECK(failures == 5);
    CHECK(with_events == 5);
}

TEST_CASE("env_rollout: zero-motion policy fails at the episode cap") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const ChunkPolicy frozen = [](const Vec& state) {
        ActionChunk chunk(8, 4);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 4; ++c) chunk.at(r, c) = state[static_cast<size_t>(c)];
        return chunk;
    };
    const RolloutOutcome out = env_rollout(task, frozen, 31, 8);
    CHECK_FALSE(out.success);
    CHECK(out.steps == task.episode_cap);
}

TEST_CASE("env_rollout: non-finite action marks the episode failed") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const ChunkPolicy broken = [](const Vec&) {
        ActionChunk chunk(8, 4);
        chunk.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
        return chunk;
    };
    const RolloutOutcome out = env_rollout(task, broken, 32, 8);
    CHECK_FALSE(out.success);
    CHECK(out.note == "non-finite action");
}

TEST_CASE("env_rollout: deterministic given task, seed, and policy") {
    const TaskSpec task = default_task(TaskKind::push_plate);
    const ChunkPolicy expert = scripted_expert_policy(task, 8);
    const RolloutOutcome a = env_rollout(task, expert, 99, 8);
    const RolloutOutcome b = env_rollout(task, expert, 99, 8);
    CHECK(a.success == b.success);
    CHECK(a.steps == b.steps);
    CHECK(a.infeasible_events == b.infeasible_events);
}

TEST_CASE("trajectory identity: actions are the next-step proprioception") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 3, 5);
    const DemoDataset human =
        generate_human_demos(task, 6, StyleMix{0.4, 0.3, 0.3}, HumanNoise{}, 6, robot.norm);
    for (const DemoDataset* ds : {&robot, &human})
        for (const Trajectory& t : ds->trajectories) {
            REQUIRE(t.states.size() == t.actions.size() + 1);
            for (size_t i = 0; i < t.actions.size(); ++i)
                for (int j = 0; j < 4; ++j)
                    CHECK(t.actions[i][static_cast<size_t>(j)] ==
                          t.states[i + 1][static_cast<size_t>(j)]);
        }
}

TEST_CASE("chunking: one chunk per action, de-chunking recovers the sequence") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 2, 8);
    const Trajectory& t = robot.trajectories.front();
    const int S = 8;
    const int n = t.length();

    DemoDataset one = robot;
    one.trajectories = {t};
    one.val_fraction = 0.0;
    const std::vector<ChunkRef> refs = chunk_refs(one, Split::all);
    CHECK(static_cast<int>(refs.size()) == n);

    for (int c = 0; c < n; ++c) {
        const ActionChunk chunk = make_chunk(t, c, S);
        REQUIRE(chunk.rows == S);
        // first row recovers the original action
        for (int j = 0; j < 4; ++j)
            CHECK(chunk.at(0, j) == t.actions[static_cast<size_t>(c)][static_cast<size_t>(j)]);
        // past the end the final action repeats
        for (int r = 0; r < S; ++r)
            if (c + r >= n)
                for (int j = 0; j < 4; ++j)
                    CHECK(chunk.at(r, j) ==
                          t.actions[static_cast<size_t>(n - 1)][static_cast<size_t>(j)]);
    }
}

TEST_CASE("normalization: robot-derived stats, floored std, exact inverse") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 4, 9);
    const DemoDataset human =
        generate_human_demos(task, 8, StyleMix{0.5, 0.3, 0.2}, HumanNoise{}, 10, robot.norm);
    CHECK(robot.norm == human.norm);  // one shared coordinate system
    for (double s : robot.norm.action_std) CHECK(s >= 0.1);
    for (double s : robot.norm.state_std) CHECK(s >= 0.1);

    const ActionChunk chunk = make_chunk(human.trajectories.front(), 0, 8);
    const ActionChunk round = denormalize_chunk(robot.norm, normalize_chunk(robot.norm, chunk));
    for (long i = 0; i < chunk.size(); ++i)
        CHECK(round.data[i] == doctest::Approx(chunk.data[i]).epsilon(1e-12));
}

TEST_CASE("split: validation tail holds at least one trajectory") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    DemoDataset robot = generate_robot_demos(task, 5, 3);
    robot.val_fraction = 0.15;
    CHECK(split_trajectories(robot, Split::train).size() == 4);
    CHECK(split_trajectories(robot, Split::val).size() == 1);
    CHECK(split_trajectories(robot, Split::all).size() == 5);
}

TEST_CASE("dataset io: save/load round-trip is exact") {
    const TaskSpec task = default_task(TaskKind::reorient);
    const DemoDataset robot = generate_robot_demos(task, 3, 11);
    DemoDataset human =
        generate_human_demos(task, 6, StyleMix{0.5, 0.3, 0.2}, HumanNoise{}, 12, robot.norm);
    const std::string path = "test_dataset_roundtrip.jsonl";
    save_dataset(human, path, "cafebabe");

    std::string hash;
    const DemoDataset loaded = load_dataset(path, &hash);
    CHECK(hash == "cafebabe");
    CHECK(loaded.task.kind == task.kind);
    CHECK(loaded.task.v_max == task.v_max);
    CHECK(loaded.norm == human.norm);
    REQUIRE(loaded.trajectories.size() == human.trajectories.size());
    for (size_t i = 0; i < loaded.trajectories.size(); ++i)
        CHECK(trajectories_identical(loaded.trajectories[i], human.trajectories[i]));
    CHECK(count_feasible(loaded) == count_feasible(human));
    std::filesystem::remove(path);
}

TEST_CASE("dataset io: truncated record errors with the record index") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 3, 13);
    const std::string path = "test_dataset_truncated.jsonl";
    save_dataset(robot, path, "");

    // chop the last line in half
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    lines.back() = lines.back().substr(0, lines.back().size() / 2);
    std::ofstream out(path, std::ios::trunc);
    for (const std::string& l : lines) out << l << '\n';
    out.close();

    try {
        load_dataset(path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("record 5") != std::string::npos);  // header + norm + 3 trajectories
    }
    std::filesystem::remove(path);
}

TEST_CASE("dataset io: merge keeps both embodiments and requires one normalizer") {
    const TaskSpec task = default_task(TaskKind::pick_place);
    const DemoDataset robot = generate_robot_demos(task, 3, 14);
    const DemoDataset human =
        generate_human_demos(task, 4, StyleMix{1.0, 0.0, 0.0}, HumanNoise{}, 15, robot.norm);
    const DemoDataset merged = merge_datasets(robot, human);
    CHECK(merged.trajectories.size() == 7);

    DemoDataset other = human;
    other.norm.action_mean[0] += 1.0;
    CHECK_THROWS_AS(merge_datasets(robot, other), std::invalid_argument);
}
