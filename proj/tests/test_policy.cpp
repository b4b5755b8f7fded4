#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "xdiff/errors.hpp"
#include "xdiff/policy.hpp"
#include "xdiff/generate.hpp"

using namespace xdiff;

namespace {

struct MiniSetup {
    TaskSpec task = default_task(TaskKind::pick_place);
    NoiseSchedule schedule = build_schedule(40, ScheduleKind::linear, 2e-3, 0.25);
    DemoDataset robot;
    DemoDataset human;

    MiniSetup(int n_robot = 3, int n_human = 8) {
        robot = generate_robot_demos(task, n_robot, 42);
        human = generate_human_demos(task, n_human, StyleMix{0.5, 0.25, 0.25}, HumanNoise{},
                                     43, robot.norm);
    }
};

PolicyConfig mini_policy_config(int steps, uint64_t seed) {
    PolicyConfig cfg;
    cfg.steps = steps;
    cfg.batch = 16;
    cfg.seed = seed;
    cfg.hidden_width = 32;
    cfg.hidden_layers = 2;
    return cfg;
}

/// Annotation assigning the same k* to every human chunk.
KStarAnnotation constant_annotation(const DemoDataset& human, int k_star, int K) {
    KStarAnnotation annot;
    annot.schedule_steps = K;
    annot.n_draws = 1;
    for (const ChunkRef& r : chunk_refs(human, Split::all))
        annot.records.push_back({r.traj, r.chunk, k_star, {}});
    return annot;
}

}  // namespace

TEST_CASE("regime identity: XDIFFUSION with zero k* equals NAIVE bitwise") {
    MiniSetup s;
    const KStarAnnotation zero = constant_annotation(s.human, 0, s.schedule.steps);
    const PolicyConfig cfg = mini_policy_config(250, 7);
    const PolicyModel naive =
        train_policy(TrainRegime::NAIVE, s.robot, s.human, nullptr, s.schedule, cfg);
    const PolicyModel xdiff =
        train_policy(TrainRegime::XDIFFUSION, s.robot, s.human, &zero, s.schedule, cfg);
    CHECK(nets_equal(naive.net, xdiff.net));
}

TEST_CASE("regime identity: NAIVE with zero human fraction equals ROBOT bitwise") {
    MiniSetup s;
    PolicyConfig cfg = mini_policy_config(250, 11);
    cfg.human_sample_frac = 0.0;
    const PolicyModel naive =
        train_policy(TrainRegime::NAIVE, s.robot, s.human, nullptr, s.schedule, cfg);
    const PolicyModel robot =
        train_policy(TrainRegime::ROBOT, s.robot, s.human, nullptr, s.schedule, cfg);
    CHECK(nets_equal(naive.net, robot.net));
}

TEST_CASE("regime identity: FILTERED on all-feasible human data equals NAIVE bitwise") {
    MiniSetup s(3, 0);
    s.human = generate_human_demos(s.task, 8, StyleMix{1.0, 0.0, 0.0}, HumanNoise{}, 43,
                                   s.robot.norm);
    const PolicyConfig cfg = mini_policy_config(250, 13);
    const PolicyModel naive =
        train_policy(TrainRegime::NAIVE, s.robot, s.human, nullptr, s.schedule, cfg);
    const PolicyModel filtered =
        train_policy(TrainRegime::FILTERED, s.robot, s.human, nullptr, s.schedule, cfg);
    CHECK(nets_equal(naive.net, filtered.net));
}

TEST_CASE("training determinism: identical config and seed, identical parameters") {
    MiniSetup s;
    const PolicyConfig cfg = mini_policy_config(200, 17);
    const PolicyModel a =
        train_policy(TrainRegime::NAIVE, s.robot, s.human, nullptr, s.schedule, cfg);
    const PolicyModel b =
        train_policy(TrainRegime::NAIVE, s.robot, s.human, nullptr, s.schedule, cfg);
    CHECK(nets_equal(a.net, b.net));
}

TEST_CASE("XDIFFUSION with k* at the cap: humans contribute only at k = K") {
    MiniSetup s;
    const int K = s.schedule.steps;
    const KStarAnnotation capped = constant_annotation(s.human, K, K);
    PolicyConfig cfg = mini_policy_config(1500, 19);
    PolicyTrace trace;
    train_policy(TrainRegime::XDIFFUSION, s.robot, s.human, &capped, s.schedule, cfg, &trace);
    REQUIRE(trace.human_samples > 5000);
    const double frac =
        static_cast<double>(trace.human_passed_mask) / static_cast<double>(trace.human_samples);
    const double expect = 1.0 / K;  // only k = K passes
    const double se = std::sqrt(expect * (1 - expect) / trace.human_samples);
    CHECK(std::fabs(frac - expect) <= 3.5 * se);
}

TEST_CASE("masked-sample accounting matches the closed-form expectation") {
    MiniSetup s;
    const int K = s.schedule.steps;
    // varied k* per chunk, deterministic
    KStarAnnotation annot;
    annot.schedule_steps = K;
    const std::vector<ChunkRef> refs = chunk_refs(s.human, Split::all);
    double expect = 0.0;
    for (size_t i = 0; i < refs.size(); ++i) {
        const int k_star = static_cast<int>(i * 7 % (K + 1));
        annot.records.push_back({refs[i].traj, refs[i].chunk, k_star, {}});
        expect += k_star == 0 ? 1.0 : static_cast<double>(K - k_star + 1) / K;
    }
    // the trainer samples the train split only; restrict the expectation to it
    const std::vector<ChunkRef> train_refs = chunk_refs(s.human, Split::train);
    expect = 0.0;
    for (const ChunkRef& r : train_refs) {
        int k_star = -1;
        for (const KStarRecord& rec : annot.records)
            if (rec.traj == r.traj && rec.chunk == r.chunk) k_star = rec.k_star;
        REQUIRE(k_star >= 0);
        expect += k_star == 0 ? 1.0 : static_cast<double>(K - k_star + 1) / K;
    }
    expect /= static_cast<double>(train_refs.size());

    PolicyTrace trace;
    PolicyConfig cfg = mini_policy_config(1500, 23);
    train_policy(TrainRegime::XDIFFUSION, s.robot, s.human, &annot, s.schedule, cfg, &trace);
    REQUIRE(trace.human_samples > 5000);
    const double frac =
        static_cast<double>(trace.human_passed_mask) / static_cast<double>(trace.human_samples);
    const double se = std::sqrt(expect * (1 - expect) / trace.human_samples);
    CHECK(std::fabs(frac - expect) <= 3.5 * se);
}

TEST_CASE("mask monotonicity: raising every k* never passes more samples") {
    MiniSetup s;
    const int K = s.schedule.steps;
    for (int base : {5, 20, 39}) {
        const KStarAnnotation lo = constant_annotation(s.human, base, K);
        const KStarAnnotation hi = constant_annotation(s.human, std::min(base + 1, K), K);
        const PolicyConfig cfg = mini_policy_config(400, 29);
        PolicyTrace tlo, thi;
        train_policy(TrainRegime::XDIFFUSION, s.robot, s.human, &lo, s.schedule, cfg, &tlo);
        train_policy(TrainRegime::XDIFFUSION, s.robot, s.human, &hi, s.schedule, cfg, &thi);
        // same seed, same sampled (chunk, k) stream: counts can only drop
        CHECK(thi.human_passed_mask <= tlo.human_passed_mask);
        CHECK(thi.human_samples == tlo.human_samples);
    }
}

TEST_CASE("XDIFFUSION without an annotation is a config error") {
    MiniSetup s;
    CHECK_THROWS_AS(train_policy(TrainRegime::XDIFFUSION, s.robot, s.human, nullptr,
                                 s.schedule, mini_policy_config(10, 1)),
                    ConfigError);
}

TEST_CASE("annotation for a different schedule is rejected") {
    MiniSetup s;
    const KStarAnnotation wrong = constant_annotation(s.human, 0, s.schedule.steps + 5);
    CHECK_THROWS_AS(train_policy(TrainRegime::XDIFFUSION, s.robot, s.human, &wrong,
                                 s.schedule, mini_policy_config(10, 1)),
                    ConfigError);
}

TEST_CASE("validation-loss probes decrease over early training") {
    MiniSetup s(4, 4);
    PolicyConfig cfg = mini_policy_config(1200, 31);
    cfg.val_probe_every = 120;
    PolicyTrace trace;
    train_policy(TrainRegime::ROBOT, s.robot, s.human, nullptr, s.schedule, cfg, &trace);
    REQUIRE(trace.val_loss.size() >= 3);
    const double start = trace.val_loss.front().second;
    // loose smoke property: a tenth of the way in, the val loss has dropped
    double at_tenth = start;
    for (const auto& [step, loss] : trace.val_loss)
        if (step >= cfg.steps / 10) {
            at_tenth = loss;
            break;
        }
    CHECK(std::isfinite(start));
    CHECK(at_tenth < start);
}

TEST_CASE("infer_action: deterministic, finite, gripper clamped") {
    MiniSetup s;
    const PolicyModel policy =
        train_policy(TrainRegime::ROBOT, s.robot, s.human, nullptr, s.schedule,
                     mini_policy_config(200, 37));
    const Vec state = s.robot.trajectories.front().states.front();

    SeededRng a(5), b(5);
    const ActionChunk ca = infer_action(policy, s.schedule, state, 10, a);
    const ActionChunk cb = infer_action(policy, s.schedule, state, 10, b);
    REQUIRE(ca.rows == 8);
    REQUIRE(ca.cols == 4);
    for (long i = 0; i < ca.size(); ++i) CHECK(ca.data[i] == cb.data[i]);
    CHECK(all_finite(ca));
    for (int r = 0; r < ca.rows; ++r) {
        CHECK(ca.at(r, 3) >= 0.0);
        CHECK(ca.at(r, 3) <= 1.0);
    }

    // untrained policy: only finiteness is asserted
    SeededRng init(3);
    PolicyModel raw = policy;
    raw.net = make_net(policy.input_width(), {16}, 32, Activation::silu, init);
    SeededRng c(6);
    CHECK(all_finite(infer_action(raw, s.schedule, state, 10, c)));
}

TEST_CASE("demodiffusion: step plan partition and split identities") {
    const std::vector<bool> plan = demodiffusion_step_plan(20, 0.6);
    REQUIRE(plan.size() == 20);
    int human_steps = 0;
    for (bool h : plan) human_steps += h ? 1 : 0;
    CHECK(human_steps == 12);  // ceil(0.6 * 20)
    for (int i = 0; i < 12; ++i) CHECK(plan[static_cast<size_t>(i)]);
    for (int i = 12; i < 20; ++i) CHECK_FALSE(plan[static_cast<size_t>(i)]);

    MiniSetup s;
    PolicyConfig cfg = mini_policy_config(200, 41);
    const PolicyModel robot_policy =
        train_policy(TrainRegime::ROBOT, s.robot, s.human, nullptr, s.schedule, cfg);
    cfg.seed = 43;
    cfg.human_sample_frac = 1.0;
    const PolicyModel human_policy =
        train_policy(TrainRegime::NAIVE, s.robot, s.human, nullptr, s.schedule, cfg);

    const Vec state = s.robot.trajectories.front().states.front();
    SeededRng r1(9), r2(9);
    const ActionChunk robot_only =
        demodiffusion_sample(human_policy, robot_policy, s.schedule, state, 10, 0.0, r1);
    const ActionChunk robot_direct = infer_action(robot_policy, s.schedule, state, 10, r2);
    for (long i = 0; i < robot_only.size(); ++i)
        CHECK(robot_only.data[i] == robot_direct.data[i]);

    SeededRng r3(9), r4(9);
    const ActionChunk human_only =
        demodiffusion_sample(human_policy, robot_policy, s.schedule, state, 10, 1.0, r3);
    const ActionChunk human_direct = infer_action(human_policy, s.schedule, state, 10, r4);
    for (long i = 0; i < human_only.size(); ++i)
        CHECK(human_only.data[i] == human_direct.data[i]);

    CHECK_THROWS_AS(demodiffusion_sample(human_policy, robot_policy, s.schedule, state, 10,
                                         1.5, r1),
                    std::invalid_argument);
}

TEST_CASE("demodiffusion: mismatched policies are rejected") {
    MiniSetup s;
    const PolicyModel robot_policy =
        train_policy(TrainRegime::ROBOT, s.robot, s.human, nullptr, s.schedule,
                     mini_policy_config(100, 47));
    PolicyModel other = robot_policy;
    other.norm.action_mean[0] += 1.0;
    const Vec state = s.robot.trajectories.front().states.front();
    SeededRng rng(1);
    CHECK_THROWS_AS(
        demodiffusion_sample(other, robot_policy, s.schedule, state, 10, 0.5, rng),
        std::invalid_argument);
}

TEST_CASE("policy checkpoint: save/load round-trip with sidecar") {
    MiniSetup s;
    const PolicyModel policy =
        train_policy(TrainRegime::FILTERED, s.robot, s.human, nullptr, s.schedule,
                     mini_policy_config(150, 53));
    save_policy(policy, "test_policy_ckpt", R"({"config_hash":"xyz"})");
    std::string sidecar;
    const PolicyModel loaded = load_policy("test_policy_ckpt", &sidecar);
    CHECK(nets_equal(policy.net, loaded.net));
    CHECK(loaded.regime == TrainRegime::FILTERED);
    CHECK(loaded.norm == policy.norm);
    CHECK(loaded.schedule_steps == s.schedule.steps);
    CHECK(loaded.beta_max == s.schedule.beta_max);
    CHECK(sidecar.find("xyz") != std::string::npos);
    std::filesystem::remove("test_policy_ckpt.bin");
    std::filesystem::remove("test_policy_ckpt.json");
}

TEST_CASE("train_policy: normalizer mismatch and empty datasets are rejected") {
    MiniSetup s;
    DemoDataset skewed = s.human;
    skewed.norm.state_mean[0] += 1.0;
    CHECK_THROWS_AS(train_policy(TrainRegime::NAIVE, s.robot, skewed, nullptr, s.schedule,
                                 mini_policy_config(10, 1)),
                    std::invalid_argument);
    DemoDataset empty;
    empty.task = s.task;
    CHECK_THROWS_AS(train_policy(TrainRegime::ROBOT, empty, s.human, nullptr, s.schedule,
                                 mini_policy_config(10, 1)),
                    std::invalid_argument);
}

TEST_CASE("parameter EMA: enabled EMA yields different but finite parameters") {
    MiniSetup s;
    PolicyConfig cfg = mini_policy_config(300, 59);
    const PolicyModel plain =
        train_policy(TrainRegime::ROBOT, s.robot, s.human, nullptr, s.schedule, cfg);
    cfg.ema_decay = 0.95;
    const PolicyModel ema =
        train_policy(TrainRegime::ROBOT, s.robot, s.human, nullptr, s.schedule, cfg);
    CHECK_FALSE(nets_equal(plain.net, ema.net));
    for (const Layer& l : ema.net.layers) CHECK(all_finite(l.w));
}
