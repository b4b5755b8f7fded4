#include "xdiff/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "xdiff/dataset_io.hpp"
#include "xdiff/errors.hpp"
#include "xdiff/generate.hpp"

namespace xdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// seed-derivation domains
constexpr uint64_t kDomClassifier = 1;
constexpr uint64_t kDomPolicy = 2;
constexpr uint64_t kDomEval = 3;
constexpr uint64_t kDomRobotData = 4;
constexpr uint64_t kDomHumanData = 5;
constexpr uint64_t kDomAnnotate = 6;
constexpr uint64_t kDomAnalyze = 7;
constexpr uint64_t kDomHumanOnlyPolicy = 8;

void note(const PipelineOptions& opt, const std::string& msg) {
    if (!opt.quiet) std::cout << "[xdiff] " << msg << std::endl;
}

void require_file(const std::string& path, const std::string& produced_by) {
    if (!fs::exists(path))
        throw DependencyError("missing input artifact '" + path + "'; run `xdiff " +
                              produced_by + "` first");
}

void require_hash(const std::string& what, const std::string& expected,
                  const std::string& actual, bool force) {
    if (expected == actual) return;
    const std::string msg = "hash-chain mismatch for " + what + ": expected " + expected +
                            ", found " + actual + " (use --force to override)";
    if (!force) throw DependencyError(msg);
}

ClassifierConfig classifier_config(const ExperimentConfig& cfg) {
    ClassifierConfig c;
    c.steps = cfg.classifier_steps;
    c.batch = cfg.classifier_batch;
    c.lr = cfg.classifier_lr;
    c.hidden_width = cfg.hidden_width;
    c.hidden_layers = cfg.hidden_layers;
    c.activation = activation_from_name(cfg.activation);
    c.horizon = cfg.prediction_horizon;
    return c;
}

PolicyConfig policy_config(const ExperimentConfig& cfg) {
    PolicyConfig p;
    p.steps = cfg.policy_steps;
    p.batch = cfg.policy_batch;
    p.lr = cfg.policy_lr;
    p.human_sample_frac = cfg.human_sample_frac;
    p.hidden_width = cfg.hidden_width;
    p.hidden_layers = cfg.hidden_layers;
    p.activation = activation_from_name(cfg.activation);
    p.horizon = cfg.prediction_horizon;
    p.ema_decay = cfg.ema_decay;
    return p;
}

std::vector<int> analysis_grid(const ExperimentConfig& cfg) {
    std::vector<int> ks;
    const int stride = std::max(1, cfg.analysis_k_stride);
    for (int k = 0; k <= cfg.schedule_steps; k += stride) ks.push_back(k);
    if (ks.back() != cfg.schedule_steps) ks.push_back(cfg.schedule_steps);
    return ks;
}

void write_probability_curve_csv(const ProbabilityCurve& pc, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "k,mean_robot,se_robot,mean_human,se_human\n";
    char buf[40];
    for (size_t i = 0; i < pc.ks.size(); ++i) {
        os << pc.ks[i];
        for (double v : {pc.mean_robot[i], pc.se_robot[i], pc.mean_human[i], pc.se_human[i]}) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            os << ',' << buf;
        }
        os << '\n';
    }
}

/// Verify a policy sidecar against the current config + dataset files.
void verify_policy_chain(const json& sidecar, const ExperimentConfig& cfg,
                         const ArtifactPaths& paths, bool force) {
    const std::string chash = config_hash(cfg);
    require_hash("policy vs config", chash, sidecar.value("config_hash", ""), force);
    if (sidecar.contains("inputs")) {
        const json& in = sidecar.at("inputs");
        if (in.contains("robot_data"))
            require_hash("policy vs robot data", in.at("robot_data"),
                         file_hash(paths.robot_data()), force);
        if (in.contains("human_data"))
            require_hash("policy vs human data", in.at("human_data"),
                         file_hash(paths.human_data()), force);
        if (in.contains("annotation"))
            require_hash("policy vs annotation", in.at("annotation"),
                         file_hash(paths.annotation()), force);
    }
}

struct TrainJob {
    std::string regime;      // "HUMANONLY" for the demodiffusion human policy
    int seed_index = 0;
};

void run_jobs(const std::vector<std::function<void()>>& jobs, int n_threads) {
    if (n_threads <= 1 || jobs.size() <= 1) {
        for (const auto& j : jobs) j();
        return;
    }
    std::mutex mu;
    size_t next = 0;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= jobs.size() || first_error) return;
                i = next++;
            }
            try {
                jobs[i]();
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    const int n = std::min<int>(n_threads, static_cast<int>(jobs.size()));
    threads.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

ArtifactPaths artifact_paths(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    ArtifactPaths p;
    p.root = opt.out_override.empty() ? cfg.out_dir : opt.out_override;
    return p;
}

uint64_t derive_seed(const ExperimentConfig& cfg, uint64_t domain, uint64_t index) {
    return SeededRng(cfg.seed).fork(domain).fork(index).seed();
}

void cmd_gen_data(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    const ArtifactPaths paths = artifact_paths(cfg, opt);
    fs::create_directories(paths.data_dir());
    const std::string chash = config_hash(cfg);

    note(opt, "generating " + std::to_string(cfg.robot_demos) + " robot demos (" +
                  std::string(task_kind_name(cfg.task.kind)) + ")");
    DemoDataset robot =
        generate_robot_demos(cfg.task, cfg.robot_demos, derive_seed(cfg, kDomRobotData, 0));
    robot.val_fraction = cfg.val_fraction;
    save_dataset(robot, paths.robot_data(), chash);

    note(opt, "generating " + std::to_string(cfg.human_demos) + " human demos");
    DemoDataset human = generate_human_demos(cfg.task, cfg.human_demos, cfg.style_mix,
                                             cfg.human_noise,
                                             derive_seed(cfg, kDomHumanData, 0), robot.norm);
    human.val_fraction = cfg.val_fraction;
    save_dataset(human, paths.human_data(), chash);
    note(opt, "datasets written under " + paths.data_dir());
}

void cmd_train_classifier(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    const ArtifactPaths paths = artifact_paths(cfg, opt);
    require_file(paths.robot_data(), "gen-data");
    require_file(paths.human_data(), "gen-data");
    fs::create_directories(paths.classifier_dir());

    const std::string chash = config_hash(cfg);
    std::string robot_chash, human_chash;
    const DemoDataset robot = load_dataset(paths.robot_data(), &robot_chash);
    const DemoDataset human = load_dataset(paths.human_data(), &human_chash);
    require_hash("robot data vs config", chash, robot_chash, opt.force);
    require_hash("human data vs config", chash, human_chash, opt.force);

    const NoiseSchedule schedule = cfg.make_schedule();
    ClassifierConfig ccfg = classifier_config(cfg);
    ccfg.seed = derive_seed(cfg, kDomClassifier, 0);

    note(opt, "training classifier (" + std::to_string(ccfg.steps) + " steps)");
    const ClassifierModel model = train_classifier(robot, human, schedule, ccfg);

    json extra{{"config_hash", chash},
               {"seed", ccfg.seed},
               {"schedule",
                {{"steps", cfg.schedule_steps},
                 {"kind", schedule_kind_name(cfg.schedule_kind)},
                 {"beta_min", cfg.beta_min},
                 {"beta_max", cfg.beta_max}}},
               {"inputs",
                {{"robot_data", file_hash(paths.robot_data())},
                 {"human_data", file_hash(paths.human_data())}}}};
    save_classifier(model, paths.classifier_prefix(), extra.dump());

    // held-out probability curves (Fig-6 style plot data)
    const DemoDataset merged = merge_datasets(robot, human);
    const ProbabilityCurve pc =
        probability_curve(model, schedule, merged, analysis_grid(cfg), cfg.n_draws,
                          SeededRng(derive_seed(cfg, kDomClassifier, 1)), Split::val);
    write_probability_curve_csv(pc, paths.classifier_curve_csv());
    note(opt, "classifier written to " + paths.classifier_prefix() + ".{bin,json}");
}

void cmd_annotate(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    const ArtifactPaths paths = artifact_paths(cfg, opt);
    require_file(paths.classifier_prefix() + ".bin", "train-classifier");
    require_file(paths.classifier_prefix() + ".json", "train-classifier");
    require_file(paths.human_data(), "gen-data");
    fs::create_directories(paths.annotation_dir());

    const std::string chash = config_hash(cfg);
    std::string sidecar;
    const ClassifierModel model = load_classifier(paths.classifier_prefix(), &sidecar);
    require_hash("classifier vs config", chash, json::parse(sidecar).value("config_hash", ""),
                 opt.force);

    std::string human_chash;
    const DemoDataset human = load_dataset(paths.human_data(), &human_chash);
    require_hash("human data vs config", chash, human_chash, opt.force);

    const NoiseSchedule schedule = cfg.make_schedule();
    note(opt, "annotating k* over " + std::to_string(human.trajectories.size()) +
                  " human trajectories");
    KStarAnnotation annot =
        annotate_kstar(model, schedule, human, cfg.n_draws,
                       SeededRng(derive_seed(cfg, kDomAnnotate, 0)), false,
                       std::max(1, opt.jobs));
    annot.dataset_id = file_hash(paths.human_data());
    save_annotation(annot, paths.annotation(), chash,
                    file_hash(paths.classifier_prefix() + ".bin"));
    note(opt, "annotation written to " + paths.annotation());
}

void cmd_train_policy(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    const ArtifactPaths paths = artifact_paths(cfg, opt);
    require_file(paths.robot_data(), "gen-data");
    require_file(paths.human_data(), "gen-data");
    fs::create_directories(paths.policy_dir());

    const std::string chash = config_hash(cfg);
    std::string robot_chash, human_chash;
    const DemoDataset robot = load_dataset(paths.robot_data(), &robot_chash);
    const DemoDataset human = load_dataset(paths.human_data(), &human_chash);
    require_hash("robot data vs config", chash, robot_chash, opt.force);
    require_hash("human data vs config", chash, human_chash, opt.force);

    std::vector<std::string> regimes = cfg.regime_list();
    if (!opt.regime.empty()) {
        regime_from_name(opt.regime);
        regimes = {opt.regime};
    }

    const bool needs_annotation =
        std::find(regimes.begin(), regimes.end(), "XDIFFUSION") != regimes.end();
    KStarAnnotation annot;
    std::string annot_hash;
    if (needs_annotation) {
        require_file(paths.annotation(), "annotate");
        std::string annot_chash;
        annot = load_annotation(paths.annotation(), &annot_chash);
        require_hash("annotation vs config", chash, annot_chash, opt.force);
        require_hash("annotation vs human data", file_hash(paths.human_data()),
                     annot.dataset_id, opt.force);
        annot_hash = file_hash(paths.annotation());
    }

    const NoiseSchedule schedule = cfg.make_schedule();
    const std::string robot_hash = file_hash(paths.robot_data());
    const std::string human_hash = file_hash(paths.human_data());

    std::vector<TrainJob> jobs;
    for (const std::string& regime : regimes)
        for (int i = 0; i < cfg.policy_train_seeds; ++i) jobs.push_back({regime, i});
    if (cfg.eval_demodiffusion)
        for (int i = 0; i < cfg.policy_train_seeds; ++i) jobs.push_back({"HUMANONLY", i});

    std::vector<std::function<void()>> fns;
    for (const TrainJob& job : jobs) {
        fns.push_back([&, job] {
            PolicyConfig pcfg = policy_config(cfg);
            const bool human_only = job.regime == "HUMANONLY";
            TrainRegime regime =
                human_only ? TrainRegime::NAIVE : regime_from_name(job.regime);
            if (human_only) {
                pcfg.human_sample_frac = 1.0;
                pcfg.seed = derive_seed(cfg, kDomHumanOnlyPolicy,
                                        static_cast<uint64_t>(job.seed_index));
            } else {
                pcfg.seed =
                    derive_seed(cfg, kDomPolicy, static_cast<uint64_t>(job.seed_index));
            }
            note(opt, "training " + job.regime + " policy, seed index " +
                          std::to_string(job.seed_index));
            const PolicyModel model =
                train_policy(regime, robot, human,
                             regime == TrainRegime::XDIFFUSION ? &annot : nullptr, schedule,
                             pcfg);
            json extra{{"config_hash", chash},
                       {"seed_index", job.seed_index},
                       {"role", job.regime},
                       {"inputs", {{"robot_data", robot_hash}, {"human_data", human_hash}}}};
            if (regime == TrainRegime::XDIFFUSION) extra["inputs"]["annotation"] = annot_hash;
            const std::string prefix = human_only
                                           ? paths.human_only_policy_prefix(job.seed_index)
                                           : paths.policy_prefix(job.regime, job.seed_index);
            save_policy(model, prefix, extra.dump());
        });
    }
    run_jobs(fns, std::max(1, opt.jobs));
    note(opt, "policies written under " + paths.policy_dir());
}

EvalReport cmd_eval(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    const ArtifactPaths paths = artifact_paths(cfg, opt);
    require_file(paths.robot_data(), "gen-data");
    fs::create_directories(paths.report_dir());

    const std::string chash = config_hash(cfg);
    const NoiseSchedule schedule = cfg.make_schedule();

    std::vector<std::string> regimes = cfg.regime_list();
    if (!opt.regime.empty()) regimes = {opt.regime};

    EvalReport report;
    report.task = task_kind_name(cfg.task.kind);
    report.config_hash = chash;

    for (const std::string& regime : regimes) {
        RegimeResult merged;
        merged.regime = regime;
        for (int i = 0; i < cfg.policy_train_seeds; ++i) {
            const std::string prefix = paths.policy_prefix(regime, i);
            require_file(prefix + ".bin", "train-policy --regime " + regime);
            std::string sidecar;
            const PolicyModel policy = load_policy(prefix, &sidecar);
            verify_policy_chain(json::parse(sidecar), cfg, paths, opt.force);

            std::vector<uint64_t> env_seeds;
            for (int j = 0; j < cfg.eval_rollouts; ++j)
                env_seeds.push_back(derive_seed(cfg, kDomEval,
                                                static_cast<uint64_t>(i) * 100000 + j));
            if (i == 0 && report.env_seeds.empty()) report.env_seeds = env_seeds;

            const RegimeResult r = evaluate_policy(
                regime,
                [&](uint64_t env_seed) {
                    return policy_as_chunk_policy(policy, schedule, cfg.inference_steps,
                                                  env_seed ^ 0x9E3779B9ULL);
                },
                cfg.task, env_seeds, policy.seed, cfg.action_horizon);
            merged.rollouts.insert(merged.rollouts.end(), r.rollouts.begin(),
                                   r.rollouts.end());
        }
        note(opt, regime + ": success " + std::to_string(merged.success_rate()) +
                      ", infeasible/rollout " + std::to_string(merged.mean_infeasible()));
        report.regimes.push_back(std::move(merged));
    }

    if (cfg.eval_demodiffusion) {
        RegimeResult merged;
        merged.regime = "DEMODIFF";
        for (int i = 0; i < cfg.policy_train_seeds; ++i) {
            const std::string hp = paths.human_only_policy_prefix(i);
            const std::string rp = paths.policy_prefix("ROBOT", i);
            require_file(hp + ".bin", "train-policy");
            require_file(rp + ".bin", "train-policy");
            const PolicyModel human_policy = load_policy(hp);
            const PolicyModel robot_policy = load_policy(rp);
            std::vector<uint64_t> env_seeds;
            for (int j = 0; j < cfg.eval_rollouts; ++j)
                env_seeds.push_back(derive_seed(cfg, kDomEval,
                                                static_cast<uint64_t>(i) * 100000 + j));
            const RegimeResult r = evaluate_policy(
                "DEMODIFF",
                [&](uint64_t env_seed) -> ChunkPolicy {
                    auto counter = std::make_shared<uint64_t>(0);
                    const uint64_t base = env_seed ^ 0x9E3779B9ULL;
                    return [&, base, counter](const Vec& state) -> ActionChunk {
                        SeededRng rng = SeededRng(base).fork((*counter)++);
                        return demodiffusion_sample(human_policy, robot_policy, schedule,
                                                    state, cfg.inference_steps,
                                                    cfg.demodiffusion_split, rng);
                    };
                },
                cfg.task, env_seeds, human_policy.seed, cfg.action_horizon);
            merged.rollouts.insert(merged.rollouts.end(), r.rollouts.begin(),
                                   r.rollouts.end());
        }
        report.regimes.push_back(std::move(merged));
    }

    export_report(report, paths.report_json());
    export_report_csv(report, paths.report_csv());
    note(opt, "report written to " + paths.report_json());
    return report;
}

OverlapCurve cmd_analyze(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    const ArtifactPaths paths = artifact_paths(cfg, opt);
    require_file(paths.robot_data(), "gen-data");
    require_file(paths.human_data(), "gen-data");
    require_file(paths.classifier_prefix() + ".bin", "train-classifier");
    fs::create_directories(paths.analysis_dir());

    const std::string chash = config_hash(cfg);
    std::string robot_chash, human_chash;
    const DemoDataset robot = load_dataset(paths.robot_data(), &robot_chash);
    const DemoDataset human = load_dataset(paths.human_data(), &human_chash);
    require_hash("robot data vs config", chash, robot_chash, opt.force);
    require_hash("human data vs config", chash, human_chash, opt.force);

    std::string sidecar;
    const ClassifierModel model = load_classifier(paths.classifier_prefix(), &sidecar);
    require_hash("classifier vs config", chash, json::parse(sidecar).value("config_hash", ""),
                 opt.force);

    const NoiseSchedule schedule = cfg.make_schedule();
    const std::vector<int> ks = analysis_grid(cfg);

    note(opt, "estimating KL overlap curve over " + std::to_string(ks.size()) + " grid points");
    OverlapCurve curve = kl_curve(human, robot, schedule, ks, cfg.prediction_horizon,
                                  SeededRng(derive_seed(cfg, kDomAnalyze, 0)));

    const DemoDataset merged = merge_datasets(robot, human);
    const ProbabilityCurve pc =
        probability_curve(model, schedule, merged, ks, cfg.n_draws,
                          SeededRng(derive_seed(cfg, kDomAnalyze, 1)), Split::val);
    curve.prob_gap.resize(ks.size());
    curve.se.resize(ks.size());
    for (size_t i = 0; i < ks.size(); ++i) {
        curve.prob_gap[i] = pc.gap(i);
        curve.se[i] = std::sqrt(pc.se_robot[i] * pc.se_robot[i] +
                                pc.se_human[i] * pc.se_human[i]);
    }
    curve.spearman = spearman_correlation(curve.kl, curve.prob_gap);

    export_curve_csv(curve, paths.overlap_csv());
    export_curve(curve, paths.overlap_json(), chash);
    note(opt, "overlap curves written under " + paths.analysis_dir());
    return curve;
}

EvalReport cmd_pipeline(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    cmd_gen_data(cfg, opt);
    cmd_train_classifier(cfg, opt);
    cmd_annotate(cfg, opt);
    cmd_train_policy(cfg, opt);
    const EvalReport report = cmd_eval(cfg, opt);
    cmd_analyze(cfg, opt);
    return report;
}

}  // namespace xdiff
