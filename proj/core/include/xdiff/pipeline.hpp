#pragma once

#include <string>

#include "xdiff/config.hpp"
#include "xdiff/evaluate.hpp"
#include "xdiff/policy.hpp"

namespace xdiff {

struct PipelineOptions {
    std::string out_override;  // replaces cfg.out_dir when nonempty
    std::string regime;        // restrict train-policy/eval to one regime
    int jobs = 1;              // fan out independent training units
    bool force = false;        // skip hash-chain verification
    bool quiet = false;
};

/// Artifact layout under the experiment output directory.
struct ArtifactPaths {
    std::string root;

    std::string data_dir() const { return root + "/data"; }
    std::string robot_data() const { return root + "/data/robot.jsonl"; }
    std::string human_data() const { return root + "/data/human.jsonl"; }
    std::string classifier_dir() const { return root + "/classifier"; }
    std::string classifier_prefix() const { return root + "/classifier/classifier"; }
    std::string classifier_curve_csv() const { return root + "/classifier/prob_curve.csv"; }
    std::string annotation_dir() const { return root + "/annotation"; }
    std::string annotation() const { return root + "/annotation/kstar.jsonl"; }
    std::string policy_dir() const { return root + "/policies"; }
    std::string policy_prefix(const std::string& regime, int seed_index) const {
        return root + "/policies/" + regime + "_s" + std::to_string(seed_index);
    }
    std::string human_only_policy_prefix(int seed_index) const {
        return root + "/policies/HUMANONLY_s" + std::to_string(seed_index);
    }
    std::string report_dir() const { return root + "/reports"; }
    std::string report_json() const { return root + "/reports/eval.json"; }
    std::string report_csv() const { return root + "/reports/eval.csv"; }
    std::string analysis_dir() const { return root + "/analysis"; }
    std::string overlap_csv() const { return root + "/analysis/overlap.csv"; }
    std::string overlap_json() const { return root + "/analysis/overlap.json"; }
};

ArtifactPaths artifact_paths(const ExperimentConfig& cfg, const PipelineOptions& opt);

/// Deterministic sub-seeds derived from the master seed.
uint64_t derive_seed(const ExperimentConfig& cfg, uint64_t domain, uint64_t index);

void cmd_gen_data(const ExperimentConfig& cfg, const PipelineOptions& opt);
void cmd_train_classifier(const ExperimentConfig& cfg, const PipelineOptions& opt);
void cmd_annotate(const ExperimentConfig& cfg, const PipelineOptions& opt);
void cmd_train_policy(const ExperimentConfig& cfg, const PipelineOptions& opt);
EvalReport cmd_eval(const ExperimentConfig& cfg, const PipelineOptions& opt);
OverlapCurve cmd_analyze(const ExperimentConfig& cfg, const PipelineOptions& opt);

/// Full dependency-ordered run: gen-data, train-classifier, annotate,
/// train-policy (all regimes x seeds), eval, analyze.
EvalReport cmd_pipeline(const ExperimentConfig& cfg, const PipelineOptions& opt);

}  // namespace xdiff
