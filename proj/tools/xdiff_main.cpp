// xdiff: selective human/robot co-training lab for diffusion policies.
//
// Subcommands mirror the pipeline stages; `pipeline` runs them all in
// dependency order. Every stage reads one config file and writes artifacts
// (with config-hash chaining) under the output directory.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "xdiff/errors.hpp"
#include "xdiff/pipeline.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    xdiff::PipelineOptions opt;
};

int run(const std::string& cmd, const CliArgs& args) {
    const xdiff::ExperimentConfig cfg = xdiff::load_config(args.config_path);
    if (cmd == "gen-data") xdiff::cmd_gen_data(cfg, args.opt);
    else if (cmd == "train-classifier") xdiff::cmd_train_classifier(cfg, args.opt);
    else if (cmd == "annotate") xdiff::cmd_annotate(cfg, args.opt);
    else if (cmd == "train-policy") xdiff::cmd_train_policy(cfg, args.opt);
    else if (cmd == "eval") xdiff::cmd_eval(cfg, args.opt);
    else if (cmd == "analyze") xdiff::cmd_analyze(cfg, args.opt);
    else if (cmd == "pipeline") xdiff::cmd_pipeline(cfg, args.opt);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xdiff: selective cross-embodiment co-training for diffusion policies"};
    app.require_subcommand(1);

    CliArgs args;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "experiment config file")->required();
        sub->add_option("--out", args.opt.out_override, "override the output directory");
        sub->add_option("--jobs", args.opt.jobs, "parallel workers for independent units")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--force", args.opt.force, "skip hash-chain verification");
        sub->add_flag("--quiet", args.opt.quiet, "suppress progress output");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate robot/human demonstration datasets");
    CLI::App* clf = app.add_subcommand("train-classifier", "train the embodiment classifier");
    CLI::App* ann = app.add_subcommand("annotate", "annotate human chunks with k*");
    CLI::App* pol = app.add_subcommand("train-policy", "train policies under the data regimes");
    CLI::App* evl = app.add_subcommand("eval", "closed-loop evaluation of trained policies");
    CLI::App* anl = app.add_subcommand("analyze", "KL and probability-gap overlap curves");
    CLI::App* pip = app.add_subcommand("pipeline", "run every stage in dependency order");
    for (CLI::App* sub : {gen, clf, ann, pol, evl, anl, pip}) add_common(sub);
    pol->add_option("--regime", args.opt.regime, "train only this regime");
    evl->add_option("--regime", args.opt.regime, "evaluate only this regime");

    CLI11_PARSE(app, argc, argv);

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        return run(cmd, args);
    } catch (const xdiff::ConfigError& e) {
        std::cerr << "error[config]: " << e.what() << std::endl;
        return 2;
    } catch (const xdiff::DependencyError& e) {
        std::cerr << "error[dependency]: " << e.what() << std::endl;
        return 3;
    } catch (const xdiff::IoError& e) {
        std::cerr << "error[io]: " << e.what() << std::endl;
        return 4;
    } catch (const xdiff::DivergenceError& e) {
        std::cerr << "error[divergence]: " << e.what() << std::endl;
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << std::endl;
        return 1;
    }
}
