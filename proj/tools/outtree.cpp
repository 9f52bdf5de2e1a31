// outtree: fit, score, sample and compare latent out-tree density models.

#include "outtree/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using outtree::cli::RunConfig;

const std::map<std::string, std::string>& key_help() {
    static const std::map<std::string, std::string> help{
        {"input", "input CSV or artifact"},
        {"output", "output path (tables go to stdout when omitted)"},
        {"model", "model document"},
        {"train", "training CSV for eval"},
        {"test", "test CSV for eval"},
        {"model-family", "gaussian | tabular | kernel"},
        {"init", "gaussian starting point: walk | iid"},
        {"seed", "random seed (required by stochastic commands)"},
        {"splits", "train,validation,test fractions"},
        {"max-iters", "optimizer iterations or VB rounds"},
        {"grad-tol", "gradient sup-norm tolerance"},
        {"restarts", "EM or label-inference restarts"},
        {"alpha-grid", "comma-separated stickiness values"},
        {"bandwidth-grid", "comma-separated Parzen bandwidths"},
        {"label-column", "label column name"},
        {"missing", "token marking a missing label"},
        {"classes", "label classes (0 infers)"},
        {"alphabet", "comma-separated category counts for tabular data"},
        {"samples", "rows to generate"},
        {"noise", "spiral noise standard deviation"},
        {"turns", "spiral turns"},
        {"folds", "cross-validation folds"},
        {"prior-count", "symmetric Dirichlet pseudo-count"},
        {"tol", "VB relative tolerance"},
        {"seeds", "number of consecutive seeds for semisup-bench"},
        {"fractions", "comma-separated labeled fractions"},
        {"fit-iters", "gradient steps after the walk fit in spiral"},
        {"pca", "project semisup-bench attributes to this many axes"},
        {"edges", "edge list path"},
        {"resume", "VB checkpoint to continue"},
        {"kind", "plot kind: scatter3d | error-vs-labels | elbo-trace"},
    };
    return help;
}

const std::map<std::string, std::string>& command_help() {
    static const std::map<std::string, std::string> help{
        {"fit", "fit a mutation model by maximum tdid likelihood"},
        {"eval", "score test rows given training rows"},
        {"sample", "draw a dataset and its latent out-tree"},
        {"semisup", "infer missing labels"},
        {"vb", "variational Bayes for tabular data"},
        {"gen-spiral", "generate the 3D spiral dataset"},
        {"spiral", "spiral density comparison against Parzen and mixtures"},
        {"semisup-bench", "synthetic semi-supervised comparison"},
        {"plotdata", "emit plot-ready TSV"},
    };
    return help;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent out-tree density estimation"};
    app.require_subcommand(1);
    std::string config_file;
    std::map<std::string, std::optional<std::string>> values;
    for (const auto& key : outtree::cli::config_keys()) values[key];

    for (const auto& name : outtree::cli::subcommands()) {
        auto* sub = app.add_subcommand(name, command_help().at(name));
        sub->add_option("--config", config_file, "flat key = value file; flags override it");
        for (const auto& key : outtree::cli::config_keys()) sub->add_option("--" + key, values[key], key_help().at(key));
    }

    std::string subcommand;
    try {
        app.parse(argc, argv);
        subcommand = app.get_subcommands().front()->get_name();
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << outtree::cli::error_record("", "config", 2, e.what()) << '\n';
        return 2;
    }

    RunConfig config;
    config.subcommand = subcommand;
    try {
        if (!config_file.empty()) config.load_file(config_file);
        for (const auto& [key, value] : values)
            if (value) config.set(key, *value);
    } catch (const outtree::Error& e) {
        std::cerr << outtree::cli::error_record(subcommand, e.kind(), e.exit_code(), e.what()) << '\n';
        return e.exit_code();
    }
    return outtree::cli::run_command(config, std::cout, std::cerr);
}
