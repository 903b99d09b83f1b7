// medlink: entity-disambiguation pipeline driver. One subcommand per
// stage; a single JSON config with --set overrides; exit codes 0 ok,
// 2 config error, 3 missing input, 4 data error.

#include <medlink/medlink.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <deque>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    long long jobs = -1; // -1: leave config value alone
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path,
                    "Config file (JSON); defaults to $MEDLINK_CONFIG when unset");
    cmd->add_option("-s,--set", args.overrides,
                    "Override one config key, e.g. --set params.k=5 (repeatable)");
    cmd->add_option("-j,--jobs", args.jobs, "Worker threads (0 = logical cores)");
}

medlink::PipelineConfig make_config(const CommonArgs& args) {
    medlink::PipelineConfig config = medlink::load_config(args.config_path, args.overrides);
    if (args.jobs >= 0) config.jobs = static_cast<std::size_t>(args.jobs);
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"biomedical entity disambiguation pipeline"};
    app.require_subcommand(1);

    struct StageCmd {
        const char* name;
        const char* help;
    };
    const StageCmd stages[] = {
        {"kb-augment", "Augment the KB with cross-KB types and descriptions"},
        {"preprocess", "Convert raw annotated documents into grouped corpora"},
        {"downsample", "Thin frequent-entity groups from the pretraining corpus"},
        {"stats", "Report KB, mapping, and corpus statistics"},
        {"index", "Build the entity vector index"},
        {"link", "Retrieve, rerank, and post-process test mentions"},
        {"evaluate", "Score predictions and emit the slice report"},
    };

    // deque: CLI11 keeps pointers into the stored CommonArgs, so elements
    // must never move.
    std::deque<std::pair<CLI::App*, CommonArgs>> stage_args;
    for (const auto& s : stages) {
        CLI::App* cmd = app.add_subcommand(s.name, s.help);
        stage_args.emplace_back(cmd, CommonArgs{});
        add_common(cmd, stage_args.back().second);
    }

    CLI::App* sweep = app.add_subcommand(
        "sweep-threshold", "Evaluate backoff thresholds over a grid on the dev split");
    stage_args.emplace_back(sweep, CommonArgs{});
    add_common(sweep, stage_args.back().second);
    std::vector<double> grid;
    sweep->add_option("--grid", grid, "Threshold grid points (repeat or comma-separate)")
        ->required()
        ->delimiter(',');

    CLI::App* dump = app.add_subcommand("config-dump", "Print the effective config as JSON");
    stage_args.emplace_back(dump, CommonArgs{});
    add_common(dump, stage_args.back().second);

    CLI11_PARSE(app, argc, argv);

    try {
        for (std::size_t i = 0; i < std::size(stages); ++i) {
            if (stage_args[i].first->parsed()) {
                std::cout << medlink::run_stage(stages[i].name, make_config(stage_args[i].second))
                          << "\n";
                return medlink::kExitOk;
            }
        }
        if (sweep->parsed()) {
            const CommonArgs& args = stage_args[std::size(stages)].second;
            std::cout << medlink::run_sweep_threshold(make_config(args), grid) << "\n";
            return medlink::kExitOk;
        }
        if (dump->parsed()) {
            const CommonArgs& args = stage_args[std::size(stages) + 1].second;
            std::cout << medlink::config_to_json(make_config(args)).dump(2) << "\n";
            return medlink::kExitOk;
        }
    } catch (const medlink::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return medlink::kExitConfigError;
    } catch (const medlink::MissingInputError& e) {
        std::cerr << "missing input: " << e.what() << "\n";
        return medlink::kExitMissingInput;
    } catch (const medlink::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return medlink::kExitDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return medlink::kExitOk;
}
