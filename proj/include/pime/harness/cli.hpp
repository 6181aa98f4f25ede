#pragma once

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pime/harness/evaluate.hpp"
#include "pime/harness/train.hpp"
#include "pime/nn/serialize.hpp"

namespace pime::harness {

/// Entry point behind the `pime` binary. Exit codes: 0 success, 1 usage or
/// configuration error, 2 numeric or simulation fault.
inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"PIME toolkit: prior-aided, integrator-extended, model-ensemble PPO "
                 "for set-point control"};
    app.require_subcommand(1);

    std::string config_path, weights_path, out_override;
    long seed_override = -1;
    int n_models = 50;
    bool prior_only = false;
    std::string plant = "tanks";
    std::vector<std::string> report_paths, labels;
    std::string compare_out;

    auto* train_cmd = app.add_subcommand("train", "Train a policy from a config file");
    train_cmd->add_option("--config", config_path, "configuration file")->required();
    train_cmd->add_option("--seed", seed_override, "override the config seed");
    train_cmd->add_option("--out", out_override, "override the output directory");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy (or the prior) on ensemble draws");
    eval_cmd->add_option("--config", config_path, "configuration file")->required();
    eval_cmd->add_option("--weights", weights_path, "policy weight file");
    eval_cmd->add_flag("--prior-only", prior_only, "evaluate the prior controller alone");
    eval_cmd->add_option("--models", n_models, "number of ensemble draws")
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--out", out_override, "override the output directory");
    eval_cmd->add_option("--seed", seed_override, "override the config seed");

    auto* cmp_cmd = app.add_subcommand("compare", "Align several eval reports into one table");
    cmp_cmd->add_option("--reports", report_paths, "report CSV files")->required()->expected(-1);
    cmp_cmd->add_option("--labels", labels, "labels, parallel to --reports (default: file stem)");
    cmp_cmd->add_option("--out", compare_out, "output CSV file")->required();

    auto* export_cmd = app.add_subcommand("export-config", "Print the default configuration");
    export_cmd->add_option("--plant", plant, "tanks or ph")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(train_cmd)) {
            ExperimentConfig cfg = load_config(config_path);
            if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
            if (!out_override.empty()) cfg.out_dir = out_override;
            const TrainResult res = train(cfg);
            std::cout << "trained " << res.diagnostics.size() << " iterations; outputs in "
                      << cfg.out_dir << "\n";
            return 0;
        }
        if (app.got_subcommand(eval_cmd)) {
            ExperimentConfig cfg = load_config(config_path);
            if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
            if (!out_override.empty()) cfg.out_dir = out_override;
            if (prior_only == !weights_path.empty())
                throw ConfigError("eval: pass exactly one of --weights or --prior-only");

            nn::GaussianPolicy policy = build_policy(cfg);
            Agent agent;
            agent.prior = cfg.prior;
            agent.use_prior = !cfg.disable_prior;
            if (!prior_only) {
                nn::load_policy(policy, weights_path);
                agent.policy = &policy;
            }
            const EvalReport report = evaluate(agent, cfg, n_models, cfg.setpoints, cfg.out_dir);
            save_report(report, cfg.out_dir + "/report.csv");
            const Aggregate ret = aggregate(report.episode_returns);
            std::cout << "evaluated " << n_models << " models: mean return " << fmt9(ret.mean)
                      << " +- " << fmt9(ret.stddev) << "; report in " << cfg.out_dir << "\n";
            return 0;
        }
        if (app.got_subcommand(cmp_cmd)) {
            if (!labels.empty() && labels.size() != report_paths.size())
                throw ConfigError("compare: --labels must match --reports");
            std::vector<std::pair<std::string, EvalReport>> reports;
            for (std::size_t i = 0; i < report_paths.size(); ++i) {
                std::string label;
                if (!labels.empty()) {
                    label = labels[i];
                } else {
                    std::filesystem::path p(report_paths[i]);
                    label = p.stem().string();
                }
                reports.emplace_back(label, load_report(report_paths[i]));
            }
            std::ofstream os = open_csv(compare_out);
            compare(reports, os);
            if (!os) throw IoError("failed writing " + compare_out);
            std::cout << "wrote " << compare_out << "\n";
            return 0;
        }
        if (app.got_subcommand(export_cmd)) {
            envsim::PlantKind kind;
            if (plant == "tanks") kind = envsim::PlantKind::CascadedTanks;
            else if (plant == "ph") kind = envsim::PlantKind::PhNeutralization;
            else throw ConfigError("export-config: plant must be 'tanks' or 'ph'");
            write_config(default_config(kind), std::cout);
            return 0;
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric fault: " << e.what() << "\n";
        return 2;
    } catch (const SimulationFault& e) {
        std::cerr << "simulation fault: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace pime::harness
