#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ooi/ooi.hpp"

namespace {

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::int64_t seed, int runs, int episodes, int workers,
              const std::string& checkpoint_dir) {
    ooi::ExperimentConfig config = ooi::load_config(config_path);
    if (seed >= 0) config.base_seed = static_cast<std::uint64_t>(seed);
    if (runs > 0) config.runs = runs;
    if (episodes > 0) config.episodes = episodes;
    if (workers > 0) config.workers = workers;
    config.validate();

    std::filesystem::create_directories(out_dir);
    const auto records = ooi::run_experiment(config);

    int failed = 0;
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (records[r].error.empty()) continue;
        ++failed;
        std::cerr << "run " << r << " failed: " << records[r].error << "\n";
    }
    const ooi::Curve curve = ooi::aggregate(records, config.smoothing_window);
    const std::string csv_path = out_dir + "/curve.csv";
    ooi::emit_csv(curve, csv_path);
    {
        std::ofstream meta(out_dir + "/config.json");
        meta << ooi::config_to_json(config).dump(2) << "\n";
    }
    if (!checkpoint_dir.empty() &&
        (config.agent == ooi::AgentKind::Ooi || config.agent == ooi::AgentKind::NoOoi)) {
        // Checkpoints are written from a fresh deterministic replay of run 0.
        std::filesystem::create_directories(checkpoint_dir);
        ooi::RunSetup setup = ooi::make_run_setup(config, 0);
        ooi::Rng env_rng = ooi::make_stream(config.base_seed, 0, ooi::StreamRole::Env);
        ooi::Rng sample_rng =
            ooi::make_stream(config.base_seed, 0, ooi::StreamRole::Sampling);
        for (int e = 0; e < config.episodes; ++e) {
            ooi::Trajectory traj = ooi::run_episode(*setup.env, *setup.agent, setup.options,
                                                    env_rng, sample_rng, config.step_limit);
            setup.learner->update(traj);
        }
        ooi::save_checkpoint(setup.learner->policy(), setup.learner->value(),
                             checkpoint_dir + "/run0.json");
    }

    double final_window = 0.0;
    if (!records.empty() && records[0].error.empty())
        final_window = ooi::final_trailing_mean(records[0].returns, config.eval_window);
    std::cout << "wrote " << csv_path << " (" << curve.size() << " episodes, "
              << records.size() - failed << "/" << records.size() << " runs)\n";
    std::cout << "run 0 trailing-" << config.eval_window << " mean: " << final_window
              << "\n";
    return failed == 0 ? 0 : 1;
}

int cmd_verify_fsc(const std::string& fsc_path, bool use_alternator,
                   const std::string& write_alternator, int horizon, long max_enumeration,
                   int samples, double tol, std::uint64_t seed) {
    if (!write_alternator.empty()) {
        ooi::save_fsc(ooi::make_alternator(), write_alternator);
        std::cout << "wrote " << write_alternator << "\n";
        if (fsc_path.empty() && !use_alternator) return 0;
    }
    ooi::Fsc fsc;
    if (use_alternator) fsc = ooi::make_alternator();
    else if (!fsc_path.empty()) fsc = ooi::load_fsc(fsc_path);
    else {
        std::cerr << "verify-fsc needs --fsc <file> or --alternator\n";
        return 2;
    }
    fsc.validate();
    const ooi::CompiledController cc = ooi::compile_fsc(fsc);
    ooi::Rng rng(seed);
    const ooi::TraceComparison cmp =
        ooi::compare_fsc_with_compilation(fsc, cc, horizon, max_enumeration, &rng, samples);
    std::cout << "controller: " << fsc.node_count << " nodes, " << fsc.observation_count
              << " observations, " << fsc.action_count << " actions\n";
    std::cout << "compiled options: " << cc.options.size() << "\n";
    std::cout << (cmp.exhaustive ? "exhaustive" : "sampled") << " comparison over "
              << cmp.sequences_checked << " sequences (horizon " << horizon << ")\n";
    std::cout << "max action-distribution deviation: " << cmp.max_abs_deviation << "\n";
    const bool ok = cmp.max_abs_deviation <= tol;
    std::cout << (ok ? "EQUIVALENT" : "NOT EQUIVALENT") << " (tolerance " << tol << ")\n";
    return ok ? 0 : 1;
}

int cmd_oracle(const std::string& env_name, const std::string& variant, int episodes,
               std::uint64_t seed) {
    ooi::ExperimentConfig config;
    if (env_name == "treemaze") config.env = ooi::EnvKind::TreeMaze;
    else if (env_name == "dupinput") config.env = ooi::EnvKind::DupInput;
    else if (env_name == "gathering") config.env = ooi::EnvKind::Gathering;
    else {
        std::cerr << "unknown environment " << env_name << "\n";
        return 2;
    }
    if (!variant.empty()) {
        nlohmann::json j = ooi::config_to_json(config);
        j["variant"] = variant;
        j["agent"] = "scripted_oracle";
        config = ooi::config_from_json(j);
    }
    config.agent = config.env == ooi::EnvKind::Gathering ? ooi::AgentKind::Expert
                                                         : ooi::AgentKind::ScriptedOracle;
    config.episodes = episodes;
    config.runs = 1;
    config.base_seed = seed;
    const auto records = ooi::run_experiment(config);
    if (!records[0].error.empty()) {
        std::cerr << "oracle run failed: " << records[0].error << "\n";
        return 1;
    }
    double total = 0.0, total_sq = 0.0;
    for (double r : records[0].returns) {
        total += r;
        total_sq += r * r;
    }
    const double n = static_cast<double>(records[0].returns.size());
    const double mean = total / n;
    std::cout << "episodes: " << episodes << "\n";
    std::cout << "mean return: " << mean << "\n";
    std::cout << "std: " << std::sqrt(std::max(0.0, total_sq / n - mean * mean)) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"options with predecessor-conditioned initiation sets"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "run a configured experiment");
    std::string config_path, out_dir = "out", checkpoint_dir;
    std::int64_t seed = -1;
    int runs = 0, episodes = 0, workers = 0;
    train->add_option("--config", config_path, "experiment config file (json)")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--seed", seed, "override the base seed");
    train->add_option("--runs", runs, "override the run count");
    train->add_option("--episodes", episodes, "override the episode count");
    train->add_option("--workers", workers, "parallel run workers");
    train->add_option("--checkpoint-dir", checkpoint_dir,
                      "also save run 0's final networks here");

    auto* verify = app.add_subcommand("verify-fsc",
                                      "compile a controller fixture and check equivalence");
    std::string fsc_path, write_alternator;
    bool use_alternator = false;
    int horizon = 10, samples = 200;
    long max_enumeration = 100000;
    double tol = 1e-9;
    std::uint64_t verify_seed = 1;
    verify->add_option("--fsc", fsc_path, "controller fixture file")->check(CLI::ExistingFile);
    verify->add_flag("--alternator", use_alternator, "verify the built-in alternator");
    verify->add_option("--write-alternator", write_alternator,
                       "write the alternator fixture to this path");
    verify->add_option("--horizon", horizon, "observation sequence length");
    verify->add_option("--max-enumeration", max_enumeration,
                       "exhaustive sequence budget before sampling");
    verify->add_option("--samples", samples, "sampled sequences beyond the budget");
    verify->add_option("--tol", tol, "equivalence tolerance");
    verify->add_option("--seed", verify_seed, "seed for sampled sequences");

    auto* oracle = app.add_subcommand("oracle", "run the scripted reference policy");
    std::string env_name, variant;
    int oracle_episodes = 1000;
    std::uint64_t oracle_seed = 1;
    oracle->add_option("--env", env_name, "treemaze | dupinput | gathering")->required();
    oracle->add_option("--variant", variant, "environment variant");
    oracle->add_option("--episodes", oracle_episodes, "episode count");
    oracle->add_option("--seed", oracle_seed, "base seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(config_path, out_dir, seed, runs, episodes, workers,
                             checkpoint_dir);
        if (verify->parsed())
            return cmd_verify_fsc(fsc_path, use_alternator, write_alternator, horizon,
                                  max_enumeration, samples, tol, verify_seed);
        if (oracle->parsed())
            return cmd_oracle(env_name, variant, oracle_episodes, oracle_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
