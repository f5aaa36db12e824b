#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ooi/envs/dupinput.hpp"
#include "ooi/envs/gathering.hpp"
#include "ooi/envs/treemaze.hpp"
#include "ooi/episode.hpp"
#include "ooi/learner.hpp"

namespace ooi {

enum class EnvKind { TreeMaze, DupInput, Gathering };
enum class AgentKind { Ooi, NoOoi, Expert, ScriptedOracle };

struct ExperimentConfig {
    EnvKind env = EnvKind::Gathering;
    envs::TreeMazeVariant treemaze_variant = envs::TreeMazeVariant::Full14;
    bool treemaze_literal_successors = false;
    envs::DupOptionMode dup_mode = envs::DupOptionMode::Designed;
    int dup_random_options = 16;

    AgentKind agent = AgentKind::Ooi;
    int episodes = 1000;
    int runs = 20;
    double gamma = 0.99;
    LearnerConfig learner; // gamma copied from above when running
    std::uint64_t base_seed = 1;
    int eval_window = 1000;
    int step_limit = kDefaultStepLimit;
    int smoothing_window = 100;
    int workers = 0; // 0: one per hardware thread

    void validate() const {
        if (episodes < 1) throw Error("config: episodes must be >= 1");
        if (runs < 1) throw Error("config: runs must be >= 1");
        if (gamma < 0.0 || gamma > 1.0) throw Error("config: gamma must be in [0,1]");
        if (eval_window < 1) throw Error("config: eval_window must be >= 1");
        if (smoothing_window < 1) throw Error("config: smoothing_window must be >= 1");
        if (step_limit < 1) throw Error("config: step_limit must be >= 1");
    }
};

struct RunRecord {
    std::vector<double> returns;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
    std::string error;
};

// --- config file ----------------------------------------------------------

inline std::string to_string(EnvKind kind) {
    switch (kind) {
    case EnvKind::TreeMaze: return "treemaze";
    case EnvKind::DupInput: return "dupinput";
    case EnvKind::Gathering: return "gathering";
    }
    return "?";
}
inline std::string to_string(AgentKind kind) {
    switch (kind) {
    case AgentKind::Ooi: return "ooi";
    case AgentKind::NoOoi: return "no_ooi";
    case AgentKind::Expert: return "expert";
    case AgentKind::ScriptedOracle: return "scripted_oracle";
    }
    return "?";
}
inline std::string to_string(envs::TreeMazeVariant variant) {
    switch (variant) {
    case envs::TreeMazeVariant::Full14: return "full14";
    case envs::TreeMazeVariant::Known8: return "known8";
    case envs::TreeMazeVariant::Known4: return "known4";
    }
    return "?";
}

inline nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["environment"] = to_string(config.env);
    if (config.env == EnvKind::TreeMaze) {
        j["variant"] = to_string(config.treemaze_variant);
        j["treemaze_literal_successors"] = config.treemaze_literal_successors;
    } else if (config.env == EnvKind::DupInput) {
        j["variant"] = config.dup_mode == envs::DupOptionMode::Designed ? "designed" : "random";
        j["random_options"] = config.dup_random_options;
    }
    j["agent"] = to_string(config.agent);
    j["episodes"] = config.episodes;
    j["runs"] = config.runs;
    j["gamma"] = config.gamma;
    j["hidden"] = config.learner.hidden;
    j["alpha"] = config.learner.alpha;
    j["value_alpha"] = config.learner.value_alpha;
    j["beta1"] = config.learner.beta1;
    j["beta2"] = config.learner.beta2;
    j["epsilon"] = config.learner.epsilon;
    j["entropy_coef"] = config.learner.entropy_coef;
    j["base_seed"] = config.base_seed;
    j["eval_window"] = config.eval_window;
    j["step_limit"] = config.step_limit;
    j["smoothing_window"] = config.smoothing_window;
    j["workers"] = config.workers;
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig config;
    const std::string env = j.at("environment").get<std::string>();
    if (env == "treemaze") config.env = EnvKind::TreeMaze;
    else if (env == "dupinput") config.env = EnvKind::DupInput;
    else if (env == "gathering") config.env = EnvKind::Gathering;
    else throw Error("config: unknown environment " + env);

    if (j.contains("variant")) {
        const std::string v = j["variant"].get<std::string>();
        if (config.env == EnvKind::TreeMaze) {
            if (v == "full14") config.treemaze_variant = envs::TreeMazeVariant::Full14;
            else if (v == "known8") config.treemaze_variant = envs::TreeMazeVariant::Known8;
            else if (v == "known4") config.treemaze_variant = envs::TreeMazeVariant::Known4;
            else throw Error("config: unknown treemaze variant " + v);
        } else if (config.env == EnvKind::DupInput) {
            if (v == "designed") config.dup_mode = envs::DupOptionMode::Designed;
            else if (v == "random") config.dup_mode = envs::DupOptionMode::Random;
            else throw Error("config: unknown dupinput variant " + v);
        }
    }
    const std::string agent = j.at("agent").get<std::string>();
    if (agent == "ooi") config.agent = AgentKind::Ooi;
    else if (agent == "no_ooi") config.agent = AgentKind::NoOoi;
    else if (agent == "expert") config.agent = AgentKind::Expert;
    else if (agent == "scripted_oracle") config.agent = AgentKind::ScriptedOracle;
    else throw Error("config: unknown agent kind " + agent);

    auto opt = [&](const char* key, auto& into) {
        if (j.contains(key)) into = j[key].get<std::decay_t<decltype(into)>>();
    };
    opt("treemaze_literal_successors", config.treemaze_literal_successors);
    opt("random_options", config.dup_random_options);
    opt("episodes", config.episodes);
    opt("runs", config.runs);
    opt("gamma", config.gamma);
    opt("hidden", config.learner.hidden);
    opt("alpha", config.learner.alpha);
    opt("value_alpha", config.learner.value_alpha);
    opt("beta1", config.learner.beta1);
    opt("beta2", config.learner.beta2);
    opt("epsilon", config.learner.epsilon);
    opt("entropy_coef", config.learner.entropy_coef);
    opt("base_seed", config.base_seed);
    opt("eval_window", config.eval_window);
    opt("step_limit", config.step_limit);
    opt("smoothing_window", config.smoothing_window);
    opt("workers", config.workers);
    config.validate();
    return config;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return config_from_json(j);
}

// --- per-run assembly ------------------------------------------------------

inline std::unique_ptr<Env> make_env(const ExperimentConfig& config) {
    switch (config.env) {
    case EnvKind::TreeMaze: return std::make_unique<envs::TreeMazeEnv>();
    case EnvKind::DupInput: return std::make_unique<envs::DupInputEnv>();
    case EnvKind::Gathering: return std::make_unique<envs::GatheringEnv>();
    }
    throw Error("config: bad environment");
}

// Option set for one run. Random initiation sets draw from ooi_rng and are
// resampled per run.
inline std::vector<OptionSpec> make_options(const ExperimentConfig& config, Rng& ooi_rng) {
    std::vector<OptionSpec> options;
    switch (config.env) {
    case EnvKind::TreeMaze:
        options = envs::treemaze_options(config.treemaze_variant,
                                         config.treemaze_literal_successors);
        break;
    case EnvKind::DupInput:
        options = envs::dupinput_options(config.dup_mode, config.dup_random_options,
                                         &ooi_rng);
        break;
    case EnvKind::Gathering:
        options = envs::gathering_options();
        break;
    }
    if (config.agent == AgentKind::NoOoi) options = strip_initiation_sets(options);
    return options;
}

struct RunSetup {
    std::unique_ptr<Env> env;
    std::vector<OptionSpec> options;
    std::unique_ptr<Agent> agent;
    LearnedAgent* learner = nullptr; // non-null when the agent trains
};

inline RunSetup make_run_setup(const ExperimentConfig& config, std::uint64_t run_index) {
    RunSetup setup;
    setup.env = make_env(config);
    Rng ooi_rng = make_stream(config.base_seed, run_index, StreamRole::InitiationSets);

    switch (config.agent) {
    case AgentKind::Ooi:
    case AgentKind::NoOoi: {
        setup.options = make_options(config, ooi_rng);
        Rng init_rng = make_stream(config.base_seed, run_index, StreamRole::NetInit);
        LearnerConfig learner = config.learner;
        learner.gamma = config.gamma;
        auto agent = std::make_unique<LearnedAgent>(
            setup.env->feature_dim(), static_cast<int>(setup.options.size()),
            setup.env->action_count(), learner, init_rng);
        setup.learner = agent.get();
        setup.agent = std::move(agent);
        break;
    }
    case AgentKind::Expert:
        if (config.env != EnvKind::Gathering)
            throw Error("config: the expert agent exists only for gathering");
        setup.options = envs::gathering_options();
        setup.agent = std::make_unique<envs::GatheringExpert>();
        break;
    case AgentKind::ScriptedOracle:
        switch (config.env) {
        case EnvKind::TreeMaze:
            setup.agent = std::make_unique<envs::TreeMazeOracle>();
            break;
        case EnvKind::DupInput:
            setup.agent = std::make_unique<envs::DupInputOracle>();
            break;
        case EnvKind::Gathering:
            setup.options = envs::gathering_options();
            setup.agent = std::make_unique<envs::GatheringExpert>();
            break;
        }
        break;
    }
    return setup;
}

inline RunRecord execute_run(const ExperimentConfig& config, std::uint64_t run_index) {
    RunRecord record;
    record.seed = derive_seed(config.base_seed, run_index, StreamRole::Env);
    const auto started = std::chrono::steady_clock::now();
    try {
        RunSetup setup = make_run_setup(config, run_index);
        Rng env_rng = make_stream(config.base_seed, run_index, StreamRole::Env);
        Rng sample_rng = make_stream(config.base_seed, run_index, StreamRole::Sampling);
        record.returns.reserve(config.episodes);
        for (int episode = 0; episode < config.episodes; ++episode) {
            Trajectory traj = run_episode(*setup.env, *setup.agent, setup.options, env_rng,
                                          sample_rng, config.step_limit);
            record.returns.push_back(traj.total_reward);
            if (setup.learner) setup.learner->update(traj);
        }
    } catch (const std::exception& e) {
        record.error = e.what();
    }
    record.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return record;
}

// Runs are embarrassingly parallel; records land in slots indexed by run,
// so the result is independent of scheduling.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::vector<RunRecord> records(config.runs);
    int workers = config.workers > 0
                      ? config.workers
                      : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, config.runs));
    if (workers == 1) {
        for (int r = 0; r < config.runs; ++r) records[r] = execute_run(config, r);
        return records;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int r = next.fetch_add(1); r < config.runs; r = next.fetch_add(1))
                records[r] = execute_run(config, r);
        });
    }
    for (std::thread& t : pool) t.join();
    return records;
}

// --- aggregation & csv ------------------------------------------------------

struct CurvePoint {
    int episode = 0;
    double mean = 0.0;
    double std_dev = 0.0;
};
using Curve = std::vector<CurvePoint>;

// Element-wise mean and population standard deviation across runs, then an
// optional trailing moving average over the aggregated columns.
inline Curve aggregate(const std::vector<RunRecord>& records, int smoothing_window = 1) {
    std::vector<const RunRecord*> complete;
    for (const RunRecord& r : records)
        if (r.error.empty()) complete.push_back(&r);
    if (complete.empty()) throw Error("aggregate: no successful runs");
    const std::size_t episodes = complete.front()->returns.size();
    for (const RunRecord* r : complete)
        if (r->returns.size() != episodes)
            throw Error("aggregate: runs have different episode counts");

    Curve curve(episodes);
    const double n = static_cast<double>(complete.size());
    for (std::size_t e = 0; e < episodes; ++e) {
        double mean = 0.0;
        for (const RunRecord* r : complete) mean += r->returns[e];
        mean /= n;
        double var = 0.0;
        for (const RunRecord* r : complete) {
            const double d = r->returns[e] - mean;
            var += d * d;
        }
        curve[e] = {static_cast<int>(e), mean, std::sqrt(var / n)};
    }
    if (smoothing_window > 1) {
        Curve smoothed = curve;
        double mean_acc = 0.0, std_acc = 0.0;
        for (std::size_t e = 0; e < episodes; ++e) {
            mean_acc += curve[e].mean;
            std_acc += curve[e].std_dev;
            if (e >= static_cast<std::size_t>(smoothing_window)) {
                mean_acc -= curve[e - smoothing_window].mean;
                std_acc -= curve[e - smoothing_window].std_dev;
            }
            const double width =
                static_cast<double>(std::min<std::size_t>(e + 1, smoothing_window));
            smoothed[e].mean = mean_acc / width;
            smoothed[e].std_dev = std_acc / width;
        }
        curve = std::move(smoothed);
    }
    return curve;
}

inline std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline void emit_csv(const Curve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "episode,mean,std\n";
    for (const CurvePoint& p : curve)
        out << p.episode << ',' << format_double(p.mean) << ',' << format_double(p.std_dev)
            << '\n';
    if (!out) throw Error("failed while writing " + path);
}

inline Curve read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "episode,mean,std")
        throw Error("csv: bad header in " + path);
    Curve curve;
    while (std::getline(in, line)) {
        CurvePoint p;
        const char* begin = line.data();
        const char* end = line.data() + line.size();
        auto r1 = std::from_chars(begin, end, p.episode);
        auto r2 = std::from_chars(r1.ptr + 1, end, p.mean);
        std::from_chars(r2.ptr + 1, end, p.std_dev);
        curve.push_back(p);
    }
    return curve;
}

// Trailing mean of the last `window` returns ending at index `at`.
inline double trailing_mean(const std::vector<double>& returns, int window, int at) {
    const int hi = at + 1;
    const int lo = std::max(0, hi - window);
    double sum = 0.0;
    for (int i = lo; i < hi; ++i) sum += returns[i];
    return sum / static_cast<double>(hi - lo);
}

// Largest full-window trailing mean anywhere in the run (the "reaches X
// within budget" statistic). Windows shorter than `window` only occur when
// the run itself is shorter.
inline double best_trailing_mean(const std::vector<double>& returns, int window) {
    const int n = static_cast<int>(returns.size());
    if (n == 0) return 0.0;
    if (n <= window) return trailing_mean(returns, window, n - 1);
    double sum = 0.0;
    for (int i = 0; i < window; ++i) sum += returns[i];
    double best = sum / window;
    for (int i = window; i < n; ++i) {
        sum += returns[i] - returns[i - window];
        best = std::max(best, sum / window);
    }
    return best;
}

inline double final_trailing_mean(const std::vector<double>& returns, int window) {
    if (returns.empty()) return 0.0;
    return trailing_mean(returns, window, static_cast<int>(returns.size()) - 1);
}

} // namespace ooi
