#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ooi/core.hpp"

namespace ooi {

// Stochastic finite state controller: psi maps nodes to action
// distributions, eta maps (node, observation) to next-node distributions,
// eta0 maps the first observation to the initial node.
struct Fsc {
    int node_count = 0;
    int observation_count = 0;
    int action_count = 0;
    std::vector<std::vector<double>> psi;               // [node][action]
    std::vector<std::vector<std::vector<double>>> eta;  // [node][obs][next]
    std::vector<std::vector<double>> eta0;              // [obs][node]

    void validate(double tol = 1e-9) const {
        auto check_row = [&](const std::vector<double>& row, std::size_t want,
                             const char* what) {
            if (row.size() != want) throw Error(std::string(what) + ": bad row length");
            double sum = 0.0;
            for (double p : row) {
                if (p < 0.0) throw Error(std::string(what) + ": negative probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > tol)
                throw Error(std::string(what) + ": row does not sum to 1");
        };
        if (node_count < 1) throw Error("fsc: node_count must be >= 1");
        if (psi.size() != static_cast<std::size_t>(node_count) ||
            eta.size() != static_cast<std::size_t>(node_count) ||
            eta0.size() != static_cast<std::size_t>(observation_count))
            throw Error("fsc: table dimensions do not match node/observation counts");
        for (const auto& row : psi) check_row(row, action_count, "psi");
        for (const auto& per_node : eta) {
            if (per_node.size() != static_cast<std::size_t>(observation_count))
                throw Error("eta: bad observation dimension");
            for (const auto& row : per_node) check_row(row, node_count, "eta");
        }
        for (const auto& row : eta0) check_row(row, node_count, "eta0");
    }

    void require_observation(int obs) const {
        if (obs < 0 || obs >= observation_count) throw UnknownObservation(obs);
    }
};

constexpr int kNoNode = -1;

// One controller transition: sample the next node (eta0 on the very first
// step, where node == kNoNode), then the action from the new node.
inline std::pair<int, int> fsc_step(const Fsc& fsc, int node, int obs, Rng& rng) {
    fsc.require_observation(obs);
    const std::vector<double>& node_dist =
        node == kNoNode ? fsc.eta0[obs] : fsc.eta[node][obs];
    const int next = sample_index(node_dist, rng);
    const int action = sample_index(fsc.psi[next], rng);
    return {next, action};
}

// Controller reduced to options. One option per node for the first
// transition and one per ordered node pair afterwards; every option emits
// a single action (termination is constantly 1) drawn from the
// destination node's action distribution. mu[obs][option] carries the
// top-level selection weights; restricted to any available set it is a
// probability distribution.
struct CompiledController {
    int node_count = 0;
    int observation_count = 0;
    int action_count = 0;
    std::vector<OptionSpec> options;
    std::vector<std::vector<double>> mu; // [obs][option]

    OptionId start_option(int node) const { return node; }
    OptionId pair_option(int from, int to) const {
        return node_count + from * node_count + to;
    }
    int destination_node(OptionId id) const {
        return id < node_count ? id : (id - node_count) % node_count;
    }
};

inline Observation tabular_observation(int symbol) {
    Observation obs;
    obs.raw = {symbol};
    return obs;
}

inline CompiledController compile_fsc(const Fsc& fsc) {
    fsc.validate();
    CompiledController cc;
    cc.node_count = fsc.node_count;
    cc.observation_count = fsc.observation_count;
    cc.action_count = fsc.action_count;
    const int n = fsc.node_count;
    const int option_count = n * n + n;
    cc.options.reserve(option_count);

    auto emit_policy = [&](int dest) {
        return std::make_shared<FixedPolicy>(
            [row = fsc.psi[dest]](const Observation&) { return row; });
    };
    for (int dest = 0; dest < n; ++dest) {
        OptionSpec spec;
        spec.id = cc.start_option(dest);
        spec.name = "<start," + std::to_string(dest) + ">";
        spec.policy = emit_policy(dest);
        spec.termination = FixedTermination::always();
        spec.initiation.predecessors.assign(option_count, false);
        spec.initiation.allows_none = true;
        cc.options.push_back(std::move(spec));
    }
    for (int from = 0; from < n; ++from) {
        for (int dest = 0; dest < n; ++dest) {
            OptionSpec spec;
            spec.id = cc.pair_option(from, dest);
            spec.name = "<" + std::to_string(from) + "," + std::to_string(dest) + ">";
            spec.policy = emit_policy(dest);
            spec.termination = FixedTermination::always();
            // Startable after any option whose destination node is `from`.
            spec.initiation.predecessors.assign(option_count, false);
            spec.initiation.allows_none = false;
            spec.initiation.predecessors[cc.start_option(from)] = true;
            for (int m = 0; m < n; ++m)
                spec.initiation.predecessors[cc.pair_option(m, from)] = true;
            cc.options.push_back(std::move(spec));
        }
    }

    cc.mu.assign(fsc.observation_count, std::vector<double>(option_count, 0.0));
    for (int x = 0; x < fsc.observation_count; ++x) {
        for (int dest = 0; dest < n; ++dest)
            cc.mu[x][cc.start_option(dest)] = fsc.eta0[x][dest];
        for (int from = 0; from < n; ++from)
            for (int dest = 0; dest < n; ++dest)
                cc.mu[x][cc.pair_option(from, dest)] = fsc.eta[from][x][dest];
    }
    return cc;
}

constexpr long kDefaultStateBound = 1000000;

// Exact per-step action distributions of the controller on a fixed
// observation sequence, by forward propagation of the node belief.
inline std::vector<std::vector<double>> action_distribution_trace(
    const Fsc& fsc, const std::vector<int>& obs_sequence,
    long state_bound = kDefaultStateBound) {
    if (fsc.node_count > state_bound)
        throw Error("state explosion: node support exceeds the configured bound");
    std::vector<std::vector<double>> trace;
    trace.reserve(obs_sequence.size());
    std::vector<double> belief; // over nodes; empty before the first step
    for (int obs : obs_sequence) {
        fsc.require_observation(obs);
        std::vector<double> next(fsc.node_count, 0.0);
        if (belief.empty()) {
            next = fsc.eta0[obs];
        } else {
            for (int n = 0; n < fsc.node_count; ++n) {
                if (belief[n] == 0.0) continue;
                for (int m = 0; m < fsc.node_count; ++m)
                    next[m] += belief[n] * fsc.eta[n][obs][m];
            }
        }
        std::vector<double> actions(fsc.action_count, 0.0);
        for (int m = 0; m < fsc.node_count; ++m) {
            if (next[m] == 0.0) continue;
            for (int a = 0; a < fsc.action_count; ++a)
                actions[a] += next[m] * fsc.psi[m][a];
        }
        belief = std::move(next);
        trace.push_back(std::move(actions));
    }
    return trace;
}

// Same trace for the compiled side. The hidden state is the identity of
// the previously executed option (every option lasts one step); selection
// weights come from mu restricted to the options whose initiation sets
// admit the previous one.
inline std::vector<std::vector<double>> action_distribution_trace(
    const CompiledController& cc, const std::vector<int>& obs_sequence,
    long state_bound = kDefaultStateBound) {
    const int option_count = static_cast<int>(cc.options.size());
    if (option_count + 1 > state_bound)
        throw Error("state explosion: option support exceeds the configured bound");
    std::vector<std::vector<double>> trace;
    trace.reserve(obs_sequence.size());
    // Index option_count stands for the empty predecessor.
    std::vector<double> prev_belief(option_count + 1, 0.0);
    prev_belief[option_count] = 1.0;
    for (int obs_symbol : obs_sequence) {
        if (obs_symbol < 0 || obs_symbol >= cc.observation_count)
            throw UnknownObservation(obs_symbol);
        const Observation obs = tabular_observation(obs_symbol);
        std::vector<double> next_belief(option_count + 1, 0.0);
        std::vector<double> actions(cc.action_count, 0.0);
        for (int p = 0; p <= option_count; ++p) {
            if (prev_belief[p] == 0.0) continue;
            const OptionId prev = p == option_count ? kNoOption : p;
            for (const OptionSpec& spec : cc.options) {
                if (!spec.initiation.contains(obs, prev)) continue;
                const double w = prev_belief[p] * cc.mu[obs_symbol][spec.id];
                if (w == 0.0) continue;
                next_belief[spec.id] += w;
                const std::vector<double> dist = spec.policy->action_distribution(obs);
                for (int a = 0; a < cc.action_count; ++a) actions[a] += w * dist[a];
            }
        }
        prev_belief = std::move(next_belief);
        trace.push_back(std::move(actions));
    }
    return trace;
}

// The two-node controller that alternates two actions forever under a
// single uninformative observation. Smallest controller that no option
// set with unrestricted initiation sets can reproduce.
inline Fsc make_alternator() {
    Fsc fsc;
    fsc.node_count = 2;
    fsc.observation_count = 1;
    fsc.action_count = 2;
    fsc.psi = {{1.0, 0.0}, {0.0, 1.0}};
    fsc.eta = {{{0.0, 1.0}}, {{1.0, 0.0}}};
    fsc.eta0 = {{1.0, 0.0}};
    return fsc;
}

// Trace of a deterministic memoryless top-level policy (observation ->
// option) over a set of single-step options, ignoring initiation sets.
inline std::vector<std::vector<double>> memoryless_policy_trace(
    const std::vector<OptionSpec>& options, const std::vector<int>& policy_by_obs,
    const std::vector<int>& obs_sequence) {
    std::vector<std::vector<double>> trace;
    trace.reserve(obs_sequence.size());
    for (int obs_symbol : obs_sequence) {
        const Observation obs = tabular_observation(obs_symbol);
        const OptionSpec& spec = options[policy_by_obs[obs_symbol]];
        if (spec.termination->beta(obs) != 1.0)
            throw Error("memoryless policy search expects single-step options");
        trace.push_back(spec.policy->action_distribution(obs));
    }
    return trace;
}

// Brute-force search over all deterministic memoryless top-level policies.
// Returns the number of initial steps of `target` the best policy can
// match (within tol), ignoring initiation sets entirely.
inline int best_memoryless_match_length(const std::vector<OptionSpec>& options,
                                        int observation_count,
                                        const std::vector<int>& obs_sequence,
                                        const std::vector<std::vector<double>>& target,
                                        double tol = 1e-9,
                                        long enumeration_bound = kDefaultStateBound) {
    const int option_count = static_cast<int>(options.size());
    double policies = 1.0;
    for (int x = 0; x < observation_count; ++x) policies *= option_count;
    if (policies > static_cast<double>(enumeration_bound))
        throw Error("state explosion: too many memoryless policies to enumerate");

    int best = 0;
    std::vector<int> policy(observation_count, 0);
    const long total = static_cast<long>(policies);
    for (long code = 0; code < total; ++code) {
        long rest = code;
        for (int x = 0; x < observation_count; ++x) {
            policy[x] = static_cast<int>(rest % option_count);
            rest /= option_count;
        }
        const auto trace = memoryless_policy_trace(options, policy, obs_sequence);
        int matched = 0;
        for (std::size_t t = 0; t < target.size(); ++t) {
            bool same = true;
            for (std::size_t a = 0; a < target[t].size(); ++a)
                if (std::abs(trace[t][a] - target[t][a]) > tol) same = false;
            if (!same) break;
            ++matched;
        }
        best = std::max(best, matched);
        if (best == static_cast<int>(target.size())) break;
    }
    return best;
}

// Maximum deviation between the controller's trace and its compilation's
// trace over observation sequences of the given horizon. Enumerates the
// observation tree exhaustively while the sequence count stays within
// max_enumeration, otherwise checks `samples` random sequences.
struct TraceComparison {
    double max_abs_deviation = 0.0;
    long sequences_checked = 0;
    bool exhaustive = true;
};

inline TraceComparison compare_fsc_with_compilation(const Fsc& fsc,
                                                    const CompiledController& cc,
                                                    int horizon,
                                                    long max_enumeration = 100000,
                                                    Rng* rng = nullptr,
                                                    int samples = 200) {
    TraceComparison result;
    double total = 1.0;
    for (int d = 0; d < horizon; ++d) total *= fsc.observation_count;

    if (total <= static_cast<double>(max_enumeration)) {
        // Depth-first over the observation tree, extending one shared prefix.
        std::vector<int> seq;
        std::function<void(void)> descend = [&] {
            if (!seq.empty()) {
                const auto lhs = action_distribution_trace(fsc, seq);
                const auto rhs = action_distribution_trace(cc, seq);
                const std::size_t t = seq.size() - 1;
                for (int a = 0; a < fsc.action_count; ++a)
                    result.max_abs_deviation = std::max(
                        result.max_abs_deviation, std::abs(lhs[t][a] - rhs[t][a]));
                ++result.sequences_checked;
            }
            if (static_cast<int>(seq.size()) == horizon) return;
            for (int x = 0; x < fsc.observation_count; ++x) {
                seq.push_back(x);
                descend();
                seq.pop_back();
            }
        };
        descend();
        return result;
    }

    result.exhaustive = false;
    if (!rng) throw Error("sampled comparison requires an rng");
    for (int s = 0; s < samples; ++s) {
        std::vector<int> seq(horizon);
        for (int& x : seq) x = uniform_int(*rng, 0, fsc.observation_count - 1);
        const auto lhs = action_distribution_trace(fsc, seq);
        const auto rhs = action_distribution_trace(cc, seq);
        for (int t = 0; t < horizon; ++t)
            for (int a = 0; a < fsc.action_count; ++a)
                result.max_abs_deviation = std::max(result.max_abs_deviation,
                                                    std::abs(lhs[t][a] - rhs[t][a]));
        ++result.sequences_checked;
    }
    return result;
}

// Random controller with dirichlet-like rows, for randomized suites.
inline Fsc random_fsc(Rng& rng, int max_nodes = 4, int max_observations = 3,
                      int max_actions = 3) {
    Fsc fsc;
    fsc.node_count = uniform_int(rng, 1, max_nodes);
    fsc.observation_count = uniform_int(rng, 1, max_observations);
    fsc.action_count = uniform_int(rng, 1, max_actions);
    auto random_row = [&](int len) {
        std::vector<double> row(len);
        double sum = 0.0;
        for (double& v : row) {
            v = -std::log(1.0 - uniform01(rng));
            sum += v;
        }
        for (double& v : row) v /= sum;
        return row;
    };
    for (int n = 0; n < fsc.node_count; ++n) fsc.psi.push_back(random_row(fsc.action_count));
    fsc.eta.resize(fsc.node_count);
    for (int n = 0; n < fsc.node_count; ++n)
        for (int x = 0; x < fsc.observation_count; ++x)
            fsc.eta[n].push_back(random_row(fsc.node_count));
    for (int x = 0; x < fsc.observation_count; ++x)
        fsc.eta0.push_back(random_row(fsc.node_count));
    return fsc;
}

// --- fixture files -------------------------------------------------------
//
// Controllers are stored as JSON with probability tables flattened to
// row-major lists:
//   psi  : node-major over actions            (nodes * actions values)
//   eta  : node-major, then observation-major (nodes * observations * nodes)
//   eta0 : observation-major over nodes       (observations * nodes)

inline nlohmann::json fsc_to_json(const Fsc& fsc) {
    nlohmann::json j;
    j["version"] = 1;
    j["nodes"] = fsc.node_count;
    j["observations"] = fsc.observation_count;
    j["actions"] = fsc.action_count;
    auto& psi = j["psi"] = nlohmann::json::array();
    for (const auto& row : fsc.psi)
        for (double v : row) psi.push_back(v);
    auto& eta = j["eta"] = nlohmann::json::array();
    for (const auto& per_node : fsc.eta)
        for (const auto& row : per_node)
            for (double v : row) eta.push_back(v);
    auto& eta0 = j["eta0"] = nlohmann::json::array();
    for (const auto& row : fsc.eta0)
        for (double v : row) eta0.push_back(v);
    return j;
}

inline Fsc fsc_from_json(const nlohmann::json& j) {
    Fsc fsc;
    fsc.node_count = j.at("nodes").get<int>();
    fsc.observation_count = j.at("observations").get<int>();
    fsc.action_count = j.at("actions").get<int>();
    const auto psi = j.at("psi").get<std::vector<double>>();
    const auto eta = j.at("eta").get<std::vector<double>>();
    const auto eta0 = j.at("eta0").get<std::vector<double>>();
    const std::size_t n = fsc.node_count, x = fsc.observation_count, a = fsc.action_count;
    if (psi.size() != n * a || eta.size() != n * x * n || eta0.size() != x * n)
        throw Error("fsc fixture: flattened table lengths do not match the header");
    fsc.psi.assign(n, std::vector<double>(a));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < a; ++k) fsc.psi[i][k] = psi[i * a + k];
    fsc.eta.assign(n, std::vector<std::vector<double>>(x, std::vector<double>(n)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < x; ++o)
            for (std::size_t k = 0; k < n; ++k)
                fsc.eta[i][o][k] = eta[(i * x + o) * n + k];
    fsc.eta0.assign(x, std::vector<double>(n));
    for (std::size_t o = 0; o < x; ++o)
        for (std::size_t k = 0; k < n; ++k) fsc.eta0[o][k] = eta0[o * n + k];
    fsc.validate();
    return fsc;
}

inline void save_fsc(const Fsc& fsc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << fsc_to_json(fsc).dump(2) << "\n";
}

inline Fsc load_fsc(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return fsc_from_json(j);
}

} // namespace ooi
