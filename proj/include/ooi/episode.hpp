#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "ooi/core.hpp"
#include "ooi/trajectory.hpp"

namespace ooi {

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
};

class Env {
public:
    virtual ~Env() = default;
    virtual Observation reset(Rng& rng) = 0;
    virtual StepResult step(int action) = 0;
    virtual int action_count() const = 0;
    virtual int feature_dim() const = 0;
};

using DecisionContext = std::variant<TopLevelContext, InOptionContext>;

// An agent maps (observation, context, mask) to a distribution over the
// joint output layout. Sampling is done by the episode loop so that all
// stochasticity flows through one rng stream. Agents may be stateful
// across one episode (scripted controllers track what they have seen);
// begin_episode() resets that state.
class Agent {
public:
    virtual ~Agent() = default;
    virtual void begin_episode() {}
    virtual std::vector<double> decide(const Observation& obs, const DecisionContext& context,
                                       const MaskVector& mask) = 0;
    // True when decisions under this agent are network samples that the
    // learner should include in its loss.
    virtual bool learned_decisions() const { return false; }
};

constexpr int kDefaultStepLimit = 1000;

// SMDP execution loop. Alternates top-level option selections with
// in-option primitive actions until the env terminates or step_limit
// primitive actions have been executed. With an empty option set the loop
// degenerates to a flat agent: one action decision per env step, all
// entries of the action block open.
//
// Fixed-policy options sample their action from the option's table and
// evaluate beta on each observation reached after an action; learned
// options sample action and end/cont flag jointly from the agent. Either
// way an option executes at least one action per activation.
//
// env_rng drives environment dynamics, sample_rng every behavioral coin.
inline Trajectory run_episode(Env& env, Agent& agent, const std::vector<OptionSpec>& options,
                              Rng& env_rng, Rng& sample_rng,
                              int step_limit = kDefaultStepLimit) {
    const int action_count = env.action_count();
    const int option_count = static_cast<int>(options.size());
    const OutputLayout layout{option_count, action_count};
    const MaskVector in_option_mask = build_mask(InOptionContext{}, {}, action_count, option_count);

    Trajectory traj;
    agent.begin_episode();
    Observation obs = env.reset(env_rng);
    OptionId prev = kNoOption;
    bool done = false;

    auto limit_reached = [&] { return traj.env_steps >= step_limit; };
    auto execute = [&](int action) {
        StepResult res = env.step(action);
        ++traj.env_steps;
        traj.total_reward += res.reward;
        done = res.done;
        obs = std::move(res.obs);
        return res.reward;
    };

    // Flat mode: no options, every step is a masked primitive decision.
    if (option_count == 0) {
        while (!done && !limit_reached()) {
            DecisionRecord rec;
            rec.obs = obs;
            rec.context = kNoOption;
            rec.prev = kNoOption;
            rec.mask = in_option_mask;
            std::vector<double> dist =
                agent.decide(rec.obs, InOptionContext{kNoOption}, rec.mask);
            rec.choice = sample_index(dist, sample_rng);
            rec.reward = execute(layout.action_of(rec.choice));
            rec.env_stepped = true;
            rec.learned = agent.learned_decisions();
            traj.steps.push_back(std::move(rec));
        }
        traj.truncated = !done;
        return traj;
    }

    while (!done && !limit_reached()) {
        // Top-level selection among the currently available options.
        std::vector<OptionId> avail = available_options(obs, prev, options);
        DecisionRecord sel;
        sel.obs = obs;
        sel.context = kNoOption;
        sel.prev = prev;
        sel.mask = build_mask(TopLevelContext{prev}, avail, action_count, option_count);
        std::vector<double> dist = agent.decide(sel.obs, TopLevelContext{prev}, sel.mask);
        sel.choice = sample_index(dist, sample_rng);
        sel.learned = agent.learned_decisions();
        const OptionId omega = layout.option_of(sel.choice);
        traj.steps.push_back(std::move(sel));

        const OptionSpec& spec = options[omega];
        bool first_action = true;
        while (!done && !limit_reached()) {
            if (spec.policy->learned()) {
                DecisionRecord rec;
                rec.obs = obs;
                rec.context = omega;
                rec.mask = in_option_mask;
                std::vector<double> action_dist =
                    agent.decide(rec.obs, InOptionContext{omega}, rec.mask);
                rec.choice = sample_index(action_dist, sample_rng);
                rec.reward = execute(layout.action_of(rec.choice));
                rec.env_stepped = true;
                rec.learned = agent.learned_decisions();
                const bool end = layout.is_end_row(rec.choice);
                traj.steps.push_back(std::move(rec));
                if (end) break;
            } else {
                // Fixed policy: beta gates every action after the first.
                if (!first_action && bernoulli(sample_rng, spec.termination->beta(obs))) break;
                DecisionRecord rec;
                rec.obs = obs;
                rec.context = omega;
                rec.mask = in_option_mask;
                std::vector<double> action_dist = spec.policy->action_distribution(rec.obs);
                const int action = sample_index(action_dist, sample_rng);
                rec.choice = layout.action_index(kContRow, action);
                rec.reward = execute(action);
                rec.env_stepped = true;
                rec.learned = false;
                traj.steps.push_back(std::move(rec));
            }
            first_action = false;
        }
        prev = omega;
    }
    traj.truncated = !done;
    return traj;
}

} // namespace ooi
