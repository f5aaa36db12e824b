#pragma once

#include <vector>

#include "ooi/core.hpp"

namespace ooi {

// One decision made during an episode: either a top-level option selection
// (context == kNoOption, env_stepped == false) or an in-option action
// emission (context == the running option, env_stepped == true).
struct DecisionRecord {
    Observation obs;
    OptionId context = kNoOption; // kNoOption exactly at top-level decisions
    OptionId prev = kNoOption;    // predecessor seen by a top-level decision
    MaskVector mask;
    int choice = 0;      // flat index into the output layout
    double reward = 0.0; // env reward collected by this decision (0 at top level)
    bool env_stepped = false;
    bool learned = false; // choice was sampled from the shared network
};

struct Trajectory {
    std::vector<DecisionRecord> steps;
    double total_reward = 0.0;
    bool truncated = false; // step limit hit before the env terminated
    int env_steps = 0;
};

// R_t for every t with R_t = r_t + gamma * R_{t+1}, single backward pass.
inline std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                              double gamma) {
    if (rewards.empty()) throw MisalignedInput("discounted_returns: empty reward sequence");
    std::vector<double> out(rewards.size());
    double running = 0.0;
    for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
        running = rewards[t] + gamma * running;
        out[t] = running;
    }
    return out;
}

// Per-decision returns on environment time. A top-level selection shares
// the return of the decision that follows it (same env time-step, no
// reward in between), so the discount is applied only across env steps.
inline std::vector<double> decision_returns(const Trajectory& traj, double gamma) {
    std::vector<double> out(traj.steps.size(), 0.0);
    double running = 0.0;
    for (int t = static_cast<int>(traj.steps.size()) - 1; t >= 0; --t) {
        const DecisionRecord& step = traj.steps[t];
        if (step.env_stepped) running = step.reward + gamma * running;
        out[t] = running;
    }
    return out;
}

} // namespace ooi
