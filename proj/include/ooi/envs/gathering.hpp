#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ooi/episode.hpp"

namespace ooi::envs {

// Object gathering between two terminals and a root, simulated at option
// granularity: each primitive action is one journey. Actions 0-3 go to the
// green terminal, 4-7 to the blue one, 8-11 back to the root. Arriving at
// a terminal with objects pays +2 and removes one; arriving at an empty
// terminal pays -2, refills the other terminal with 2-4 objects and counts
// one emptying. The episode ends after 2 or 3 emptyings.
//
// The terminal's state is visible only on site: the observation is a
// one-hot over {root, green-full, green-empty, blue-full, blue-empty},
// reflecting what the terminal held on arrival. raw = {location, qr} with
// location 0 root / 1 green / 2 blue and qr 0 at the root, 1 full, 2 empty.

constexpr int kGatherOptionCount = 12;

enum GatherOption : int {
    kG1 = 0, kG2 = 1, kG3 = 2, kG4 = 3,
    kB1 = 4, kB2 = 5, kB3 = 6, kB4 = 7,
    kR1 = 8, kR2 = 9, kR3 = 10, kR4 = 11,
};

// Fixed draws for tests; every field left empty keeps the random rule.
struct GatheringParams {
    std::optional<int> initial_count;
    std::optional<int> refill_count;
    std::optional<int> emptyings_target;
};

class GatheringEnv final : public Env {
public:
    GatheringEnv() = default;
    explicit GatheringEnv(GatheringParams params) : params_(params) {}

    Observation reset(Rng& rng) override {
        rng_ = &rng;
        counts_[0] = params_.initial_count.value_or(uniform_int(rng, 2, 4));
        counts_[1] = params_.initial_count.value_or(uniform_int(rng, 2, 4));
        target_ = params_.emptyings_target.value_or(uniform_int(rng, 2, 3));
        emptyings_ = 0;
        location_ = 0;
        qr_ = 0;
        done_ = false;
        return observe();
    }

    StepResult step(int action) override {
        if (done_) throw StepAfterDone();
        if (action < 0 || action >= kGatherOptionCount)
            throw Error("gathering: bad action");
        double reward = 0.0;
        if (action >= kR1) {
            if (location_ == 0) throw UnavailableOption(action);
            location_ = 0;
            qr_ = 0;
        } else {
            if (location_ != 0) throw UnavailableOption(action);
            const int terminal = action < kB1 ? 0 : 1;
            location_ = terminal + 1;
            if (counts_[terminal] > 0) {
                reward = 2.0;
                --counts_[terminal];
                qr_ = 1;
            } else {
                reward = -2.0;
                qr_ = 2;
                counts_[1 - terminal] =
                    params_.refill_count.value_or(uniform_int(*rng_, 2, 4));
                if (++emptyings_ == target_) done_ = true;
            }
        }
        return {observe(), reward, done_};
    }

    int action_count() const override { return kGatherOptionCount; }
    int feature_dim() const override { return 5; }

    int emptyings() const { return emptyings_; }
    int emptyings_target() const { return target_; }

private:
    Observation observe() const {
        Observation obs;
        obs.features.assign(5, 0.0);
        if (location_ == 0) obs.features[0] = 1.0;
        else obs.features[1 + 2 * (location_ - 1) + (qr_ == 2 ? 1 : 0)] = 1.0;
        obs.raw = {location_, qr_};
        return obs;
    }

    GatheringParams params_;
    Rng* rng_ = nullptr; // must outlive the episode
    int counts_[2] = {0, 0};
    int target_ = 0;
    int emptyings_ = 0;
    int location_ = 0;
    int qr_ = 0;
    bool done_ = false;
};

// The twelve journey options. Each executes its own macro action once and
// terminates. Root options follow the four green (R1, R2) or four blue
// (R3, R4) options; terminal options follow the root option with the same
// index, and all eight are startable at the first decision.
inline std::vector<OptionSpec> gathering_options() {
    auto at_root = [](const Observation& obs) { return obs.raw[0] == 0; };
    auto at_terminal = [](const Observation& obs) { return obs.raw[0] != 0; };

    std::vector<OptionSpec> options(kGatherOptionCount);
    static const char* kNames[kGatherOptionCount] = {"G1", "G2", "G3", "G4",
                                                     "B1", "B2", "B3", "B4",
                                                     "R1", "R2", "R3", "R4"};
    for (int i = 0; i < kGatherOptionCount; ++i) {
        OptionSpec& spec = options[i];
        spec.id = i;
        spec.name = kNames[i];
        spec.policy = std::make_shared<FixedPolicy>([i](const Observation&) {
            std::vector<double> dist(kGatherOptionCount, 0.0);
            dist[i] = 1.0;
            return dist;
        });
        spec.termination = FixedTermination::always();
        spec.initiation.predecessors.assign(kGatherOptionCount, false);
        if (i < kR1) {
            // Terminal option i follows root option R(i mod 4).
            spec.initiation.predecessors[kR1 + i % 4] = true;
            spec.initiation.allows_none = true;
            spec.initiation.observation_predicate = at_root;
        } else {
            const bool from_green = i == kR1 || i == kR2;
            for (int p = 0; p < 4; ++p)
                spec.initiation.predecessors[(from_green ? kG1 : kB1) + p] = true;
            spec.initiation.allows_none = false;
            spec.initiation.observation_predicate = at_terminal;
        }
    }
    return options;
}

// The reference top-level policy: leave a terminal through the root option
// matching what was found there (R1/R3 full, R2/R4 empty), go back to the
// same terminal after a full one, switch sides after an empty one.
class GatheringExpert final : public Agent {
public:
    std::vector<double> decide(const Observation& obs, const DecisionContext& context,
                               const MaskVector& mask) override {
        const int location = obs.raw[0];
        const int qr = obs.raw[1];
        const OptionId prev = std::get<TopLevelContext>(context).prev;
        int choice = kG1; // first decision: no history, pick a side
        if (location == 1) choice = qr == 1 ? kR1 : kR2;
        else if (location == 2) choice = qr == 1 ? kR3 : kR4;
        else if (prev == kR1) choice = kG1;
        else if (prev == kR2) choice = kB2;
        else if (prev == kR3) choice = kB3;
        else if (prev == kR4) choice = kG4;
        std::vector<double> dist(mask.entries.size(), 0.0);
        dist[mask.layout.option_index(kContRow, choice)] = 1.0;
        return dist;
    }
};

} // namespace ooi::envs
