#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "ooi/episode.hpp"

namespace ooi::envs {

// Tape copying with duplicate removal. The tape holds 20 to 30 symbols
// over {A,B,C,D,E}; B's and D's always appear as adjacent pairs. The
// agent sees only the symbol under the read head and must write the tape
// to the output with each BB collapsed to B and each DD to D.
//
// Actions combine (symbol, push?, head move): id = symbol*4 + push*2 + inc,
// 20 in total. A correct push pays +1; a wrong push pays -0.5 and ends the
// episode; emitting the full target ends it successfully. The head clamps
// at both tape ends.
//
// Observation features: one-hot of the symbol under the head (5).
// raw = {symbol}.

constexpr int kDupSymbols = 5; // A=0 B=1 C=2 D=3 E=4
constexpr int kDupActions = kDupSymbols * 2 * 2;

inline int dup_action(int symbol, bool push, bool increment) {
    return symbol * 4 + (push ? 2 : 0) + (increment ? 1 : 0);
}

inline std::vector<int> random_tape(Rng& rng) {
    const int length = uniform_int(rng, 20, 30);
    std::vector<int> tape;
    tape.reserve(length);
    while (static_cast<int>(tape.size()) < length) {
        int symbol = uniform_int(rng, 0, kDupSymbols - 1);
        const bool paired = symbol == 1 || symbol == 3;
        if (paired && static_cast<int>(tape.size()) + 2 > length) {
            // No room for a pair; draw from the unpaired symbols instead.
            static constexpr int kSingles[3] = {0, 2, 4};
            symbol = kSingles[uniform_int(rng, 0, 2)];
        }
        tape.push_back(symbol);
        if (symbol == 1 || symbol == 3) tape.push_back(symbol);
    }
    return tape;
}

struct DedupResult {
    std::vector<int> target;
    double optimal_reward = 0.0;
};

// Collapses each adjacent BB and DD to a single symbol; everything else is
// copied through. The optimal reward is one per target symbol.
inline DedupResult dedup_oracle(const std::vector<int>& tape) {
    DedupResult result;
    for (std::size_t i = 0; i < tape.size();) {
        const int s = tape[i];
        result.target.push_back(s);
        if ((s == 1 || s == 3) && i + 1 < tape.size() && tape[i + 1] == s) i += 2;
        else i += 1;
    }
    result.optimal_reward = static_cast<double>(result.target.size());
    return result;
}

// Return of the policy that pushes every observed symbol and moves right.
inline double copy_only_return(const std::vector<int>& tape) {
    const DedupResult dedup = dedup_oracle(tape);
    double total = 0.0;
    std::size_t produced = 0;
    for (int symbol : tape) {
        if (produced < dedup.target.size() && symbol == dedup.target[produced]) {
            total += 1.0;
            ++produced;
            if (produced == dedup.target.size()) break;
        } else {
            total -= 0.5;
            break;
        }
    }
    return total;
}

class DupInputEnv final : public Env {
public:
    DupInputEnv() = default;
    // Fixed tape, for tests and oracles.
    explicit DupInputEnv(std::vector<int> tape) : fixed_tape_(std::move(tape)) {}

    Observation reset(Rng& rng) override {
        tape_ = fixed_tape_.empty() ? random_tape(rng) : fixed_tape_;
        target_ = dedup_oracle(tape_).target;
        head_ = 0;
        produced_ = 0;
        done_ = false;
        return observe();
    }

    StepResult step(int action) override {
        if (done_) throw StepAfterDone();
        if (action < 0 || action >= kDupActions) throw Error("dupinput: bad action");
        const int symbol = action / 4;
        const bool push = (action & 2) != 0;
        const bool increment = (action & 1) != 0;
        double reward = 0.0;
        if (push) {
            if (symbol == target_[produced_]) {
                reward = 1.0;
                ++produced_;
                if (produced_ == static_cast<int>(target_.size())) done_ = true;
            } else {
                reward = -0.5;
                done_ = true;
            }
        }
        head_ = std::clamp(head_ + (increment ? 1 : -1), 0,
                           static_cast<int>(tape_.size()) - 1);
        return {observe(), reward, done_};
    }

    int action_count() const override { return kDupActions; }
    int feature_dim() const override { return kDupSymbols; }

    const std::vector<int>& tape() const { return tape_; }
    const std::vector<int>& target() const { return target_; }
    int produced() const { return produced_; }

private:
    Observation observe() const {
        Observation obs;
        obs.features.assign(kDupSymbols, 0.0);
        obs.features[tape_[head_]] = 1.0;
        obs.raw = {tape_[head_]};
        return obs;
    }

    std::vector<int> fixed_tape_;
    std::vector<int> tape_;
    std::vector<int> target_;
    int head_ = 0;
    int produced_ = 0;
    bool done_ = false;
};

enum class DupOptionMode { Designed, Random };

// Two fully learned options; the second cannot follow itself, the first
// is unrestricted. In random mode, n options each admit n/2 distinct
// predecessors drawn without replacement, plus the empty predecessor.
inline std::vector<OptionSpec> dupinput_options(DupOptionMode mode, int option_count = 2,
                                                Rng* rng = nullptr) {
    auto learned = std::make_shared<LearnedPolicy>();
    auto learned_term = std::make_shared<LearnedTermination>();
    std::vector<OptionSpec> options;
    if (mode == DupOptionMode::Designed) {
        for (int i = 0; i < 2; ++i) {
            OptionSpec spec;
            spec.id = i;
            spec.name = i == 0 ? "w1" : "w2";
            spec.policy = learned;
            spec.termination = learned_term;
            spec.initiation = InitiationSet::universe(2);
            options.push_back(std::move(spec));
        }
        options[1].initiation.predecessors[1] = false; // w2 cannot follow itself
        return options;
    }
    if (option_count < 2 || option_count % 2 != 0)
        throw Error("random initiation sets need an even option count >= 2");
    if (!rng) throw Error("random initiation sets need an rng");
    for (int i = 0; i < option_count; ++i) {
        OptionSpec spec;
        spec.id = i;
        spec.name = "w" + std::to_string(i + 1);
        spec.policy = learned;
        spec.termination = learned_term;
        spec.initiation.predecessors.assign(option_count, false);
        spec.initiation.allows_none = true;
        std::vector<int> ids(option_count);
        for (int k = 0; k < option_count; ++k) ids[k] = k;
        for (int k = 0; k < option_count / 2; ++k) {
            const int j = uniform_int(*rng, k, option_count - 1);
            std::swap(ids[k], ids[j]);
            spec.initiation.predecessors[ids[k]] = true;
        }
        options.push_back(std::move(spec));
    }
    return options;
}

// Copies the tape while skipping the second element of each BB/DD pair.
// Flat agent over the 20 primitive actions.
class DupInputOracle final : public Agent {
public:
    void begin_episode() override { pending_pair_ = -1; }

    std::vector<double> decide(const Observation& obs, const DecisionContext&,
                               const MaskVector& mask) override {
        const int symbol = obs.raw[0];
        bool push = true;
        if (symbol == 1 || symbol == 3) {
            if (pending_pair_ == symbol) {
                push = false; // second half of the pair
                pending_pair_ = -1;
            } else {
                pending_pair_ = symbol;
            }
        } else {
            pending_pair_ = -1;
        }
        std::vector<double> dist(mask.entries.size(), 0.0);
        dist[mask.layout.action_index(kContRow, dup_action(symbol, push, true))] = 1.0;
        return dist;
    }

private:
    int pending_pair_ = -1;
};

} // namespace ooi::envs
