#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "ooi/episode.hpp"

namespace ooi::envs {

// Binary tree maze. The agent walks four corridors separated by three
// junctions; the goal leaf is encoded by three bits shown one per
// time-step at the start of the episode. Corridors 0-2 are five cells
// long with the junction in the last cell, the leaf corridor has four
// cells, so every start-to-leaf path takes 18 steps: 4+1+4+1+4+1+3.
//
// Actions: 0 forward, 1 left, 2 right. Left/right only do something in a
// junction cell, forward only outside one; ineffective actions still cost
// the step. Reward is -0.1 per step and +10 on top when the reached leaf
// is the goal. The episode ends at any leaf.
//
// Observation features (12): position one-hot (5), junctions-crossed
// one-hot (4), bit channel one-hot (shows-0, shows-1, none).
// raw = {position, junctions_crossed, bit_value} with bit_value in
// {-1 none, 0, 1}.
class TreeMazeEnv final : public Env {
public:
    static constexpr int kForward = 0;
    static constexpr int kLeft = 1;
    static constexpr int kRight = 2;
    static constexpr int kSegments = 4;
    static constexpr int kJunctionCell = 4; // corridors 0-2: cells 0..4
    static constexpr int kLeafCell = 3;     // corridor 3: cells 0..3
    static constexpr double kStepReward = -0.1;
    static constexpr double kGoalReward = 10.0;
    static constexpr int kShortestPathSteps = 18;

    Observation reset(Rng& rng) override {
        goal_ = static_cast<int>(rng() % 8);
        segment_ = 0;
        position_ = 0;
        time_ = 1;
        turns_ = 0;
        done_ = false;
        return observe();
    }

    StepResult step(int action) override {
        if (done_) throw StepAfterDone();
        double reward = kStepReward;
        const bool at_junction = segment_ < kSegments - 1 && position_ == kJunctionCell;
        if (at_junction) {
            if (action == kLeft || action == kRight) {
                turns_ = (turns_ << 1) | (action == kRight ? 1 : 0);
                ++segment_;
                position_ = 0;
            }
        } else if (action == kForward) {
            const int last_cell = segment_ == kSegments - 1 ? kLeafCell : kJunctionCell;
            if (position_ < last_cell) ++position_;
            if (segment_ == kSegments - 1 && position_ == kLeafCell) {
                done_ = true;
                if (turns_ == goal_) reward += kGoalReward;
            }
        }
        ++time_;
        return {observe(), reward, done_};
    }

    int action_count() const override { return 3; }
    int feature_dim() const override { return 12; }

    int goal() const { return goal_; }
    int reached_leaf() const { return turns_; }

private:
    int goal_bit(int index) const { return (goal_ >> (2 - index)) & 1; }

    Observation observe() const {
        const int bit = time_ <= 3 ? goal_bit(time_ - 1) : -1;
        Observation obs;
        obs.features.assign(12, 0.0);
        obs.features[position_] = 1.0;
        obs.features[5 + segment_] = 1.0;
        obs.features[9 + (bit < 0 ? 2 : bit)] = 1.0;
        obs.raw = {position_, segment_, bit};
        return obs;
    }

    int goal_ = 0;
    int segment_ = 0;
    int position_ = 0;
    int time_ = 1;
    int turns_ = 0;
    bool done_ = false;
};

enum class TreeMazeVariant { Full14, Known8, Known4 };

namespace detail {

// Memory strings use '0'/'1' for known bits and '-' for unknown ones.
inline bool refines_by_one(const std::string& from, const std::string& to) {
    int refined = 0;
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (from[i] == to[i]) continue;
        if (from[i] == '-' && (to[i] == '0' || to[i] == '1')) ++refined;
        else return false;
    }
    return refined == 1;
}

inline bool flips_one_to_one(const std::string& from, const std::string& to) {
    int flips = 0;
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (from[i] == to[i]) continue;
        if ((from[i] == '0' || from[i] == '-') && to[i] == '1') ++flips;
        else return false;
    }
    return flips == 1;
}

inline int known_bits(const std::string& memory) {
    int n = 0;
    for (char c : memory)
        if (c != '-') ++n;
    return n;
}

} // namespace detail

// The predefined memoryless option policies. Partial-memory options walk
// one cell and terminate; full-memory options walk to the leaf their bits
// name, turning at junction j according to bit j. In the reduced variants
// the full options also terminate in the two cells entered after the
// start, so the top level can see the second and third goal bits.
inline std::vector<OptionSpec> treemaze_options(TreeMazeVariant variant,
                                                bool literal_successors = false) {
    std::vector<std::string> memories;
    switch (variant) {
    case TreeMazeVariant::Full14:
        memories = {"0--", "1--", "00-", "01-", "10-", "11-",
                    "000", "001", "010", "011", "100", "101", "110", "111"};
        break;
    case TreeMazeVariant::Known8:
        memories = {"000", "001", "010", "011", "100", "101", "110", "111"};
        break;
    case TreeMazeVariant::Known4:
        memories = {"000", "010", "100", "110"};
        break;
    }
    const int count = static_cast<int>(memories.size());

    auto forward_policy = std::make_shared<FixedPolicy>([](const Observation&) {
        return std::vector<double>{1.0, 0.0, 0.0};
    });
    auto leaf_policy = [](const std::string& memory) {
        return std::make_shared<FixedPolicy>([memory](const Observation& obs) {
            std::vector<double> dist(3, 0.0);
            const int position = obs.raw[0];
            const int junctions = obs.raw[1];
            if (position == TreeMazeEnv::kJunctionCell && junctions < 3)
                dist[memory[junctions] == '1' ? TreeMazeEnv::kRight
                                              : TreeMazeEnv::kLeft] = 1.0;
            else
                dist[TreeMazeEnv::kForward] = 1.0;
            return dist;
        });
    };
    auto early_termination = std::make_shared<FixedTermination>([](const Observation& obs) {
        const int position = obs.raw[0];
        const int junctions = obs.raw[1];
        return junctions == 0 && (position == 1 || position == 2) ? 1.0 : 0.0;
    });

    std::vector<OptionSpec> options(count);
    for (int i = 0; i < count; ++i) {
        const std::string& memory = memories[i];
        OptionSpec& spec = options[i];
        spec.id = i;
        spec.name = memory;
        const bool partial = memory.find('-') != std::string::npos;
        if (partial) {
            spec.policy = forward_policy;
            spec.termination = FixedTermination::always();
        } else {
            spec.policy = leaf_policy(memory);
            spec.termination = variant == TreeMazeVariant::Full14
                                   ? FixedTermination::never()
                                   : early_termination;
        }
        spec.initiation.predecessors.assign(count, false);
        for (int p = 0; p < count; ++p) {
            if (p == i) {
                spec.initiation.predecessors[p] = true;
                continue;
            }
            const std::string& from = memories[p];
            const bool successor =
                variant == TreeMazeVariant::Full14 && !literal_successors
                    ? detail::refines_by_one(from, memory)
                    : detail::flips_one_to_one(from, memory);
            if (successor) spec.initiation.predecessors[p] = true;
        }
        spec.initiation.allows_none =
            variant == TreeMazeVariant::Full14 ? detail::known_bits(memory) == 1 : true;
    }
    return options;
}

// Shortest-path controller: memorizes the three announced bits and turns
// accordingly at each junction. Primitive-level (flat) agent.
class TreeMazeOracle final : public Agent {
public:
    static constexpr int kGoal = -1;      // follow the announced bits
    static constexpr int kWrongLeaf = -2; // deliberately miss (last bit flipped)

    // Pass a leaf index to force a fixed destination.
    explicit TreeMazeOracle(int target_leaf = kGoal) : target_leaf_(target_leaf) {}

    void begin_episode() override { seen_ = 0; bits_ = 0; }

    std::vector<double> decide(const Observation& obs, const DecisionContext&,
                               const MaskVector& mask) override {
        const int position = obs.raw[0];
        const int junctions = obs.raw[1];
        const int bit = obs.raw[2];
        if (bit >= 0 && seen_ < 3) {
            bits_ = (bits_ << 1) | bit;
            ++seen_;
        }
        const int target = target_leaf_ >= 0 ? target_leaf_
                           : target_leaf_ == kWrongLeaf ? (bits_ ^ 1)
                                                        : bits_;
        int action = TreeMazeEnv::kForward;
        if (position == TreeMazeEnv::kJunctionCell && junctions < 3) {
            const int turn_bit = (target >> (2 - junctions)) & 1;
            action = turn_bit ? TreeMazeEnv::kRight : TreeMazeEnv::kLeft;
        }
        std::vector<double> dist(mask.entries.size(), 0.0);
        dist[mask.layout.action_index(kContRow, action)] = 1.0;
        return dist;
    }

private:
    int target_leaf_;
    int seen_ = 0;
    int bits_ = 0;
};

} // namespace ooi::envs
