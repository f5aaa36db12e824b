#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ooi/rng.hpp"

namespace ooi {

// Option indices are dense ints in [0, option_count). kNoOption stands for
// the empty predecessor at the first decision of an episode; it is never a
// valid option index.
using OptionId = int;
constexpr OptionId kNoOption = -1;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoAvailableOption : Error {
    NoAvailableOption() : Error("no option is available at a top-level decision") {}
};
struct DegenerateMask : Error {
    DegenerateMask() : Error("mask has no nonzero entry") {}
};
struct StepAfterDone : Error {
    StepAfterDone() : Error("step() called on a finished episode") {}
};
struct UnavailableOption : Error {
    explicit UnavailableOption(int id)
        : Error("option " + std::to_string(id) + " cannot start here") {}
};
struct MisalignedInput : Error {
    using Error::Error;
};
struct ShapeMismatch : Error {
    using Error::Error;
};
struct UnknownObservation : Error {
    explicit UnknownObservation(int symbol)
        : Error("observation " + std::to_string(symbol) + " is outside the alphabet") {}
};

// One observation: a fixed-dimension feature encoding consumed by networks,
// plus the environment's discrete record (meaning documented per env).
struct Observation {
    std::vector<double> features;
    std::vector<int> raw;
};

// Initiation set: a predecessor set over options plus the empty predecessor,
// and an optional observation predicate. Without a predicate, membership
// depends only on which option has just terminated.
struct InitiationSet {
    std::vector<bool> predecessors; // indexed by OptionId
    bool allows_none = false;       // empty predecessor (episode start)
    std::function<bool(const Observation&)> observation_predicate;

    static InitiationSet universe(int option_count) {
        InitiationSet s;
        s.predecessors.assign(option_count, true);
        s.allows_none = true;
        return s;
    }
    static InitiationSet from(std::initializer_list<OptionId> preds, int option_count,
                              bool allow_none = false) {
        InitiationSet s;
        s.predecessors.assign(option_count, false);
        for (OptionId p : preds) s.predecessors[p] = true;
        s.allows_none = allow_none;
        return s;
    }

    bool contains(const Observation& obs, OptionId prev) const {
        const bool pred_ok =
            prev == kNoOption
                ? allows_none
                : (prev >= 0 && prev < static_cast<int>(predecessors.size()) &&
                   predecessors[prev]);
        if (!pred_ok) return false;
        return !observation_predicate || observation_predicate(obs);
    }
};

// Option policy: either a fixed distribution over primitive actions per
// observation, or a marker that the shared network drives the option.
class OptionPolicy {
public:
    virtual ~OptionPolicy() = default;
    virtual bool learned() const { return false; }
    // Only meaningful for fixed policies.
    virtual std::vector<double> action_distribution(const Observation&) const {
        throw Error("learned policy has no fixed action distribution");
    }
};

class LearnedPolicy final : public OptionPolicy {
public:
    bool learned() const override { return true; }
};

class FixedPolicy final : public OptionPolicy {
public:
    explicit FixedPolicy(std::function<std::vector<double>(const Observation&)> fn)
        : fn_(std::move(fn)) {}
    std::vector<double> action_distribution(const Observation& obs) const override {
        return fn_(obs);
    }

private:
    std::function<std::vector<double>(const Observation&)> fn_;
};

// Termination: a fixed probability of stopping as a function of the
// observation, or learned jointly with the action via the end/cont rows.
class OptionTermination {
public:
    virtual ~OptionTermination() = default;
    virtual bool learned() const { return false; }
    virtual double beta(const Observation&) const {
        throw Error("learned termination has no fixed beta");
    }
};

class LearnedTermination final : public OptionTermination {
public:
    bool learned() const override { return true; }
};

class FixedTermination final : public OptionTermination {
public:
    explicit FixedTermination(std::function<double(const Observation&)> fn)
        : fn_(std::move(fn)) {}
    static std::shared_ptr<FixedTermination> always() {
        return std::make_shared<FixedTermination>([](const Observation&) { return 1.0; });
    }
    static std::shared_ptr<FixedTermination> never() {
        return std::make_shared<FixedTermination>([](const Observation&) { return 0.0; });
    }
    double beta(const Observation& obs) const override { return fn_(obs); }

private:
    std::function<double(const Observation&)> fn_;
};

struct OptionSpec {
    OptionId id = kNoOption;
    std::string name;
    std::shared_ptr<const OptionPolicy> policy;
    std::shared_ptr<const OptionTermination> termination;
    InitiationSet initiation;
};

// Set of options startable given the current observation and the option
// that has just finished. Direct filter over the initiation sets.
inline std::vector<OptionId> available_options(const Observation& obs, OptionId prev,
                                               const std::vector<OptionSpec>& options) {
    std::vector<OptionId> out;
    for (const OptionSpec& spec : options)
        if (spec.initiation.contains(obs, prev)) out.push_back(spec.id);
    return out;
}

// Replaces every predecessor set with the full universe (all options plus
// the empty predecessor). Observation predicates are kept: they encode
// where an option is physically startable, not execution history.
inline std::vector<OptionSpec> strip_initiation_sets(std::vector<OptionSpec> options) {
    const int n = static_cast<int>(options.size());
    for (OptionSpec& spec : options) {
        auto predicate = spec.initiation.observation_predicate;
        spec.initiation = InitiationSet::universe(n);
        spec.initiation.observation_predicate = std::move(predicate);
    }
    return options;
}

// Network output layout. The joint distribution covers 2*(action_count +
// option_count) entries laid out as two rows (end, cont) over columns
// (options first, then actions).
struct OutputLayout {
    int option_count = 0;
    int action_count = 0;

    int columns() const { return option_count + action_count; }
    int size() const { return 2 * columns(); }
    int index(int row, int col) const { return row * columns() + col; }
    int option_index(int row, OptionId o) const { return index(row, o); }
    int action_index(int row, int a) const { return index(row, option_count + a); }

    bool is_end_row(int flat) const { return flat < columns(); }
    bool is_option_column(int flat) const { return flat % columns() < option_count; }
    OptionId option_of(int flat) const { return flat % columns(); }
    int action_of(int flat) const { return flat % columns() - option_count; }
};

constexpr int kEndRow = 0;
constexpr int kContRow = 1;

struct MaskVector {
    OutputLayout layout;
    std::vector<std::uint8_t> entries;

    bool none_set() const {
        return std::find(entries.begin(), entries.end(), std::uint8_t{1}) == entries.end();
    }
};

struct TopLevelContext {
    OptionId prev = kNoOption;
};
struct InOptionContext {
    OptionId option = kNoOption;
};

// Mask construction. Top level: only the cont row of available option
// columns is open (the top-level policy can neither act nor terminate).
// In option: only action columns are open, in both rows, so the network
// decides the action and the end/cont flag jointly.
inline MaskVector build_mask(const TopLevelContext&, const std::vector<OptionId>& available,
                             int action_count, int option_count) {
    if (available.empty()) throw NoAvailableOption();
    MaskVector mask;
    mask.layout = OutputLayout{option_count, action_count};
    mask.entries.assign(mask.layout.size(), 0);
    for (OptionId o : available) mask.entries[mask.layout.option_index(kContRow, o)] = 1;
    return mask;
}

inline MaskVector build_mask(const InOptionContext&, std::vector<OptionId> /*unused*/,
                             int action_count, int option_count) {
    MaskVector mask;
    mask.layout = OutputLayout{option_count, action_count};
    mask.entries.assign(mask.layout.size(), 0);
    for (int a = 0; a < action_count; ++a) {
        mask.entries[mask.layout.action_index(kEndRow, a)] = 1;
        mask.entries[mask.layout.action_index(kContRow, a)] = 1;
    }
    return mask;
}

} // namespace ooi
