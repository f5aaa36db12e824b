#pragma once

#include <variant>
#include <vector>

#include "ooi/episode.hpp"
#include "ooi/policy_net.hpp"

namespace ooi {

struct LearnerConfig {
    int hidden = 100;
    double gamma = 0.99;
    double alpha = 1e-3;
    double value_alpha = 0.0; // 0: same as alpha
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double entropy_coef = 0.0;
};

// Shared-network agent: one policy net serves the top level and every
// learned option, one value net provides the baseline. One monte-carlo
// gradient update per episode.
class LearnedAgent final : public Agent {
public:
    LearnedAgent(int feature_dim, int option_count, int action_count,
                 const LearnerConfig& config, Rng& init_rng)
        : config_(config),
          policy_(make_policy_net(feature_dim, option_count, action_count, config.hidden,
                                  init_rng)),
          value_(make_value_net(feature_dim, option_count, config.hidden, init_rng)),
          policy_state_(AdamState::for_params(policy_.p, config.alpha, config.beta1,
                                              config.beta2, config.epsilon)),
          value_state_(AdamState::for_params(
              value_.p, config.value_alpha > 0.0 ? config.value_alpha : config.alpha,
              config.beta1, config.beta2, config.epsilon)) {}

    std::vector<double> decide(const Observation& obs, const DecisionContext& context,
                               const MaskVector& mask) override {
        const OptionId current = std::holds_alternative<InOptionContext>(context)
                                     ? std::get<InOptionContext>(context).option
                                     : kNoOption;
        return forward(policy_, obs.features, option_onehot(policy_.option_count, current),
                       mask);
    }

    bool learned_decisions() const override { return true; }

    void update(const Trajectory& traj) {
        const std::vector<double> returns = decision_returns(traj, config_.gamma);
        std::vector<double> baselines(traj.steps.size(), 0.0);
        ValueBatch batch;
        for (std::size_t t = 0; t < traj.steps.size(); ++t) {
            const DecisionRecord& step = traj.steps[t];
            if (!step.learned) continue;
            auto onehot = option_onehot(value_.option_count, step.context);
            baselines[t] = value_forward(value_, step.obs.features, onehot);
            batch.features.push_back(step.obs.features);
            batch.option_onehots.push_back(std::move(onehot));
            batch.targets.push_back(returns[t]);
        }
        auto [loss, grads] =
            pg_loss_and_grads(policy_, traj, returns, baselines, config_.entropy_coef);
        (void)loss;
        adam_step(policy_.p, grads, policy_state_);
        value_update(value_, batch, value_state_);
    }

    const PolicyNet& policy() const { return policy_; }
    const ValueNet& value() const { return value_; }

private:
    LearnerConfig config_;
    PolicyNet policy_;
    ValueNet value_;
    AdamState policy_state_;
    AdamState value_state_;
};

} // namespace ooi
