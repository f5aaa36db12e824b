#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "ooi/core.hpp"
#include "ooi/trajectory.hpp"

namespace ooi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ParamSet {
    MatrixXd W1;
    VectorXd b1;
    MatrixXd W2;
    VectorXd b2;

    static ParamSet zeros_like(const ParamSet& other) {
        ParamSet p;
        p.W1 = MatrixXd::Zero(other.W1.rows(), other.W1.cols());
        p.b1 = VectorXd::Zero(other.b1.size());
        p.W2 = MatrixXd::Zero(other.W2.rows(), other.W2.cols());
        p.b2 = VectorXd::Zero(other.b2.size());
        return p;
    }
    bool same_shape(const ParamSet& other) const {
        return W1.rows() == other.W1.rows() && W1.cols() == other.W1.cols() &&
               b1.size() == other.b1.size() && W2.rows() == other.W2.rows() &&
               W2.cols() == other.W2.cols() && b2.size() == other.b2.size();
    }
};

template <class F>
void for_each_array(ParamSet& p, F&& f) {
    f("W1", p.W1);
    f("b1", p.b1);
    f("W2", p.W2);
    f("b2", p.b2);
}

// One hidden tanh layer into a sigmoid output block that the mask prunes
// and a division normalizes:
//   h1 = tanh(W1 [x; omega] + b1)
//   y  = (sigmoid(W2 h1 + b2) .* mask) / sum(...)
struct PolicyNet {
    int feature_dim = 0;
    int option_count = 0;
    int action_count = 0;
    int hidden = 100;
    ParamSet p;

    int input_dim() const { return feature_dim + option_count; }
    OutputLayout layout() const { return OutputLayout{option_count, action_count}; }
    int output_dim() const { return layout().size(); }
};

// Same trunk, scalar linear output; predicts the cumulative reward
// obtainable from (x, omega).
struct ValueNet {
    int feature_dim = 0;
    int option_count = 0;
    int hidden = 100;
    ParamSet p;

    int input_dim() const { return feature_dim + option_count; }
};

namespace detail {

inline void init_params(ParamSet& p, int in_dim, int out_dim, int hidden, Rng& rng) {
    auto u = [&](double scale) { return (2.0 * uniform01(rng) - 1.0) * scale; };
    p.W1.resize(hidden, in_dim);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (int r = 0; r < hidden; ++r)
        for (int c = 0; c < in_dim; ++c) p.W1(r, c) = u(s1);
    p.b1 = VectorXd::Zero(hidden);
    p.W2.resize(out_dim, hidden);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (int r = 0; r < out_dim; ++r)
        for (int c = 0; c < hidden; ++c) p.W2(r, c) = u(s2);
    p.b2 = VectorXd::Zero(out_dim);
}

inline VectorXd assemble_input(const PolicyNet& net, const std::vector<double>& features,
                               const std::vector<double>& option_onehot) {
    if (static_cast<int>(features.size()) != net.feature_dim ||
        static_cast<int>(option_onehot.size()) != net.option_count)
        throw ShapeMismatch("policy forward: input dimensions do not match the net");
    VectorXd u(net.input_dim());
    for (int i = 0; i < net.feature_dim; ++i) u[i] = features[i];
    for (int i = 0; i < net.option_count; ++i) u[net.feature_dim + i] = option_onehot[i];
    return u;
}

struct ForwardPass {
    VectorXd input;
    VectorXd h1;
    VectorXd s;    // sigmoid activations before masking
    VectorXd y;    // masked, normalized output
    double sum = 0.0;
};

inline ForwardPass policy_forward_pass(const PolicyNet& net, const VectorXd& input,
                                       const MaskVector& mask) {
    if (static_cast<int>(mask.entries.size()) != net.output_dim())
        throw ShapeMismatch("policy forward: mask length does not match the net");
    if (mask.none_set()) throw DegenerateMask();
    ForwardPass f;
    f.input = input;
    f.h1 = (net.p.W1 * input + net.p.b1).array().tanh();
    VectorXd z = net.p.W2 * f.h1 + net.p.b2;
    f.s = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    f.y = VectorXd::Zero(net.output_dim());
    for (int j = 0; j < net.output_dim(); ++j)
        if (mask.entries[j]) f.sum += f.s[j];
    for (int j = 0; j < net.output_dim(); ++j)
        if (mask.entries[j]) f.y[j] = f.s[j] / f.sum;
    return f;
}

} // namespace detail

inline PolicyNet make_policy_net(int feature_dim, int option_count, int action_count,
                                 int hidden, Rng& rng) {
    PolicyNet net;
    net.feature_dim = feature_dim;
    net.option_count = option_count;
    net.action_count = action_count;
    net.hidden = hidden;
    detail::init_params(net.p, net.input_dim(), net.output_dim(), hidden, rng);
    return net;
}

inline ValueNet make_value_net(int feature_dim, int option_count, int hidden, Rng& rng) {
    ValueNet net;
    net.feature_dim = feature_dim;
    net.option_count = option_count;
    net.hidden = hidden;
    detail::init_params(net.p, net.input_dim(), 1, hidden, rng);
    return net;
}

inline std::vector<double> forward(const PolicyNet& net, const std::vector<double>& features,
                                   const std::vector<double>& option_onehot,
                                   const MaskVector& mask) {
    const VectorXd input = detail::assemble_input(net, features, option_onehot);
    const detail::ForwardPass f = detail::policy_forward_pass(net, input, mask);
    return std::vector<double>(f.y.data(), f.y.data() + f.y.size());
}

inline double value_forward(const ValueNet& net, const std::vector<double>& features,
                            const std::vector<double>& option_onehot) {
    if (static_cast<int>(features.size()) != net.feature_dim ||
        static_cast<int>(option_onehot.size()) != net.option_count)
        throw ShapeMismatch("value forward: input dimensions do not match the net");
    VectorXd u(net.input_dim());
    for (int i = 0; i < net.feature_dim; ++i) u[i] = features[i];
    for (int i = 0; i < net.option_count; ++i) u[net.feature_dim + i] = option_onehot[i];
    const VectorXd h1 = (net.p.W1 * u + net.p.b1).array().tanh();
    return (net.p.W2 * h1 + net.p.b2)[0];
}

inline std::vector<double> option_onehot(int option_count, OptionId context) {
    std::vector<double> v(option_count, 0.0);
    if (context != kNoOption) v[context] = 1.0;
    return v;
}

namespace detail {

inline void check_alignment(const Trajectory& traj, const std::vector<double>& returns,
                            const std::vector<double>& baselines) {
    if (returns.size() != traj.steps.size() || baselines.size() != traj.steps.size())
        throw MisalignedInput("returns/baselines must align with trajectory steps");
}

// Shared body for the loss value and its analytic gradients. The loss is
//   L = sum_t [ -(R_t - V_t) log y_t[choice_t] - entropy_coef * H(y_t) ]
// over the decisions the network actually sampled, with the baseline
// treated as a constant.
inline double pg_accumulate(const PolicyNet& net, const Trajectory& traj,
                            const std::vector<double>& returns,
                            const std::vector<double>& baselines, double entropy_coef,
                            ParamSet* grads) {
    check_alignment(traj, returns, baselines);
    double loss = 0.0;
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const DecisionRecord& step = traj.steps[t];
        if (!step.learned) continue;
        const VectorXd input = assemble_input(
            net, step.obs.features, option_onehot(net.option_count, step.context));
        const ForwardPass f = policy_forward_pass(net, input, step.mask);
        const double advantage = returns[t] - baselines[t];
        if (step.mask.entries[step.choice] == 0 || f.y[step.choice] <= 0.0)
            throw Error("trajectory choice was masked at evaluation time");
        loss -= advantage * std::log(f.y[step.choice]);

        double entropy = 0.0;
        if (entropy_coef != 0.0) {
            for (int j = 0; j < net.output_dim(); ++j)
                if (f.y[j] > 0.0) entropy -= f.y[j] * std::log(f.y[j]);
            loss -= entropy_coef * entropy;
        }
        if (!grads) continue;

        VectorXd gz = VectorXd::Zero(net.output_dim());
        for (int j = 0; j < net.output_dim(); ++j) {
            if (!step.mask.entries[j]) continue;
            const double sig_grad = f.s[j] * (1.0 - f.s[j]);
            // d(-A log y_c)/dz_j through the choice and the normalizer.
            double g = advantage * sig_grad / f.sum;
            if (j == step.choice) g -= advantage * (1.0 - f.s[j]);
            // d(-coef * H)/dz_j with dH/ds_j = -(H + log y_j) / S.
            if (entropy_coef != 0.0)
                g += entropy_coef * sig_grad * (entropy + std::log(f.y[j])) / f.sum;
            gz[j] = g;
        }
        grads->W2.noalias() += gz * f.h1.transpose();
        grads->b2 += gz;
        const VectorXd gh = net.p.W2.transpose() * gz;
        const VectorXd ga =
            ((1.0 - f.h1.array().square()) * gh.array()).matrix();
        grads->W1.noalias() += ga * f.input.transpose();
        grads->b1 += ga;
    }
    return loss;
}

} // namespace detail

inline double pg_loss(const PolicyNet& net, const Trajectory& traj,
                      const std::vector<double>& returns,
                      const std::vector<double>& baselines, double entropy_coef = 0.0) {
    return detail::pg_accumulate(net, traj, returns, baselines, entropy_coef, nullptr);
}

inline std::pair<double, ParamSet> pg_loss_and_grads(const PolicyNet& net,
                                                     const Trajectory& traj,
                                                     const std::vector<double>& returns,
                                                     const std::vector<double>& baselines,
                                                     double entropy_coef = 0.0) {
    ParamSet grads = ParamSet::zeros_like(net.p);
    const double loss =
        detail::pg_accumulate(net, traj, returns, baselines, entropy_coef, &grads);
    return {loss, std::move(grads)};
}

// Max relative disagreement between the analytic gradients and central
// finite differences of the same loss.
inline double grad_check(const PolicyNet& net, const Trajectory& traj,
                         const std::vector<double>& returns,
                         const std::vector<double>& baselines, double fd_step,
                         double entropy_coef = 0.0) {
    if (fd_step <= 0.0) throw Error("grad_check: fd_step must be positive");
    const ParamSet analytic =
        pg_loss_and_grads(net, traj, returns, baselines, entropy_coef).second;
    PolicyNet probe = net;
    double max_rel = 0.0;
    auto probe_array = [&](auto& values, const auto& grad) {
        for (int r = 0; r < values.rows(); ++r) {
            for (int c = 0; c < values.cols(); ++c) {
                const double saved = values(r, c);
                values(r, c) = saved + fd_step;
                const double up = pg_loss(probe, traj, returns, baselines, entropy_coef);
                values(r, c) = saved - fd_step;
                const double down = pg_loss(probe, traj, returns, baselines, entropy_coef);
                values(r, c) = saved;
                const double fd = (up - down) / (2.0 * fd_step);
                const double rel =
                    std::abs(grad(r, c) - fd) / std::max(1e-8, std::abs(fd));
                max_rel = std::max(max_rel, rel);
            }
        }
    };
    probe_array(probe.p.W1, analytic.W1);
    probe_array(probe.p.b1, analytic.b1);
    probe_array(probe.p.W2, analytic.W2);
    probe_array(probe.p.b2, analytic.b2);
    return max_rel;
}

struct AdamState {
    ParamSet m;
    ParamSet v;
    long step_count = 0;
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_params(const ParamSet& p, double alpha = 1e-3, double beta1 = 0.9,
                                double beta2 = 0.999, double epsilon = 1e-8) {
        AdamState s;
        s.m = ParamSet::zeros_like(p);
        s.v = ParamSet::zeros_like(p);
        s.alpha = alpha;
        s.beta1 = beta1;
        s.beta2 = beta2;
        s.epsilon = epsilon;
        return s;
    }
};

inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
    if (!params.same_shape(grads) || !params.same_shape(state.m))
        throw ShapeMismatch("adam_step: parameter, gradient and state shapes differ");
    state.step_count += 1;
    const double correct1 = 1.0 - std::pow(state.beta1, state.step_count);
    const double correct2 = 1.0 - std::pow(state.beta2, state.step_count);
    auto update = [&](MatrixXd& theta, const MatrixXd& g, MatrixXd& m, MatrixXd& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        const MatrixXd m_hat = m / correct1;
        const MatrixXd v_hat = v / correct2;
        theta -= state.alpha *
                 (m_hat.array() / (v_hat.array().sqrt() + state.epsilon)).matrix();
    };
    update(params.W1, grads.W1, state.m.W1, state.v.W1);
    update(params.W2, grads.W2, state.m.W2, state.v.W2);
    auto update_vec = [&](VectorXd& theta, const VectorXd& g, VectorXd& m, VectorXd& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        const VectorXd m_hat = m / correct1;
        const VectorXd v_hat = v / correct2;
        theta -= state.alpha *
                 (m_hat.array() / (v_hat.array().sqrt() + state.epsilon)).matrix();
    };
    update_vec(params.b1, grads.b1, state.m.b1, state.v.b1);
    update_vec(params.b2, grads.b2, state.m.b2, state.v.b2);
}

// --- value regression ----------------------------------------------------

struct ValueBatch {
    std::vector<std::vector<double>> features;
    std::vector<std::vector<double>> option_onehots;
    std::vector<double> targets;
};

inline std::pair<double, ParamSet> value_loss_and_grads(const ValueNet& net,
                                                        const ValueBatch& batch) {
    const std::size_t count = batch.targets.size();
    if (batch.features.size() != count || batch.option_onehots.size() != count)
        throw MisalignedInput("value batch sequences have different lengths");
    ParamSet grads = ParamSet::zeros_like(net.p);
    if (count == 0) return {0.0, std::move(grads)};
    double loss = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        VectorXd u(net.input_dim());
        for (int k = 0; k < net.feature_dim; ++k) u[k] = batch.features[i][k];
        for (int k = 0; k < net.option_count; ++k)
            u[net.feature_dim + k] = batch.option_onehots[i][k];
        const VectorXd h1 = (net.p.W1 * u + net.p.b1).array().tanh();
        const double prediction = (net.p.W2 * h1 + net.p.b2)[0];
        const double err = prediction - batch.targets[i];
        loss += err * err / static_cast<double>(count);
        const double gout = 2.0 * err / static_cast<double>(count);
        grads.W2.noalias() += gout * h1.transpose();
        grads.b2[0] += gout;
        const VectorXd gh = gout * net.p.W2.row(0).transpose();
        const VectorXd ga = ((1.0 - h1.array().square()) * gh.array()).matrix();
        grads.W1.noalias() += ga * u.transpose();
        grads.b1 += ga;
    }
    return {loss, std::move(grads)};
}

// One mean-squared-error step on the monte-carlo targets.
inline void value_update(ValueNet& net, const ValueBatch& batch, AdamState& state) {
    auto [loss, grads] = value_loss_and_grads(net, batch);
    (void)loss;
    adam_step(net.p, grads, state);
}

inline double value_grad_check(const ValueNet& net, const ValueBatch& batch,
                               double fd_step) {
    if (fd_step <= 0.0) throw Error("value_grad_check: fd_step must be positive");
    const ParamSet analytic = value_loss_and_grads(net, batch).second;
    ValueNet probe = net;
    double max_rel = 0.0;
    auto probe_array = [&](auto& values, const auto& grad) {
        for (int r = 0; r < values.rows(); ++r) {
            for (int c = 0; c < values.cols(); ++c) {
                const double saved = values(r, c);
                values(r, c) = saved + fd_step;
                const double up = value_loss_and_grads(probe, batch).first;
                values(r, c) = saved - fd_step;
                const double down = value_loss_and_grads(probe, batch).first;
                values(r, c) = saved;
                const double fd = (up - down) / (2.0 * fd_step);
                const double rel =
                    std::abs(grad(r, c) - fd) / std::max(1e-8, std::abs(fd));
                max_rel = std::max(max_rel, rel);
            }
        }
    };
    probe_array(probe.p.W1, analytic.W1);
    probe_array(probe.p.b1, analytic.b1);
    probe_array(probe.p.W2, analytic.W2);
    probe_array(probe.p.b2, analytic.b2);
    return max_rel;
}

// --- checkpoints ----------------------------------------------------------
//
// Versioned JSON: a flat list of named arrays, each with an explicit
// [rows, cols] shape header and row-major data.

inline nlohmann::json params_to_json(const ParamSet& params) {
    nlohmann::json arrays = nlohmann::json::array();
    ParamSet copy = params;
    for_each_array(copy, [&](const char* name, const auto& m) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = {m.rows(), m.cols()};
        nlohmann::json data = nlohmann::json::array();
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
        entry["data"] = std::move(data);
        arrays.push_back(std::move(entry));
    });
    return arrays;
}

inline void params_from_json(const nlohmann::json& arrays, ParamSet& params) {
    for (const auto& entry : arrays) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<long>>();
        const auto data = entry.at("data").get<std::vector<double>>();
        if (shape.size() != 2 || static_cast<long>(data.size()) != shape[0] * shape[1])
            throw Error("checkpoint: array " + name + " has inconsistent shape");
        MatrixXd m(shape[0], shape[1]);
        for (long r = 0; r < shape[0]; ++r)
            for (long c = 0; c < shape[1]; ++c) m(r, c) = data[r * shape[1] + c];
        if (name == "W1") params.W1 = m;
        else if (name == "b1") params.b1 = m.col(0);
        else if (name == "b2") params.b2 = m.col(0);
        else if (name == "W2") params.W2 = m;
        else throw Error("checkpoint: unknown array " + name);
    }
}

inline void save_checkpoint(const PolicyNet& policy, const ValueNet& value,
                            const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["policy"] = {{"feature_dim", policy.feature_dim},
                   {"option_count", policy.option_count},
                   {"action_count", policy.action_count},
                   {"hidden", policy.hidden},
                   {"arrays", params_to_json(policy.p)}};
    j["value"] = {{"feature_dim", value.feature_dim},
                  {"option_count", value.option_count},
                  {"hidden", value.hidden},
                  {"arrays", params_to_json(value.p)}};
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump() << "\n";
}

inline void load_checkpoint(PolicyNet& policy, ValueNet& value, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.at("version").get<int>() != 1) throw Error("checkpoint: unsupported version");
    const auto& jp = j.at("policy");
    policy.feature_dim = jp.at("feature_dim").get<int>();
    policy.option_count = jp.at("option_count").get<int>();
    policy.action_count = jp.at("action_count").get<int>();
    policy.hidden = jp.at("hidden").get<int>();
    params_from_json(jp.at("arrays"), policy.p);
    const auto& jv = j.at("value");
    value.feature_dim = jv.at("feature_dim").get<int>();
    value.option_count = jv.at("option_count").get<int>();
    value.hidden = jv.at("hidden").get<int>();
    params_from_json(jv.at("arrays"), value.p);
}

} // namespace ooi
