#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>

#include "ooi/policy_net.hpp"

using namespace ooi;

namespace {

// Independent scalar evaluation of the forward equations, plain loops and
// std::tanh/exp only.
std::vector<double> scalar_forward(const PolicyNet& net, const std::vector<double>& x,
                                   const std::vector<double>& onehot,
                                   const MaskVector& mask) {
    const int in = net.input_dim();
    std::vector<double> u(in);
    for (int i = 0; i < net.feature_dim; ++i) u[i] = x[i];
    for (int i = 0; i < net.option_count; ++i) u[net.feature_dim + i] = onehot[i];
    std::vector<double> h1(net.hidden);
    for (int r = 0; r < net.hidden; ++r) {
        double acc = net.p.b1[r];
        for (int c = 0; c < in; ++c) acc += net.p.W1(r, c) * u[c];
        h1[r] = std::tanh(acc);
    }
    const int out = net.output_dim();
    std::vector<double> yhat(out);
    double total = 0.0;
    for (int r = 0; r < out; ++r) {
        double acc = net.p.b2[r];
        for (int c = 0; c < net.hidden; ++c) acc += net.p.W2(r, c) * h1[c];
        yhat[r] = (1.0 / (1.0 + std::exp(-acc))) * mask.entries[r];
        total += yhat[r];
    }
    for (double& v : yhat) v /= total;
    return yhat;
}

MaskVector all_ones_mask(int option_count, int action_count) {
    MaskVector mask;
    mask.layout = OutputLayout{option_count, action_count};
    mask.entries.assign(mask.layout.size(), 1);
    return mask;
}

MaskVector random_mask(Rng& rng, int option_count, int action_count) {
    if (bernoulli(rng, 0.5)) {
        std::vector<OptionId> avail;
        for (int i = 0; i < option_count; ++i)
            if (bernoulli(rng, 0.5)) avail.push_back(i);
        if (!avail.empty())
            return build_mask(TopLevelContext{}, avail, action_count, option_count);
    }
    return build_mask(InOptionContext{}, {}, action_count, option_count);
}

std::vector<double> random_features(Rng& rng, int n) {
    std::vector<double> v(n);
    for (double& x : v) x = 2.0 * uniform01(rng) - 1.0;
    return v;
}

Trajectory random_trajectory(Rng& rng, const PolicyNet& net, int length) {
    const OutputLayout layout = net.layout();
    Trajectory traj;
    for (int t = 0; t < length; ++t) {
        DecisionRecord rec;
        rec.learned = true;
        rec.obs.features = random_features(rng, net.feature_dim);
        rec.mask = random_mask(rng, net.option_count, net.action_count);
        const bool top_level = rec.mask.entries[layout.action_index(kContRow, 0)] == 0;
        rec.context = top_level ? kNoOption : uniform_int(rng, 0, net.option_count - 1);
        std::vector<int> open;
        for (int i = 0; i < layout.size(); ++i)
            if (rec.mask.entries[i]) open.push_back(i);
        rec.choice = open[uniform_int(rng, 0, static_cast<int>(open.size()) - 1)];
        rec.env_stepped = !top_level;
        rec.reward = 2.0 * uniform01(rng) - 1.0;
        traj.steps.push_back(std::move(rec));
    }
    return traj;
}

} // namespace

TEST_CASE("zero weights and an open mask give the uniform distribution") {
    Rng rng(1);
    PolicyNet net = make_policy_net(3, 2, 3, 16, rng);
    net.p.W1.setZero();
    net.p.b1.setZero();
    net.p.W2.setZero();
    net.p.b2.setZero();
    const MaskVector mask = all_ones_mask(2, 3);
    const auto y = forward(net, {0.3, -0.2, 0.9}, {0.0, 0.0}, mask);
    for (double v : y) CHECK(v == Catch::Approx(1.0 / 10.0).margin(1e-12));
}

TEST_CASE("a single open entry receives the whole mass") {
    Rng rng(2);
    PolicyNet net = make_policy_net(2, 2, 3, 8, rng);
    MaskVector mask;
    mask.layout = net.layout();
    mask.entries.assign(mask.layout.size(), 0);
    mask.entries[7] = 1;
    const auto y = forward(net, {0.5, 0.5}, {1.0, 0.0}, mask);
    for (int i = 0; i < static_cast<int>(y.size()); ++i)
        CHECK(y[i] == (i == 7 ? 1.0 : 0.0));
}

TEST_CASE("forward matches an independent scalar evaluation") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        PolicyNet net = make_policy_net(4, 2, 3, 12, rng);
        const auto x = random_features(rng, 4);
        std::vector<double> onehot(2, 0.0);
        MaskVector mask = random_mask(rng, 2, 3);
        if (mask.entries[mask.layout.action_index(kContRow, 0)]) {
            onehot[uniform_int(rng, 0, 1)] = 1.0;
        }
        const auto got = forward(net, x, onehot, mask);
        const auto want = scalar_forward(net, x, onehot, mask);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == Catch::Approx(want[i]).margin(1e-12));
    }
}

TEST_CASE("in-option output is zero on option entries and positive on actions") {
    Rng rng(4);
    PolicyNet net = make_policy_net(3, 2, 3, 10, rng);
    const MaskVector mask = build_mask(InOptionContext{}, {}, 3, 2);
    const auto y = forward(net, random_features(rng, 3), {1.0, 0.0}, mask);
    const OutputLayout layout = net.layout();
    for (int row = 0; row < 2; ++row) {
        for (int o = 0; o < 2; ++o) CHECK(y[layout.option_index(row, o)] == 0.0);
        for (int a = 0; a < 3; ++a) CHECK(y[layout.action_index(row, a)] > 0.0);
    }
}

TEST_CASE("forward output is a valid masked distribution under fuzzing") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int feature_dim = uniform_int(rng, 1, 6);
        const int option_count = uniform_int(rng, 1, 4);
        const int action_count = uniform_int(rng, 1, 5);
        PolicyNet net =
            make_policy_net(feature_dim, option_count, action_count, 8, rng);
        const MaskVector mask = random_mask(rng, option_count, action_count);
        std::vector<double> onehot(option_count, 0.0);
        const auto y = forward(net, random_features(rng, feature_dim), onehot, mask);
        double sum = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            CHECK(y[i] >= 0.0);
            if (!mask.entries[i]) CHECK(y[i] == 0.0);
            sum += y[i];
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("weights feeding only masked outputs cannot change the output") {
    Rng rng(6);
    PolicyNet net = make_policy_net(3, 2, 3, 10, rng);
    const MaskVector mask = build_mask(InOptionContext{}, {}, 3, 2);
    const auto x = random_features(rng, 3);
    const std::vector<double> onehot = {0.0, 1.0};
    const auto before = forward(net, x, onehot, mask);
    for (int j = 0; j < net.output_dim(); ++j) {
        if (mask.entries[j]) continue;
        net.p.W2.row(j).setZero();
        net.p.b2[j] = 0.0;
    }
    const auto after = forward(net, x, onehot, mask);
    CHECK(before == after);
}

TEST_CASE("an all-zero mask is rejected") {
    Rng rng(7);
    PolicyNet net = make_policy_net(2, 1, 2, 4, rng);
    MaskVector mask;
    mask.layout = net.layout();
    mask.entries.assign(mask.layout.size(), 0);
    CHECK_THROWS_AS(forward(net, {0.0, 0.0}, {0.0}, mask), DegenerateMask);
}

TEST_CASE("zero advantages give zero loss and zero gradients") {
    Rng rng(8);
    PolicyNet net = make_policy_net(3, 2, 3, 6, rng);
    Trajectory traj = random_trajectory(rng, net, 7);
    const std::vector<double> returns(traj.steps.size(), 1.25);
    auto [loss, grads] = pg_loss_and_grads(net, traj, returns, returns);
    CHECK(loss == 0.0);
    CHECK(grads.W1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.b1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.W2.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.b2.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad_check(net, traj, returns, returns, 1e-5) == 0.0);
}

TEST_CASE("a single decision with unit advantage scores -log y") {
    Rng rng(9);
    PolicyNet net = make_policy_net(2, 2, 2, 6, rng);
    Trajectory traj = random_trajectory(rng, net, 1);
    const auto y = forward(net, traj.steps[0].obs.features,
                           option_onehot(2, traj.steps[0].context), traj.steps[0].mask);
    const std::vector<double> returns = {1.0};
    const std::vector<double> baselines = {0.0};
    const double loss = pg_loss(net, traj, returns, baselines);
    CHECK(loss == Catch::Approx(-std::log(y[traj.steps[0].choice])).margin(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(10);
    for (int trial = 0; trial < 5; ++trial) {
        PolicyNet net = make_policy_net(3, 2, 3, 4, rng);
        Trajectory traj = random_trajectory(rng, net, 5);
        std::vector<double> returns(traj.steps.size());
        std::vector<double> baselines(traj.steps.size());
        for (auto& r : returns) r = 4.0 * uniform01(rng) - 2.0;
        for (auto& b : baselines) b = 4.0 * uniform01(rng) - 2.0;
        CHECK(grad_check(net, traj, returns, baselines, 1e-5) < 1e-4);
    }
}

TEST_CASE("entropy regularized gradients also pass the finite difference check") {
    Rng rng(11);
    PolicyNet net = make_policy_net(3, 2, 3, 4, rng);
    Trajectory traj = random_trajectory(rng, net, 5);
    std::vector<double> returns(traj.steps.size(), 0.7);
    std::vector<double> baselines(traj.steps.size(), -0.1);
    CHECK(grad_check(net, traj, returns, baselines, 1e-5, 0.05) < 1e-4);
}

TEST_CASE("a coarse finite difference step is less accurate than a fine one") {
    Rng rng(12);
    PolicyNet net = make_policy_net(3, 2, 3, 4, rng);
    net.p.W1 *= 3.0; // push activations into the curved regime
    net.p.W2 *= 3.0;
    Trajectory traj = random_trajectory(rng, net, 5);
    std::vector<double> returns(traj.steps.size(), 1.5);
    std::vector<double> baselines(traj.steps.size(), 0.0);
    const double fine = grad_check(net, traj, returns, baselines, 1e-5);
    const double coarse = grad_check(net, traj, returns, baselines, 1e-2);
    CHECK(coarse > fine);
}

TEST_CASE("misaligned returns are rejected") {
    Rng rng(13);
    PolicyNet net = make_policy_net(2, 1, 2, 4, rng);
    Trajectory traj = random_trajectory(rng, net, 3);
    CHECK_THROWS_AS(pg_loss(net, traj, {1.0}, {0.0}), MisalignedInput);
}

TEST_CASE("adam leaves parameters alone on a zero gradient") {
    Rng rng(14);
    PolicyNet net = make_policy_net(2, 1, 2, 4, rng);
    const ParamSet before = net.p;
    AdamState state = AdamState::for_params(net.p);
    adam_step(net.p, ParamSet::zeros_like(net.p), state);
    CHECK(state.step_count == 1);
    CHECK(net.p.W1 == before.W1);
    CHECK(net.p.b1 == before.b1);
    CHECK(net.p.W2 == before.W2);
    CHECK(net.p.b2 == before.b2);
}

TEST_CASE("the first adam step is minus alpha times the gradient sign") {
    Rng rng(15);
    PolicyNet net = make_policy_net(2, 1, 2, 4, rng);
    const ParamSet before = net.p;
    ParamSet grads = ParamSet::zeros_like(net.p);
    grads.W1.setConstant(0.37);
    grads.b1.setConstant(-2.1);
    AdamState state = AdamState::for_params(net.p, 1e-3);
    adam_step(net.p, grads, state);
    const MatrixXd dw = net.p.W1 - before.W1;
    for (int r = 0; r < dw.rows(); ++r)
        for (int c = 0; c < dw.cols(); ++c)
            CHECK(dw(r, c) == Catch::Approx(-1e-3).epsilon(1e-4));
    const VectorXd db = net.p.b1 - before.b1;
    for (int i = 0; i < db.size(); ++i) CHECK(db[i] == Catch::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("under a constant gradient the step size approaches alpha") {
    Rng rng(16);
    PolicyNet net = make_policy_net(2, 1, 2, 4, rng);
    ParamSet grads = ParamSet::zeros_like(net.p);
    grads.W2.setConstant(0.8);
    AdamState state = AdamState::for_params(net.p, 1e-3);
    MatrixXd previous = net.p.W2;
    for (int t = 0; t < 500; ++t) {
        previous = net.p.W2;
        adam_step(net.p, grads, state);
    }
    const MatrixXd step = net.p.W2 - previous;
    for (int r = 0; r < step.rows(); ++r)
        for (int c = 0; c < step.cols(); ++c)
            CHECK(step(r, c) == Catch::Approx(-1e-3).epsilon(1e-3));
}

TEST_CASE("adam rejects mismatched shapes") {
    Rng rng(17);
    PolicyNet net = make_policy_net(2, 1, 2, 4, rng);
    PolicyNet other = make_policy_net(3, 1, 2, 4, rng);
    AdamState state = AdamState::for_params(net.p);
    CHECK_THROWS_AS(adam_step(net.p, other.p, state), ShapeMismatch);
}

TEST_CASE("value net is untouched when targets equal predictions") {
    Rng rng(18);
    ValueNet net = make_value_net(3, 2, 4, rng);
    ValueBatch batch;
    for (int i = 0; i < 6; ++i) {
        batch.features.push_back({uniform01(rng), uniform01(rng), uniform01(rng)});
        batch.option_onehots.push_back({0.0, 1.0});
        batch.targets.push_back(
            value_forward(net, batch.features.back(), batch.option_onehots.back()));
    }
    const ParamSet before = net.p;
    AdamState state = AdamState::for_params(net.p);
    value_update(net, batch, state);
    CHECK(net.p.W1 == before.W1);
    CHECK(net.p.W2 == before.W2);
}

TEST_CASE("repeated value updates on a fixed batch never increase the error") {
    Rng rng(19);
    ValueNet net = make_value_net(2, 1, 4, rng);
    ValueBatch batch;
    for (int i = 0; i < 8; ++i) {
        batch.features.push_back({uniform01(rng), uniform01(rng)});
        batch.option_onehots.push_back({bernoulli(rng, 0.5) ? 1.0 : 0.0});
        batch.targets.push_back(4.0 * uniform01(rng) - 2.0);
    }
    AdamState state = AdamState::for_params(net.p, 1e-3);
    double previous = value_loss_and_grads(net, batch).first;
    for (int t = 0; t < 100; ++t) {
        value_update(net, batch, state);
        const double loss = value_loss_and_grads(net, batch).first;
        CHECK(loss <= previous + 1e-12);
        previous = loss;
    }
}

TEST_CASE("a single datum is fit to within 1e-2") {
    Rng rng(20);
    ValueNet net = make_value_net(2, 1, 4, rng);
    ValueBatch batch;
    batch.features.push_back({0.4, -0.3});
    batch.option_onehots.push_back({1.0});
    batch.targets.push_back(3.5);
    AdamState state = AdamState::for_params(net.p, 1e-2);
    for (int t = 0; t < 2000; ++t) value_update(net, batch, state);
    const double prediction =
        value_forward(net, batch.features[0], batch.option_onehots[0]);
    CHECK(prediction == Catch::Approx(3.5).margin(1e-2));
}

TEST_CASE("value gradients match finite differences") {
    Rng rng(21);
    ValueNet net = make_value_net(3, 2, 4, rng);
    ValueBatch batch;
    for (int i = 0; i < 5; ++i) {
        batch.features.push_back({uniform01(rng), uniform01(rng), uniform01(rng)});
        std::vector<double> onehot(2, 0.0);
        if (bernoulli(rng, 0.7)) onehot[uniform_int(rng, 0, 1)] = 1.0;
        batch.option_onehots.push_back(onehot);
        batch.targets.push_back(2.0 * uniform01(rng) - 1.0);
    }
    CHECK(value_grad_check(net, batch, 1e-5) < 1e-4);
}

TEST_CASE("value batches with different lengths are rejected") {
    Rng rng(22);
    ValueNet net = make_value_net(2, 1, 4, rng);
    ValueBatch batch;
    batch.features.push_back({0.0, 0.0});
    batch.option_onehots.push_back({0.0});
    CHECK_THROWS_AS(value_loss_and_grads(net, batch), MisalignedInput);
}

TEST_CASE("checkpoints restore parameters bit for bit") {
    Rng rng(23);
    PolicyNet policy = make_policy_net(4, 2, 3, 6, rng);
    ValueNet value = make_value_net(4, 2, 6, rng);
    const std::string path = "checkpoint_roundtrip_test.json";
    save_checkpoint(policy, value, path);
    Rng other(99);
    PolicyNet policy2 = make_policy_net(4, 2, 3, 6, other);
    ValueNet value2 = make_value_net(4, 2, 6, other);
    load_checkpoint(policy2, value2, path);
    std::remove(path.c_str());
    CHECK(policy2.p.W1 == policy.p.W1);
    CHECK(policy2.p.b1 == policy.p.b1);
    CHECK(policy2.p.W2 == policy.p.W2);
    CHECK(policy2.p.b2 == policy.p.b2);
    CHECK(value2.p.W1 == value.p.W1);
    CHECK(value2.p.W2 == value.p.W2);
}

TEST_CASE("identical seeds give identical parameter trajectories") {
    auto train = [](std::uint64_t seed) {
        Rng rng(seed);
        PolicyNet net = make_policy_net(3, 2, 3, 6, rng);
        AdamState state = AdamState::for_params(net.p);
        Rng data_rng(seed + 1);
        for (int episode = 0; episode < 20; ++episode) {
            Trajectory traj = random_trajectory(data_rng, net, 4);
            std::vector<double> returns(traj.steps.size(), 1.0);
            std::vector<double> baselines(traj.steps.size(), 0.0);
            auto [loss, grads] = pg_loss_and_grads(net, traj, returns, baselines);
            (void)loss;
            adam_step(net.p, grads, state);
        }
        return net;
    };
    const PolicyNet a = train(42);
    const PolicyNet b = train(42);
    CHECK(a.p.W1 == b.p.W1);
    CHECK(a.p.b1 == b.p.b1);
    CHECK(a.p.W2 == b.p.W2);
    CHECK(a.p.b2 == b.p.b2);
}
