#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "ooi/harness.hpp"

using namespace ooi;

namespace {

RunRecord record_with(std::vector<double> returns) {
    RunRecord r;
    r.returns = std::move(returns);
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST_CASE("identical runs aggregate with zero deviation") {
    std::vector<RunRecord> records(3, record_with({1.0, 2.0, 3.0}));
    const Curve curve = aggregate(records);
    REQUIRE(curve.size() == 3);
    for (std::size_t e = 0; e < 3; ++e) {
        CHECK(curve[e].episode == static_cast<int>(e));
        CHECK(curve[e].mean == static_cast<double>(e + 1));
        CHECK(curve[e].std_dev == 0.0);
    }
}

TEST_CASE("two runs at 0 and 2 give mean 1 and population std 1") {
    const std::vector<RunRecord> records = {record_with({0.0}), record_with({2.0})};
    const Curve curve = aggregate(records);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].mean == 1.0);
    CHECK(curve[0].std_dev == 1.0);
}

TEST_CASE("twenty uniform runs stay near one half") {
    Rng rng(3115);
    std::vector<RunRecord> records;
    for (int r = 0; r < 20; ++r) {
        RunRecord rec;
        for (int e = 0; e < 50; ++e) rec.returns.push_back(uniform01(rng));
        records.push_back(std::move(rec));
    }
    for (const CurvePoint& p : aggregate(records))
        CHECK(p.mean == Catch::Approx(0.5).margin(0.1));
}

TEST_CASE("aggregation requires at least one successful run") {
    CHECK_THROWS_AS(aggregate({}), Error);
    RunRecord failed;
    failed.error = "boom";
    CHECK_THROWS_AS(aggregate({failed}), Error);
}

TEST_CASE("failed runs are excluded from the aggregate") {
    RunRecord failed;
    failed.error = "boom";
    const std::vector<RunRecord> records = {record_with({4.0}), failed};
    const Curve curve = aggregate(records);
    CHECK(curve[0].mean == 4.0);
    CHECK(curve[0].std_dev == 0.0);
}

TEST_CASE("smoothing is a trailing moving average") {
    const std::vector<RunRecord> records = {record_with({0.0, 2.0, 4.0, 6.0})};
    const Curve curve = aggregate(records, 2);
    CHECK(curve[0].mean == 0.0);
    CHECK(curve[1].mean == 1.0);
    CHECK(curve[2].mean == 3.0);
    CHECK(curve[3].mean == 5.0);
}

TEST_CASE("csv output matches the documented format") {
    Curve curve = {{0, 8.2, 0.0}};
    const std::string path = "curve_format_test.csv";
    emit_csv(curve, path);
    CHECK(slurp(path) == "episode,mean,std\n0,8.2,0\n");
    std::remove(path.c_str());
}

TEST_CASE("csv round-trips exactly") {
    Rng rng(7);
    Curve curve;
    for (int e = 0; e < 200; ++e)
        curve.push_back({e, 20.0 * uniform01(rng) - 10.0, uniform01(rng)});
    const std::string path = "curve_roundtrip_test.csv";
    emit_csv(curve, path);
    const Curve loaded = read_csv(path);
    std::remove(path.c_str());
    REQUIRE(loaded.size() == curve.size());
    for (std::size_t e = 0; e < curve.size(); ++e) {
        CHECK(loaded[e].episode == curve[e].episode);
        CHECK(loaded[e].mean == curve[e].mean);
        CHECK(loaded[e].std_dev == curve[e].std_dev);
    }
}

TEST_CASE("a long curve writes one line per episode plus the header") {
    Curve curve(30000);
    for (int e = 0; e < 30000; ++e) curve[e] = {e, 0.5, 0.1};
    const std::string path = "curve_length_test.csv";
    emit_csv(curve, path);
    const std::string text = slurp(path);
    std::remove(path.c_str());
    CHECK(std::count(text.begin(), text.end(), '\n') == 30001);
    CHECK(text.back() == '\n');
}

TEST_CASE("config json round-trips") {
    ExperimentConfig config;
    config.env = EnvKind::TreeMaze;
    config.treemaze_variant = envs::TreeMazeVariant::Known4;
    config.agent = AgentKind::NoOoi;
    config.episodes = 123;
    config.runs = 4;
    config.gamma = 0.9;
    config.learner.alpha = 5e-4;
    config.base_seed = 777;
    config.smoothing_window = 50;
    const ExperimentConfig back = config_from_json(config_to_json(config));
    CHECK(back.env == config.env);
    CHECK(back.treemaze_variant == config.treemaze_variant);
    CHECK(back.agent == config.agent);
    CHECK(back.episodes == config.episodes);
    CHECK(back.runs == config.runs);
    CHECK(back.gamma == config.gamma);
    CHECK(back.learner.alpha == config.learner.alpha);
    CHECK(back.base_seed == config.base_seed);
    CHECK(back.smoothing_window == config.smoothing_window);
}

TEST_CASE("config validation rejects bad values") {
    ExperimentConfig config;
    config.episodes = 0;
    CHECK_THROWS_AS(config.validate(), Error);
    config.episodes = 1;
    config.gamma = 1.5;
    CHECK_THROWS_AS(config.validate(), Error);
    nlohmann::json j;
    j["environment"] = "pole";
    j["agent"] = "ooi";
    CHECK_THROWS_AS(config_from_json(j), Error);
}

TEST_CASE("derived seeds are stable and decorrelated") {
    const std::uint64_t a = derive_seed(1, 0, StreamRole::Env);
    CHECK(a == derive_seed(1, 0, StreamRole::Env));
    CHECK(a != derive_seed(1, 0, StreamRole::Sampling));
    CHECK(a != derive_seed(1, 1, StreamRole::Env));
    CHECK(a != derive_seed(2, 0, StreamRole::Env));
}

TEST_CASE("no-ooi setups differ from ooi setups only in the initiation sets") {
    ExperimentConfig config;
    config.env = EnvKind::Gathering;
    config.agent = AgentKind::Ooi;
    Rng ooi_rng_a = make_stream(1, 0, StreamRole::InitiationSets);
    Rng ooi_rng_b = make_stream(1, 0, StreamRole::InitiationSets);
    const auto with = make_options(config, ooi_rng_a);
    config.agent = AgentKind::NoOoi;
    const auto without = make_options(config, ooi_rng_b);
    REQUIRE(with.size() == without.size());
    Observation at_root;
    at_root.raw = {0, 0};
    at_root.features = {1, 0, 0, 0, 0};
    bool any_difference = false;
    for (std::size_t i = 0; i < with.size(); ++i) {
        CHECK(with[i].id == without[i].id);
        CHECK(with[i].name == without[i].name);
        CHECK(with[i].policy->learned() == without[i].policy->learned());
        CHECK(with[i].policy->action_distribution(at_root) ==
              without[i].policy->action_distribution(at_root));
        CHECK(with[i].termination->beta(at_root) == without[i].termination->beta(at_root));
        if (with[i].initiation.predecessors != without[i].initiation.predecessors ||
            with[i].initiation.allows_none != without[i].initiation.allows_none)
            any_difference = true;
    }
    CHECK(any_difference);
}

TEST_CASE("the expert experiment lands near ten") {
    ExperimentConfig config;
    config.env = EnvKind::Gathering;
    config.agent = AgentKind::Expert;
    config.episodes = 1000;
    config.runs = 1;
    config.base_seed = 5;
    const auto records = run_experiment(config);
    REQUIRE(records.size() == 1);
    REQUIRE(records[0].error.empty());
    double total = 0.0;
    for (double r : records[0].returns) total += r;
    CHECK(total / records[0].returns.size() == Catch::Approx(10.0).margin(0.5));
}

TEST_CASE("the scripted maze oracle scores 8.2 in every episode of every run") {
    ExperimentConfig config;
    config.env = EnvKind::TreeMaze;
    config.agent = AgentKind::ScriptedOracle;
    config.episodes = 50;
    config.runs = 3;
    config.base_seed = 9;
    for (const RunRecord& record : run_experiment(config)) {
        REQUIRE(record.error.empty());
        for (double r : record.returns) CHECK(r == Catch::Approx(8.2).margin(1e-9));
    }
}

TEST_CASE("rerunning a config reproduces the records bit for bit") {
    ExperimentConfig config;
    config.env = EnvKind::Gathering;
    config.agent = AgentKind::Ooi;
    config.episodes = 60;
    config.runs = 2;
    config.base_seed = 31;
    config.learner.hidden = 8;
    const auto first = run_experiment(config);
    const auto second = run_experiment(config);
    REQUIRE(first.size() == second.size());
    for (std::size_t r = 0; r < first.size(); ++r) {
        REQUIRE(first[r].error.empty());
        CHECK(first[r].returns == second[r].returns);
        CHECK(first[r].seed == second[r].seed);
    }
}

TEST_CASE("expert runs refuse environments without an expert") {
    ExperimentConfig config;
    config.env = EnvKind::DupInput;
    config.agent = AgentKind::Expert;
    config.episodes = 1;
    config.runs = 1;
    const auto records = run_experiment(config);
    REQUIRE(records.size() == 1);
    CHECK_FALSE(records[0].error.empty());
}

TEST_CASE("trailing means report the requested windows") {
    const std::vector<double> returns = {0.0, 1.0, 2.0, 3.0, 4.0};
    CHECK(trailing_mean(returns, 3, 4) == 3.0);
    CHECK(trailing_mean(returns, 10, 4) == 2.0);
    CHECK(final_trailing_mean(returns, 2) == 3.5);
    CHECK(best_trailing_mean(returns, 2) == 3.5);
    CHECK(best_trailing_mean({5.0, 0.0, 0.0}, 1) == 5.0);
    CHECK(best_trailing_mean({1.0, 1.0}, 4) == 1.0);
}
