#include <algorithm>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "rehab/errors.hpp"
#include "rehab/metrics.hpp"
#include "rehab/rng.hpp"
#include "rehab/selector.hpp"

using namespace rehab;

namespace {

// Feature 0 carries the label (+/-2), the rest is small noise.
std::pair<std::vector<FeatureVector>, std::vector<int>> informative_pool(
    int n, int dims, int informative, std::uint64_t seed) {
    Rng rng(seed);
    auto names = testutil::names_n(dims);
    std::vector<FeatureVector> fvs;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        std::vector<double> v(dims);
        for (int d = 0; d < dims; ++d) v[d] = rng.uniform(-0.3, 0.3);
        v[informative] = label ? 2.0 : -2.0;
        fvs.push_back(testutil::fv_of(names, std::move(v)));
        labels.push_back(label);
    }
    return {fvs, labels};
}

RlConfig small_rl(std::uint64_t seed) {
    RlConfig cfg;
    cfg.episodes = 400;
    cfg.q_hidden = {{16}};
    cfg.minibatch = 32;
    cfg.replay_capacity = 2000;
    cfg.target_sync_every = 50;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_SUITE("selector") {

TEST_CASE("acquisition state bookkeeping") {
    const AcquisitionState s0 = initial_state(3);
    CHECK(s0.observed == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(s0.mask == std::vector<std::uint8_t>{0, 0, 0});
    CHECK(s0.budget_used == 0);
    CHECK(legal_actions(s0) == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(classify_action(3, 0) == 3);
    CHECK(classify_action(3, 1) == 4);
    CHECK(is_classify(3, 3));
    CHECK(is_classify(3, 4));
    CHECK(!is_classify(3, 2));
    CHECK(encode_state(s0) ==
          std::vector<double>{0, 0, 0, 0, 0, 0});
}

TEST_CASE("transitions reveal values, charge costs and classify") {
    auto names = testutil::names_n(3);
    const FeatureVector fv = testutil::fv_of(names, {1.5, -2.0, 0.5});
    RlConfig cfg;
    cfg.feature_cost = 0.05;

    AcquisitionState s = initial_state(3);
    auto [s1, r1, done1] = transition(s, 1, fv, 1, cfg);
    CHECK(r1 == doctest::Approx(-0.05));
    CHECK(!done1);
    CHECK(s1.observed == std::vector<double>{0.0, -2.0, 0.0});
    CHECK(s1.mask == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(s1.budget_used == 1);
    CHECK(legal_actions(s1) == std::vector<int>{0, 2, 3, 4});

    auto [s2, r2, done2] = transition(s1, 4, fv, 1, cfg);  // correct class 1
    CHECK(r2 == doctest::Approx(1.0));
    CHECK(done2);
    auto [s3, r3, done3] = transition(s1, 3, fv, 1, cfg);  // wrong class 0
    CHECK(r3 == doctest::Approx(-1.0));
    CHECK(done3);
    (void)s2;
    (void)s3;

    CHECK_THROWS_AS(transition(s1, 1, fv, 1, cfg), IllegalAction);
    CHECK_THROWS_AS(transition(s1, 9, fv, 1, cfg), IllegalAction);
}

TEST_CASE("random legal action sequences keep the state consistent") {
    auto names = testutil::names_n(6);
    Rng rng(77);
    RlConfig cfg;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> values;
        for (int d = 0; d < 6; ++d) values.push_back(rng.uniform(-3, 3));
        const FeatureVector fv = testutil::fv_of(names, values);
        AcquisitionState s = initial_state(6);
        int steps = 0;
        bool done = false;
        while (!done) {
            const auto legal = legal_actions(s);
            REQUIRE(!legal.empty());
            const int a = legal[rng.below(legal.size())];
            auto [next, r, fin] = transition(s, a, fv, 1, cfg);
            (void)r;
            s = next;
            done = fin;
            ++steps;
            REQUIRE(steps <= 7);  // at most every acquire plus one classify
            int acquired = 0;
            for (std::size_t i = 0; i < s.mask.size(); ++i) {
                acquired += s.mask[i];
                if (!s.mask[i]) CHECK(s.observed[i] == 0.0);
                if (s.mask[i]) CHECK(s.observed[i] == values[i]);
            }
            CHECK(s.budget_used == acquired);
            const auto enc = encode_state(s);
            REQUIRE(enc.size() == 12);
            for (int i = 0; i < 6; ++i) {
                CHECK(enc[i] == s.observed[i]);
                CHECK(enc[6 + i] == static_cast<double>(s.mask[i]));
            }
        }
    }
}

TEST_CASE("double q target uses the online argmax under target values") {
    const std::vector<double> q_online = {0.2, 0.9, 0.1};
    const std::vector<double> q_target = {0.5, 0.3, 0.8};
    CHECK(double_q_target(-0.05, false, q_online, q_target, {0, 1, 2}, 1.0) ==
          doctest::Approx(0.25));
    // Restricting legality moves the online argmax to action 0 (0.2 > 0.1),
    // and action 0 is evaluated under the target net: 0.5.
    CHECK(double_q_target(-0.05, false, q_online, q_target, {0, 2}, 1.0) ==
          doctest::Approx(-0.05 + 0.5));
    CHECK(double_q_target(1.0, true, q_online, q_target, {0, 1, 2}, 1.0) ==
          doctest::Approx(1.0));
    CHECK(double_q_target(-0.05, false, q_online, q_target, {}, 1.0) ==
          doctest::Approx(-0.05));
    CHECK(double_q_target(-0.05, false, q_online, q_target, {1}, 0.5) ==
          doctest::Approx(-0.05 + 0.5 * 0.3));
}

TEST_CASE("a tabular network reproduces the hand bellman target") {
    // 3 one-hot states, 2 actions. Identity first layer passes one-hot
    // inputs through ReLU unchanged, so the head rows hold Q directly.
    const std::vector<std::vector<double>> q_online = {{0.1, 0.4},
                                                       {0.7, 0.2},
                                                       {0.3, 0.9}};
    const std::vector<std::vector<double>> q_target = {{0.5, 0.1},
                                                       {0.2, 0.6},
                                                       {0.8, 0.3}};
    auto build = [](const std::vector<std::vector<double>>& q) {
        MlpModel m = MlpModel::init({3, 3, 2}, OutputHead::LinearQ, 1);
        m.layers[0].w = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        m.layers[0].b = {0, 0, 0};
        for (int a = 0; a < 2; ++a)
            for (int s = 0; s < 3; ++s) m.layers[1].w[a * 3 + s] = q[s][a];
        m.layers[1].b = {0, 0};
        return m;
    };
    const MlpModel online = build(q_online);
    const MlpModel target = build(q_target);
    for (int s = 0; s < 3; ++s) {
        std::vector<double> x(3, 0.0);
        x[s] = 1.0;
        const int best =
            q_online[s][0] >= q_online[s][1] ? 0 : 1;  // online argmax
        const double expect = -0.1 + 0.9 * q_target[s][best];
        CHECK(double_q_target(-0.1, false, x, online, target, {0, 1}, 0.9) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("greedy rollout always ends in a classification") {
    auto [fvs, labels] = informative_pool(12, 4, 0, 5);
    RlConfig cfg = small_rl(3);
    const SelectorNets nets = train_selector(fvs, labels, cfg);
    for (std::size_t i = 0; i < fvs.size(); ++i) {
        const EpisodeTrace t =
            select_and_classify(nets.online, fvs[i], cfg, &labels[i]);
        REQUIRE(!t.actions.empty());
        CHECK(t.actions.size() <= 5);
        CHECK(is_classify(4, t.actions.back()));
        CHECK((t.prediction == 0 || t.prediction == 1));
        CHECK(t.true_label == labels[i]);
        CHECK(t.acquisitions() ==
              std::count(t.final_mask.begin(), t.final_mask.end(), 1));
        CHECK(t.rewards.size() == t.actions.size());
        // Acquire actions appear at most once each.
        std::set<int> acquires;
        for (std::size_t k = 0; k + 1 < t.actions.size(); ++k) {
            CHECK(!is_classify(4, t.actions[k]));
            CHECK(acquires.insert(t.actions[k]).second);
        }
    }
}

TEST_CASE("episode traces serialize with stable keys") {
    auto [fvs, labels] = informative_pool(8, 3, 1, 6);
    RlConfig cfg = small_rl(4);
    const SelectorNets nets = train_selector(fvs, labels, cfg);
    const EpisodeTrace t =
        select_and_classify(nets.online, fvs[0], cfg, &labels[0]);
    const auto doc = nlohmann::json::parse(trace_to_json(t));
    CHECK(doc.contains("actions"));
    CHECK(doc.contains("mask"));
    CHECK(doc.contains("prediction"));
    CHECK(doc.contains("rewards"));
    CHECK(doc.contains("truth"));
    CHECK(doc["actions"].size() == t.actions.size());
}

TEST_CASE("selector training is deterministic") {
    auto [fvs, labels] = informative_pool(10, 3, 0, 9);
    const RlConfig cfg = small_rl(11);
    const SelectorNets a = train_selector(fvs, labels, cfg);
    const SelectorNets b = train_selector(fvs, labels, cfg);
    CHECK(a.online == b.online);
    CHECK(a.target == b.target);
    CHECK(a.val_reward == doctest::Approx(b.val_reward));
}

TEST_CASE("architecture candidates are searched and recorded") {
    auto [fvs, labels] = informative_pool(14, 3, 0, 12);
    RlConfig cfg = small_rl(13);
    cfg.episodes = 200;
    cfg.q_hidden = {{8}, {16}};
    const SelectorNets nets = train_selector(fvs, labels, cfg);
    const bool known = nets.hidden == std::vector<int>{8} ||
                       nets.hidden == std::vector<int>{16};
    CHECK(known);
    CHECK(nets.online.input_size() == 6);
    CHECK(nets.online.output_size() == 5);
}

TEST_CASE("prohibitive feature cost makes the agent classify immediately") {
    auto [fvs, labels] = informative_pool(10, 2, 0, 21);
    RlConfig cfg = small_rl(17);
    // Acquiring can never pay for itself once it costs more than the
    // best-case reward swing.
    cfg.feature_cost = 2.5;
    cfg.episodes = 600;
    const SelectorNets nets = train_selector(fvs, labels, cfg);
    double acquired = 0;
    for (std::size_t i = 0; i < fvs.size(); ++i)
        acquired +=
            select_and_classify(nets.online, fvs[i], cfg, &labels[i])
                .acquisitions();
    CHECK(acquired == 0);
}

TEST_CASE("higher feature cost never buys more features") {
    auto [fvs, labels] = informative_pool(16, 4, 0, 31);
    auto mean_acq = [&](double cost) {
        RlConfig cfg = small_rl(19);
        cfg.feature_cost = cost;
        cfg.episodes = 600;
        const SelectorNets nets = train_selector(fvs, labels, cfg);
        double total = 0;
        for (std::size_t i = 0; i < fvs.size(); ++i)
            total += select_and_classify(nets.online, fvs[i], cfg, &labels[i])
                         .acquisitions();
        return total / fvs.size();
    };
    const double cheap = mean_acq(0.01);
    const double dear = mean_acq(0.5);
    CHECK(dear <= cheap + 0.5);
}

TEST_CASE("selector checkpoints round-trip and validate names") {
    auto [fvs, labels] = informative_pool(10, 3, 1, 41);
    const NormParams norm = fit_zscore(fvs);
    RlConfig cfg = small_rl(23);
    cfg.episodes = 150;
    const SelectorNets nets = train_selector(fvs, labels, cfg);

    const std::string path = testutil::temp_path("selector") + ".json";
    save_selector(nets, norm, path);
    const auto [back, norm2] = load_selector(path, norm.names.get());
    CHECK(back.online == nets.online);
    CHECK(back.target == nets.target);
    CHECK(back.hidden == nets.hidden);
    CHECK(back.val_reward == doctest::Approx(nets.val_reward));
    CHECK(norm2.mean == norm.mean);

    const auto other = testutil::names_n(5);
    CHECK_THROWS_AS(load_selector(path, other.get()), ConfigError);
}

TEST_CASE("training requires both classes and aligned sizes") {
    auto names = testutil::names_n(2);
    std::vector<FeatureVector> fvs = {testutil::fv_of(names, {1, 2}),
                                      testutil::fv_of(names, {3, 4})};
    RlConfig cfg = small_rl(1);
    CHECK_THROWS_AS(train_selector(fvs, {1, 1}, cfg), DegenerateLabels);
    CHECK_THROWS_AS(train_selector(fvs, {1}, cfg), DimensionMismatch);
    CHECK_THROWS_AS(train_selector({}, {}, cfg), EmptyTrainingSet);
}

TEST_CASE("rl config validation") {
    RlConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.gamma = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RlConfig{};
    cfg.episodes = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RlConfig{};
    cfg.q_hidden.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RlConfig{};
    cfg.eps_start = 0.01;
    cfg.eps_end = 0.5;  // decay must not rise
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("rfe") {

TEST_CASE("the informative feature survives elimination") {
    auto [fvs, labels] = informative_pool(40, 6, 2, 51);
    RfeConfig cfg;
    cfg.hidden = {16};
    cfg.max_iter = 60;
    cfg.seed = 7;
    const RfeResult res = rfe_select(fvs, labels, cfg);
    REQUIRE(res.ranking.size() == 6);
    std::vector<int> sorted = res.ranking;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5});
    CHECK(res.ranking.front() == 2);
    CHECK(res.chosen_mask[2] == 1);
    CHECK(res.chosen_size ==
          std::count(res.chosen_mask.begin(), res.chosen_mask.end(), 1));
    REQUIRE(!res.rounds.empty());
    CHECK(res.rounds.front().active_count == 6);
    for (std::size_t i = 1; i < res.rounds.size(); ++i)
        CHECK(res.rounds[i].active_count < res.rounds[i - 1].active_count);
}

TEST_CASE("rfe is deterministic") {
    auto [fvs, labels] = informative_pool(30, 5, 0, 61);
    RfeConfig cfg;
    cfg.hidden = {8};
    cfg.max_iter = 40;
    cfg.seed = 3;
    const RfeResult a = rfe_select(fvs, labels, cfg);
    const RfeResult b = rfe_select(fvs, labels, cfg);
    CHECK(a.ranking == b.ranking);
    CHECK(a.chosen_mask == b.chosen_mask);
}

TEST_CASE("mask_for_size selects the top of the ranking") {
    const std::vector<int> ranking = {2, 0, 1};
    CHECK(mask_for_size(ranking, 2) == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(mask_for_size(ranking, 3) == std::vector<std::uint8_t>{1, 1, 1});
    CHECK(mask_for_size(ranking, 0) == std::vector<std::uint8_t>{0, 0, 0});
    CHECK_THROWS_AS(mask_for_size(ranking, 4), DomainError);
}

TEST_CASE("rfe config validation") {
    RfeConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.drop_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RfeConfig{};
    cfg.drop_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RfeConfig{};
    cfg.hidden.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
