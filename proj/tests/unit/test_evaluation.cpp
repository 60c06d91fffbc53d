#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "rehab/errors.hpp"
#include "rehab/evaluation.hpp"
#include "rehab/synth.hpp"

using namespace rehab;

namespace {

Dataset small_corpus(std::uint64_t seed) {
    CorpusSpec spec;
    spec.n_patients = 3;
    spec.n_healthy = 2;
    spec.reps_per_patient_side = 3;
    spec.reps_per_healthy = 4;
    spec.exercises = {Exercise::E1_Cup};
    spec.seed = seed;
    return synth_dataset(spec);
}

EvalConfig fast_eval(Method method) {
    EvalConfig cfg;
    cfg.methods = {method};
    cfg.seeds = {3};
    cfg.train_cfg.depths = {1};
    cfg.train_cfg.widths = {16};
    cfg.train_cfg.learning_rates = {0.01};
    cfg.train_cfg.max_iter = 40;
    cfg.rfe_cfg.hidden = {16};
    cfg.rfe_cfg.max_iter = 30;
    cfg.rl_cfg.episodes = 150;
    cfg.rl_cfg.q_hidden = {{16}};
    cfg.rl_cfg.minibatch = 32;
    cfg.rl_cfg.replay_capacity = 2000;
    return cfg;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("method names round-trip") {
    CHECK(to_string(Method::FullNN) == "ML-Full");
    CHECK(to_string(Method::Rfe) == "ML-RFE");
    CHECK(to_string(Method::Rl) == "ML-RL");
    CHECK(method_from_string("rl") == Method::Rl);
    CHECK(method_from_string("rfe") == Method::Rfe);
    CHECK(method_from_string("full") == Method::FullNN);
    CHECK(method_from_string("ml_rl") == Method::Rl);
    CHECK(!method_from_string("svm").has_value());
    CHECK(method_json_key(Method::Rl) == "ml_rl");
}

TEST_CASE("config validation rejects duplicates") {
    EvalConfig cfg;
    cfg.methods = {Method::Rl, Method::Rl};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = EvalConfig{};
    cfg.seeds = {1, 1};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = EvalConfig{};
    cfg.methods.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = EvalConfig{};
    cfg.seeds.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("every patient becomes a held-out fold") {
    const Dataset ds = small_corpus(41);
    const EvalResult res = loso_evaluate(ds, fast_eval(Method::FullNN));

    std::set<std::string> patients;
    for (const auto& s : ds.subjects)
        if (s.cohort == Cohort::Patient) patients.insert(s.subject_id);

    REQUIRE(res.exercises.size() == 1);
    CHECK(res.subjects == std::vector<std::string>(patients.begin(),
                                                   patients.end()));
    REQUIRE(res.methods.size() == 1);
    const MethodResult& mr = res.methods.front();
    REQUIRE(mr.by_exercise.size() == 1);
    const ExerciseStats& ex = mr.by_exercise.at(Exercise::E1_Cup);
    CHECK(ex.per_subject.size() == patients.size());
    for (const auto& s : ex.per_subject) {
        CHECK(patients.count(s.subject) == 1);
        CHECK(s.f1 >= 0.0);
        CHECK(s.f1 <= 1.0);
        CHECK(s.test_count > 0);
    }
    // Full method always acquires everything; one exercise means the
    // overall mean equals the per-exercise mean.
    CHECK(mr.overall_mean_acquisitions == doctest::Approx(60.0));
    CHECK(mr.overall_mean == doctest::Approx(ex.mean_f1));
    CHECK(res.feature_count == 60);
}

TEST_CASE("healthy subjects never get folds") {
    const Dataset ds = small_corpus(42);
    const EvalResult res = loso_evaluate(ds, fast_eval(Method::FullNN));
    std::set<std::string> healthy;
    for (const auto& s : ds.subjects)
        if (s.cohort == Cohort::Healthy) healthy.insert(s.subject_id);
    for (const auto& s : res.subjects) CHECK(healthy.count(s) == 0);
}

TEST_CASE("datasets must be evaluable") {
    EvalConfig cfg = fast_eval(Method::FullNN);
    SUBCASE("too few subjects") {
        CorpusSpec spec;
        spec.n_patients = 1;
        spec.n_healthy = 1;
        spec.reps_per_patient_side = 2;
        spec.reps_per_healthy = 2;
        spec.exercises = {Exercise::E1_Cup};
        spec.seed = 1;
        CHECK_THROWS_AS(loso_evaluate(synth_dataset(spec), cfg), DomainError);
    }
    SUBCASE("unlabeled repetition") {
        Dataset ds = small_corpus(43);
        ds.repetitions.front().label.reset();
        CHECK_THROWS_AS(loso_evaluate(ds, cfg), DomainError);
    }
}

TEST_CASE("results are identical across thread counts and runs") {
    const Dataset ds = small_corpus(44);
    EvalConfig cfg = fast_eval(Method::Rfe);
    const EvalResult a = loso_evaluate(ds, cfg);
    cfg.threads = 3;
    const EvalResult b = loso_evaluate(ds, cfg);
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("rl evaluation reports acquisition budgets under the maximum") {
    // Seed 41 gives every fold both classes in its training split.
    const Dataset ds = small_corpus(41);
    const EvalResult res = loso_evaluate(ds, fast_eval(Method::Rl));
    const MethodResult& mr = res.methods.front();
    CHECK(mr.overall_mean_acquisitions >= 0.0);
    CHECK(mr.overall_mean_acquisitions <= 60.0);
}

TEST_CASE("results json has the documented shape") {
    const Dataset ds = small_corpus(46);
    const EvalResult res = loso_evaluate(ds, fast_eval(Method::FullNN));
    const auto doc = nlohmann::json::parse(res.to_json());
    CHECK(doc["feature_count"] == 60);
    CHECK(doc["exercises"] == nlohmann::json::array({"E1"}));
    CHECK(doc["seeds"] == nlohmann::json::array({3}));
    const auto& m = doc["methods"]["ml_full"];
    CHECK(m["overall"].contains("mean_f1"));
    CHECK(m["overall"].contains("std_f1"));
    CHECK(m["overall"].contains("mean_acquisitions"));
    const auto& ex = m["per_exercise"]["E1"];
    CHECK(ex.contains("per_subject"));
    for (const auto& [sid, entry] : ex["per_subject"].items()) {
        CHECK(entry.contains("f1"));
        CHECK(entry.contains("mean_acquisitions"));
        CHECK(entry.contains("test_count"));
    }
}

TEST_CASE("the table renders one row per method plus optional reference") {
    const Dataset ds = small_corpus(47);
    const EvalResult res = loso_evaluate(ds, fast_eval(Method::FullNN));

    const std::string table = emit_results_table(res, nullptr);
    std::istringstream lines(table);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line))
        if (!line.empty()) rows.push_back(line);
    // Header plus one method row; no acquisition footer without the
    // selector method.
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].find("Exercise 1 (E1)") != std::string::npos);
    CHECK(rows[0].find("Overall") != std::string::npos);
    CHECK(rows[1].rfind("ML-Full", 0) == 0);
    CHECK(rows[1].find("+-") != std::string::npos);

    TpAgreement tp;
    tp.label = "TP agreement";
    tp.per_exercise["E1"] = {0.83, 0.05};
    tp.overall = {0.83, 0.05};
    const std::string with_tp = emit_results_table(res, &tp);
    CHECK(with_tp.find("TP agreement") != std::string::npos);
}

TEST_CASE("tp agreement files parse strictly") {
    const std::string path = testutil::temp_path("tp") + ".json";
    {
        nlohmann::json j;
        j["label"] = "Therapists";
        j["per_exercise"]["E1"] = {0.8331, 0.05};
        j["per_exercise"]["E2"] = {0.7973, 0.06};
        j["per_exercise"]["E3"] = {0.8053, 0.07};
        j["overall"] = {0.8119, 0.04};
        std::ofstream(path) << j.dump();
    }
    const TpAgreement tp = load_tp_agreement(path);
    CHECK(tp.label == "Therapists");
    CHECK(tp.per_exercise.at("E1").first == doctest::Approx(0.8331));
    CHECK(tp.overall.second == doctest::Approx(0.04));

    const std::string bad = testutil::temp_path("tp") + ".json";
    {
        nlohmann::json j;
        j["label"] = "x";
        j["per_exercise"]["E1"] = {0.8};  // needs [mean, std]
        std::ofstream(bad) << j.dump();
    }
    CHECK_THROWS_AS(load_tp_agreement(bad), ConfigError);
}

}  // TEST_SUITE
