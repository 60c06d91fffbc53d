#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rehab/kinematics.hpp"
#include "rehab/mlp.hpp"
#include "rehab/motion_data.hpp"
#include "rehab/selector.hpp"

namespace rehab {

enum class Method { FullNN, Rfe, Rl };

const std::string& to_string(Method m);          // "ML-Full", "ML-RFE", "ML-RL"
const std::string& method_json_key(Method m);    // "ml_full", "ml_rfe", "ml_rl"
std::optional<Method> method_from_string(const std::string& s);

struct EvalConfig {
    std::vector<Method> methods = {Method::Rl, Method::Rfe, Method::FullNN};
    std::vector<std::uint64_t> seeds = {7};
    int threads = 1;
    FeatureConfig feature_cfg;
    TrainConfig train_cfg;
    RfeConfig rfe_cfg;
    RlConfig rl_cfg;

    void validate() const;
};

struct SubjectScore {
    std::string subject;
    double f1 = 0.0;                // averaged over seeds
    double mean_acquisitions = 0.0; // RL only, 0 otherwise
    std::size_t test_count = 0;
};

struct ExerciseStats {
    double mean_f1 = 0.0;  // across held-out subjects
    double std_f1 = 0.0;   // population std across held-out subjects
    double mean_acquisitions = 0.0;
    std::vector<SubjectScore> per_subject;  // ordered by subject id
};

struct MethodResult {
    Method method = Method::FullNN;
    std::map<Exercise, ExerciseStats> by_exercise;
    // The overall mean is the mean of the per-exercise means; the overall
    // std is across subjects of each subject's mean F1 over exercises.
    double overall_mean = 0.0;
    double overall_std = 0.0;
    double overall_mean_acquisitions = 0.0;
};

struct EvalResult {
    std::vector<Exercise> exercises;
    std::vector<std::string> subjects;  // held-out patients, sorted
    std::vector<MethodResult> methods;  // config order
    std::vector<std::uint64_t> seeds;
    std::size_t feature_count = 0;

    std::string to_json() const;
};

// Leave-one-subject-out over the patient cohort: every fold holds out one
// patient's repetitions of one exercise and trains on everyone else's
// (healthy subjects always train). Folds run with a per-fold seed of
// seed ^ fold_index and may execute in parallel; aggregation follows fold
// order, so thread count never changes the result.
EvalResult loso_evaluate(const Dataset& ds, const EvalConfig& cfg);

// External therapist-agreement row for the report table; never computed.
struct TpAgreement {
    std::string label = "TP";
    std::map<std::string, std::pair<double, double>> per_exercise;  // mean, std
    std::pair<double, double> overall{0.0, 0.0};
};

TpAgreement load_tp_agreement(const std::string& path);

std::string emit_results_table(const EvalResult& res,
                               const TpAgreement* tp = nullptr);

}  // namespace rehab
