#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rehab/evaluation.hpp"
#include "rehab/kinematics.hpp"
#include "rehab/mlp.hpp"
#include "rehab/selector.hpp"
#include "rehab/synth.hpp"

namespace rehab {

// One experiment, one file. Every knob defaults; unknown keys are rejected.
// The master seed feeds every stage unless a stage names its own.
struct RunConfig {
    std::uint64_t seed = 7;
    int threads = 1;

    std::string corpus;
    std::string predictor_path = "predictor.json";
    std::string selector_path = "selector.json";
    std::string out;
    std::string templates_path;      // empty = built-in wording
    std::string tp_agreement_path;   // empty = no therapist row
    double feedback_threshold = 2.0;

    CorpusSpec synth;
    FeatureConfig feature;
    TrainConfig train;
    RfeConfig rfe;
    RlConfig rl;
    std::vector<Method> methods = {Method::Rl, Method::Rfe, Method::FullNN};
    std::vector<std::uint64_t> eval_seeds;  // empty = {seed}

    static RunConfig from_json_file(const std::string& path);

    // Pushes the master seed into every stage config.
    void propagate_seed();
    EvalConfig eval_config() const;
};

}  // namespace rehab
