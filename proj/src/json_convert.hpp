#pragma once

// Internal JSON converters shared by the checkpoint writers. Not installed.

#include <json.hpp>

#include "rehab/kinematics.hpp"
#include "rehab/mlp.hpp"
#include "rehab/synth.hpp"

namespace rehab::detail {

nlohmann::json model_to_json(const MlpModel& m);
MlpModel model_from_json(const nlohmann::json& j);
nlohmann::json norm_to_json(const NormParams& p);
NormParams norm_from_json(const nlohmann::json& j);
CorpusSpec corpus_spec_from_json(const nlohmann::json& j);

// Throws ConfigError when j has a key outside allowed (checkpoint and config
// files are strict).
void require_keys(const nlohmann::json& j,
                  const std::vector<std::string>& allowed,
                  const std::string& where);

}  // namespace rehab::detail
