#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rehab/kinematics.hpp"
#include "rehab/motion_data.hpp"

namespace rehab {

// Per-feature reference statistics over a pool of normal repetitions, in raw
// (unstandardized) feature units. Standard deviations are floored at 1e-8.
struct NormalProfile {
    std::shared_ptr<const std::vector<std::string>> names;
    std::vector<double> mean;
    std::vector<double> std_dev;
    std::size_t source_count = 0;
};

NormalProfile fit_normal_profile(const std::vector<FeatureVector>& normals);

// The normal pool for a patient: their unaffected-side repetitions of the
// exercise, falling back to the healthy cohort when fewer than 3 exist.
std::vector<const MotionRepetition*> normal_pool(const Dataset& ds,
                                                 const std::string& subject_id,
                                                 Exercise exercise);

struct DeviationScore {
    std::string feature;
    double z = 0.0;
};

// z-scores of the acquired features against the profile. Name orders must
// match exactly.
std::vector<DeviationScore> deviation_scores(const NormalProfile& profile,
                                             const FeatureVector& fv);

// Feature family -> message pair, phrased for the patient. "{feature}" in a
// template is replaced with the triggering feature's name.
struct FeedbackTemplates {
    std::map<std::string, std::pair<std::string, std::string>> by_family;  // above, below
    std::string encouragement;
};

FeedbackTemplates default_templates();
FeedbackTemplates load_templates(const std::string& path);

// Family of a feature ("rom", "smoothness", "compensation", "speed").
std::string family_of(const std::string& feature_name);

struct FeedbackItem {
    std::string feature;
    std::string family;
    double z = 0.0;
    std::string direction;  // "above" or "below"
    bool flagged = false;
    std::string message;  // set on the item that produced a family message
};

struct FeedbackReport {
    std::vector<FeedbackItem> items;     // one per scored feature, input order
    std::vector<std::string> messages;   // ordered by |z| descending
    int predicted_label = 0;
    double threshold = 2.0;
};

// Flags |z| > threshold, renders at most one message per family, strongest
// deviation first. A clean, correctly predicted repetition gets the
// encouragement message.
FeedbackReport generate_feedback(const std::vector<DeviationScore>& scores,
                                 int predicted_label,
                                 const FeedbackTemplates& templates,
                                 double threshold = 2.0);

std::string render_feedback_text(const FeedbackReport& report);
std::string render_feedback_json(const FeedbackReport& report);

}  // namespace rehab
