#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rehab/motion_data.hpp"

namespace rehab {

enum class Summary : int { Max = 0, Min, Range, Mean, Std };

const std::string& to_string(Summary s);
std::optional<Summary> summary_from_string(const std::string& s);

// Which arm drives the features for a repetition.
enum class SideMode : int {
    FromSide = 0,       // affected/dominant -> right, unaffected -> left
    Left,
    Right,
    AutoDisplacement,   // the wrist that travelled farther
};

struct FeatureConfig {
    SideMode side_mode = SideMode::FromSide;
    std::vector<Summary> summaries = {Summary::Max, Summary::Range,
                                      Summary::Mean, Summary::Std};
    std::pair<JointName, JointName> trunk_norm = {JointName::SpineBase,
                                                  JointName::SpineShoulder};
    Vec3 up_axis = {0.0, 1.0, 0.0};
    // Optional moving-average on position paths before differencing; 0 = off.
    int smoothing_window = 0;

    void validate() const;
};

// Fixed-dimension named feature vector. The name vector is shared between
// all vectors extracted under one config.
struct FeatureVector {
    std::shared_ptr<const std::vector<std::string>> names;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;  // empty = all acquired

    std::size_t size() const { return values.size(); }
    bool all_acquired() const;
    double at(const std::string& name) const;  // throws NameOrderMismatch
};

// The 15 per-repetition time series, in extraction order.
std::vector<std::string> base_series_names();

// Full feature-name list for a config: base x summaries, base-major.
std::shared_ptr<const std::vector<std::string>> feature_names(
    const FeatureConfig& cfg);

// Angle at vertex b between rays b->a and b->c, degrees in [0, 180].
double joint_angle(const Vec3& a, const Vec3& b, const Vec3& c);

// Angle between segment bottom->top and the up axis, degrees in [0, 180].
double tilt_angle(const Vec3& top, const Vec3& bottom, const Vec3& up_axis);

// Repeated central differences (one-sided at the ends); order 1, 2 or 3.
std::vector<double> derivative_series(const std::vector<double>& xs,
                                      const std::vector<double>& ts,
                                      int order);

// Per-frame ||Head - j|| / trunk length.
std::vector<double> relative_distance_series(const MotionRepetition& rep,
                                             JointName j,
                                             const FeatureConfig& cfg);

FeatureVector extract_features(const MotionRepetition& rep,
                               const FeatureConfig& cfg);

// Per-feature standardization parameters (population std, floored at 1e-8).
struct NormParams {
    std::shared_ptr<const std::vector<std::string>> names;
    std::vector<double> mean;
    std::vector<double> std_dev;
};

NormParams fit_zscore(const std::vector<FeatureVector>& train);
FeatureVector apply_zscore(const NormParams& p, const FeatureVector& fv);

// CSV export: subject,exercise,side,label then one column per feature.
void export_feature_csv(const Dataset& ds, const FeatureConfig& cfg,
                        std::ostream& out);

}  // namespace rehab
