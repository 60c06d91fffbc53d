#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rehab/kinematics.hpp"
#include "rehab/motion_data.hpp"

namespace testutil {

inline std::shared_ptr<const std::vector<std::string>> names_n(std::size_t n) {
    std::vector<std::string> v;
    v.reserve(n);
    for (std::size_t i = 0; i < n; ++i) v.push_back("f" + std::to_string(i));
    return std::make_shared<const std::vector<std::string>>(std::move(v));
}

inline rehab::FeatureVector fv_of(
    std::shared_ptr<const std::vector<std::string>> names,
    std::vector<double> values) {
    rehab::FeatureVector fv;
    fv.names = std::move(names);
    fv.values = std::move(values);
    return fv;
}

// Unique path under the system temp dir; never reused within one run.
inline std::string temp_path(const std::string& stem) {
    static std::atomic<int> counter{0};
    const auto dir = std::filesystem::temp_directory_path() / "rehab_unit";
    std::filesystem::create_directories(dir);
    return (dir / (stem + "_" + std::to_string(counter++))).string();
}

// Static upright pose with one moving wrist so validation passes and
// geometry is well defined. Duration and frame count stay tiny.
inline rehab::MotionRepetition make_rep(const std::string& subject = "P01",
                                        rehab::Exercise ex = rehab::Exercise::E1_Cup,
                                        rehab::Side side = rehab::Side::Affected,
                                        int rep_index = 0, int frames = 30) {
    using rehab::JointName;
    using rehab::Vec3;
    rehab::MotionRepetition rep;
    rep.subject_id = subject;
    rep.exercise = ex;
    rep.side = side;
    rep.rep_index = rep_index;
    for (int i = 0; i < frames; ++i) {
        rehab::JointFrame f;
        f.t = i / 30.0;
        f.at(JointName::Head) = {0.0, 1.65, 0.0};
        f.at(JointName::Neck) = {0.0, 1.50, 0.0};
        f.at(JointName::SpineShoulder) = {0.0, 1.45, 0.0};
        f.at(JointName::SpineMid) = {0.0, 1.17, 0.0};
        f.at(JointName::SpineBase) = {0.0, 0.90, 0.0};
        f.at(JointName::ShoulderL) = {-0.20, 1.45, 0.0};
        f.at(JointName::ShoulderR) = {0.20, 1.45, 0.0};
        f.at(JointName::ElbowL) = {-0.22, 1.16, 0.03};
        f.at(JointName::ElbowR) = {0.22, 1.16, 0.03};
        f.at(JointName::WristL) = {-0.23, 0.88, 0.05};
        // One smooth reach so displacement-based features are nonzero.
        const double u = static_cast<double>(i) / (frames - 1);
        f.at(JointName::WristR) = Vec3{0.23, 0.88 + 0.3 * u, 0.05 + 0.2 * u};
        rep.frames.push_back(f);
    }
    rep.label = rehab::QualityLabel{1, {}};
    return rep;
}

}  // namespace testutil
