#include "rehab/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "rehab/errors.hpp"

namespace rehab {

namespace {

constexpr double kDegenerateRay = 1e-9;
constexpr double kMinTrunkLength = 1e-6;

const std::vector<std::string> kBaseSeries = {
    "elbow_flexion",  "shoulder_flexion", "elbow_extension",
    "shoulder_abduction", "head_tilt",    "spine_tilt",
    "shoulder_tilt",  "wrist_speed",      "wrist_accel",
    "wrist_jerk",     "elbow_speed",      "elbow_accel",
    "elbow_jerk",     "headwrist_dist",   "headelbow_dist"};

const std::array<std::string, 5> kSummaryNames = {"max", "min", "range",
                                                  "mean", "std"};

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

struct ArmJoints {
    JointName shoulder, elbow, wrist;
    JointName other_shoulder;
};

ArmJoints arm_for(bool left) {
    if (left)
        return {JointName::ShoulderL, JointName::ElbowL, JointName::WristL,
                JointName::ShoulderR};
    return {JointName::ShoulderR, JointName::ElbowR, JointName::WristR,
            JointName::ShoulderL};
}

bool resolve_left(const MotionRepetition& rep, const FeatureConfig& cfg) {
    switch (cfg.side_mode) {
        case SideMode::Left: return true;
        case SideMode::Right: return false;
        case SideMode::FromSide:
            // Generator convention: unaffected repetitions mirror to the left
            // arm, affected and dominant use the right.
            return rep.side == Side::Unaffected;
        case SideMode::AutoDisplacement: {
            auto travel = [&](JointName w) {
                const Vec3 start = rep.frames.front().at(w);
                double best = 0.0;
                for (const auto& f : rep.frames)
                    best = std::max(best, norm(f.at(w) - start));
                return best;
            };
            return travel(JointName::WristL) > travel(JointName::WristR);
        }
    }
    return false;
}

double summarize(const std::vector<double>& xs, Summary s) {
    double mx = xs.front(), mn = xs.front(), sum = 0.0;
    for (double v : xs) {
        mx = std::max(mx, v);
        mn = std::min(mn, v);
        sum += v;
    }
    const double mean = sum / xs.size();
    switch (s) {
        case Summary::Max: return mx;
        case Summary::Min: return mn;
        case Summary::Range: return mx - mn;
        case Summary::Mean: return mean;
        case Summary::Std: {
            double acc = 0.0;
            for (double v : xs) acc += (v - mean) * (v - mean);
            return std::sqrt(acc / xs.size());
        }
    }
    return 0.0;
}

std::vector<double> moving_average(const std::vector<double>& xs, int window) {
    if (window <= 1) return xs;
    std::vector<double> out(xs.size());
    const int half = window / 2;
    for (int i = 0; i < static_cast<int>(xs.size()); ++i) {
        int lo = std::max(0, i - half);
        int hi = std::min<int>(xs.size() - 1, i + half);
        double s = 0.0;
        for (int k = lo; k <= hi; ++k) s += xs[k];
        out[i] = s / (hi - lo + 1);
    }
    return out;
}

}  // namespace

const std::string& to_string(Summary s) {
    return kSummaryNames[static_cast<int>(s)];
}

std::optional<Summary> summary_from_string(const std::string& s) {
    for (int i = 0; i < 5; ++i)
        if (kSummaryNames[i] == s) return static_cast<Summary>(i);
    return std::nullopt;
}

void FeatureConfig::validate() const {
    if (summaries.empty())
        throw ConfigError("feature config: at least one summary required");
    if (norm(up_axis) < 1e-9)
        throw ConfigError("feature config: up_axis must be non-zero");
    if (smoothing_window < 0)
        throw ConfigError("feature config: smoothing_window must be >= 0");
}

bool FeatureVector::all_acquired() const {
    if (mask.empty()) return true;
    for (auto b : mask)
        if (!b) return false;
    return true;
}

double FeatureVector::at(const std::string& name) const {
    if (!names) throw NameOrderMismatch("feature vector has no names");
    for (std::size_t i = 0; i < names->size(); ++i)
        if ((*names)[i] == name) return values[i];
    throw NameOrderMismatch("no feature named '" + name + "'");
}

std::vector<std::string> base_series_names() { return kBaseSeries; }

std::shared_ptr<const std::vector<std::string>> feature_names(
    const FeatureConfig& cfg) {
    cfg.validate();
    auto names = std::make_shared<std::vector<std::string>>();
    names->reserve(kBaseSeries.size() * cfg.summaries.size());
    for (const auto& base : kBaseSeries)
        for (Summary s : cfg.summaries)
            names->push_back(base + "." + to_string(s));
    return names;
}

double joint_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 u = a - b;
    const Vec3 v = c - b;
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu < kDegenerateRay || nv < kDegenerateRay)
        throw DegenerateGeometry("joint_angle: zero-length ray");
    return deg_from_rad(std::acos(clamp_unit(dot(u, v) / (nu * nv))));
}

double tilt_angle(const Vec3& top, const Vec3& bottom, const Vec3& up_axis) {
    const Vec3 seg = top - bottom;
    const double ns = norm(seg);
    const double nu = norm(up_axis);
    if (ns < kDegenerateRay || nu < kDegenerateRay)
        throw DegenerateGeometry("tilt_angle: zero-length segment");
    return deg_from_rad(std::acos(clamp_unit(dot(seg, up_axis) / (ns * nu))));
}

std::vector<double> derivative_series(const std::vector<double>& xs,
                                      const std::vector<double>& ts,
                                      int order) {
    if (order < 1 || order > 3)
        throw DomainError("derivative_series: order must be 1, 2 or 3");
    if (xs.size() != ts.size())
        throw LengthMismatch("derivative_series: xs and ts differ in length");
    if (xs.size() < static_cast<std::size_t>(order) + 1)
        throw LengthMismatch("derivative_series: series too short for order");
    for (std::size_t i = 1; i < ts.size(); ++i)
        if (ts[i] <= ts[i - 1])
            throw NonMonotoneTime("derivative_series: non-increasing ts");

    std::vector<double> cur = xs;
    const std::size_t n = xs.size();
    for (int o = 0; o < order; ++o) {
        std::vector<double> next(n);
        next.front() = (cur[1] - cur[0]) / (ts[1] - ts[0]);
        for (std::size_t i = 1; i + 1 < n; ++i)
            next[i] = (cur[i + 1] - cur[i - 1]) / (ts[i + 1] - ts[i - 1]);
        next.back() = (cur[n - 1] - cur[n - 2]) / (ts[n - 1] - ts[n - 2]);
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> relative_distance_series(const MotionRepetition& rep,
                                             JointName j,
                                             const FeatureConfig& cfg) {
    std::vector<double> out;
    out.reserve(rep.frames.size());
    for (std::size_t i = 0; i < rep.frames.size(); ++i) {
        const auto& f = rep.frames[i];
        const double trunk =
            norm(f.at(cfg.trunk_norm.second) - f.at(cfg.trunk_norm.first));
        if (trunk < kMinTrunkLength)
            throw DegenerateGeometry(
                "relative_distance_series: collapsed trunk at frame " +
                std::to_string(i));
        out.push_back(norm(f.at(JointName::Head) - f.at(j)) / trunk);
    }
    return out;
}

FeatureVector extract_features(const MotionRepetition& rep,
                               const FeatureConfig& cfg) {
    cfg.validate();
    auto violations = validate_repetition(rep);
    if (!violations.empty())
        throw DomainError("extract_features: invalid repetition: " +
                          violations.front());

    const bool left = resolve_left(rep, cfg);
    const ArmJoints arm = arm_for(left);
    const std::size_t n = rep.frames.size();

    std::vector<double> ts(n);
    for (std::size_t i = 0; i < n; ++i) ts[i] = rep.frames[i].t;

    auto series_at = [&](auto&& fn) {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            try {
                out[i] = fn(rep.frames[i]);
            } catch (const DegenerateGeometry& e) {
                throw DegenerateGeometry(std::string(e.what()) + " (frame " +
                                         std::to_string(i) + ")");
            }
        }
        return out;
    };

    const Vec3 up = cfg.up_axis;

    // Joint-angle and tilt series.
    std::vector<double> elbow_flexion = series_at([&](const JointFrame& f) {
        return joint_angle(f.at(arm.shoulder), f.at(arm.elbow),
                           f.at(arm.wrist));
    });
    std::vector<double> shoulder_flexion = series_at([&](const JointFrame& f) {
        // Angle of the upper arm against the downward trunk direction:
        // 0 = hanging, 90 = horizontal reach, 180 = overhead.
        const Vec3 down =
            f.at(JointName::SpineBase) - f.at(JointName::SpineShoulder);
        const Vec3 upper = f.at(arm.elbow) - f.at(arm.shoulder);
        const double nd = norm(down), nu = norm(upper);
        if (nd < kDegenerateRay || nu < kDegenerateRay)
            throw DegenerateGeometry("shoulder_flexion: degenerate segment");
        return deg_from_rad(std::acos(clamp_unit(dot(down, upper) / (nd * nu))));
    });
    std::vector<double> elbow_extension(n);
    for (std::size_t i = 0; i < n; ++i)
        elbow_extension[i] = 180.0 - elbow_flexion[i];
    std::vector<double> shoulder_abduction = series_at([&](const JointFrame& f) {
        // Upper arm projected onto the frontal plane, measured from the
        // downward trunk direction.
        const Vec3 trunk_up = normalized(f.at(JointName::SpineShoulder) -
                                         f.at(JointName::SpineBase));
        const Vec3 sh_line =
            normalized(f.at(arm.shoulder) - f.at(arm.other_shoulder));
        Vec3 fwd = cross(trunk_up, sh_line);
        if (norm(fwd) < kDegenerateRay)
            throw DegenerateGeometry("shoulder_abduction: collapsed frame");
        fwd = normalized(fwd);
        Vec3 upper = f.at(arm.elbow) - f.at(arm.shoulder);
        Vec3 proj = upper - fwd * dot(upper, fwd);
        const double np = norm(proj);
        if (np < kDegenerateRay) return 0.0;
        const Vec3 down = trunk_up * -1.0;
        return deg_from_rad(std::acos(clamp_unit(dot(proj, down) / np)));
    });
    std::vector<double> head_tilt = series_at([&](const JointFrame& f) {
        return tilt_angle(f.at(JointName::Head), f.at(JointName::Neck), up);
    });
    std::vector<double> spine_tilt = series_at([&](const JointFrame& f) {
        return tilt_angle(f.at(JointName::SpineShoulder),
                          f.at(JointName::SpineBase), up);
    });
    std::vector<double> shoulder_tilt = series_at([&](const JointFrame& f) {
        // Deviation of the shoulder line from horizontal.
        return std::abs(90.0 - tilt_angle(f.at(JointName::ShoulderR),
                                          f.at(JointName::ShoulderL), up));
    });

    // Displacement-magnitude paths for the wrist and elbow; rigid-motion
    // invariant since they reference the repetition's first frame.
    auto disp_path = [&](JointName j) {
        std::vector<double> out(n);
        const Vec3 start = rep.frames.front().at(j);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = norm(rep.frames[i].at(j) - start);
        return moving_average(out, cfg.smoothing_window);
    };
    const std::vector<double> wrist_path = disp_path(arm.wrist);
    const std::vector<double> elbow_path = disp_path(arm.elbow);

    auto abs_series = [](std::vector<double> v) {
        for (double& x : v) x = std::abs(x);
        return v;
    };

    std::vector<double> wrist_speed = derivative_series(wrist_path, ts, 1);
    std::vector<double> wrist_accel =
        abs_series(derivative_series(wrist_path, ts, 2));
    std::vector<double> wrist_jerk =
        abs_series(derivative_series(wrist_path, ts, 3));
    std::vector<double> elbow_speed = derivative_series(elbow_path, ts, 1);
    std::vector<double> elbow_accel =
        abs_series(derivative_series(elbow_path, ts, 2));
    std::vector<double> elbow_jerk =
        abs_series(derivative_series(elbow_path, ts, 3));

    std::vector<double> headwrist = relative_distance_series(rep, arm.wrist, cfg);
    std::vector<double> headelbow = relative_distance_series(rep, arm.elbow, cfg);

    const std::vector<const std::vector<double>*> all_series = {
        &elbow_flexion, &shoulder_flexion, &elbow_extension,
        &shoulder_abduction, &head_tilt,   &spine_tilt,
        &shoulder_tilt, &wrist_speed,      &wrist_accel,
        &wrist_jerk,    &elbow_speed,      &elbow_accel,
        &elbow_jerk,    &headwrist,        &headelbow};

    FeatureVector fv;
    fv.names = feature_names(cfg);
    fv.values.reserve(fv.names->size());
    for (const auto* s : all_series)
        for (Summary summary : cfg.summaries)
            fv.values.push_back(summarize(*s, summary));
    fv.mask.assign(fv.values.size(), 1);

    for (double v : fv.values)
        if (!std::isfinite(v))
            throw DomainError("extract_features: non-finite feature value");
    return fv;
}

NormParams fit_zscore(const std::vector<FeatureVector>& train) {
    if (train.empty()) throw EmptyTrainingSet();
    const std::size_t f = train.front().size();
    NormParams p;
    p.names = train.front().names;
    p.mean.assign(f, 0.0);
    p.std_dev.assign(f, 0.0);
    for (const auto& fv : train) {
        if (fv.size() != f)
            throw DimensionMismatch("fit_zscore: inconsistent feature count");
        for (std::size_t i = 0; i < f; ++i) p.mean[i] += fv.values[i];
    }
    for (double& m : p.mean) m /= train.size();
    for (const auto& fv : train)
        for (std::size_t i = 0; i < f; ++i) {
            const double d = fv.values[i] - p.mean[i];
            p.std_dev[i] += d * d;
        }
    for (double& s : p.std_dev) s = std::max(std::sqrt(s / train.size()), 1e-8);
    return p;
}

FeatureVector apply_zscore(const NormParams& p, const FeatureVector& fv) {
    if (fv.size() != p.mean.size())
        throw DimensionMismatch("apply_zscore: dimension mismatch");
    FeatureVector out = fv;
    for (std::size_t i = 0; i < fv.size(); ++i)
        out.values[i] = (fv.values[i] - p.mean[i]) / p.std_dev[i];
    return out;
}

void export_feature_csv(const Dataset& ds, const FeatureConfig& cfg,
                        std::ostream& out) {
    auto names = feature_names(cfg);
    out << "subject,exercise,side,label";
    for (const auto& n : *names) out << ',' << n;
    out << '\n';
    char buf[64];
    for (const auto& rep : ds.repetitions) {
        FeatureVector fv = extract_features(rep, cfg);
        out << rep.subject_id << ',' << to_string(rep.exercise) << ','
            << to_string(rep.side) << ',';
        if (rep.label) out << rep.label->overall;
        for (double v : fv.values) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace rehab
