#include "rehab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "rehab/errors.hpp"
#include "rehab/rng.hpp"

namespace rehab {

namespace {

constexpr double kFrameRate = 30.0;

// Neutral skeleton pose, meters. Subject faces the camera, y up, x to the
// subject's left in camera view, z toward the camera.
struct Pose {
    std::array<Vec3, kJointCount> j;
    Pose() {
        at(JointName::SpineBase) = {0.00, 0.90, 0.00};
        at(JointName::SpineMid) = {0.00, 1.15, 0.00};
        at(JointName::SpineShoulder) = {0.00, 1.40, 0.00};
        at(JointName::Neck) = {0.00, 1.50, 0.00};
        at(JointName::Head) = {0.00, 1.65, 0.00};
        at(JointName::ShoulderL) = {-0.20, 1.45, 0.00};
        at(JointName::ShoulderR) = {0.20, 1.45, 0.00};
        at(JointName::ElbowL) = {-0.22, 1.16, 0.03};
        at(JointName::ElbowR) = {0.22, 1.16, 0.03};
        at(JointName::WristL) = {-0.22, 0.90, 0.08};
        at(JointName::WristR) = {0.22, 0.90, 0.08};
    }
    Vec3& at(JointName n) { return j[static_cast<int>(n)]; }
    const Vec3& at(JointName n) const { return j[static_cast<int>(n)]; }
};

struct ArmTargets {
    Vec3 wrist;
    Vec3 elbow;
};

// Right-arm end poses per exercise; the left arm is produced by mirroring x.
ArmTargets exercise_targets(Exercise e) {
    switch (e) {
        case Exercise::E1_Cup:
            return {{0.06, 1.58, 0.18}, {0.20, 1.28, 0.14}};
        case Exercise::E2_Light:
            return {{0.32, 1.52, 0.42}, {0.26, 1.34, 0.20}};
        case Exercise::E3_Cane:
            return {{0.26, 0.98, 0.50}, {0.24, 1.10, 0.26}};
    }
    return {};
}

// Out-and-back movement phase in [0, 1]: minimum-jerk rise over the first
// half of the repetition, minimum-jerk return over the second half.
double movement_phase(double tau) {
    if (tau <= 0.5) return min_jerk_scalar(0.0, 1.0, tau * 2.0);
    return min_jerk_scalar(0.0, 1.0, (1.0 - tau) * 2.0);
}

struct NoiseComponent {
    double freq;
    double phase;
    Vec3 dir;
    double weight;
};

// Per-repetition random draws. All draws happen unconditionally and in a
// fixed order so that two repetitions with the same seed but different
// impairment values consume the RNG identically.
struct RepJitter {
    double amp_factor;              // displacement amplitude jitter
    Vec3 wrist_target_offset;
    Vec3 elbow_target_offset;
    std::array<Vec3, kJointCount> pose_offset;  // static per-rep pose shift
    std::array<NoiseComponent, 3> noise;
    double rom_scale_used;  // == impairment.rom_scale (kept for tests)
};

RepJitter draw_jitter(Rng& rng) {
    RepJitter jit;
    jit.amp_factor = rng.uniform(0.97, 1.03);
    jit.wrist_target_offset = {rng.uniform(-0.008, 0.008),
                               rng.uniform(-0.008, 0.008),
                               rng.uniform(-0.008, 0.008)};
    jit.elbow_target_offset = {rng.uniform(-0.006, 0.006),
                               rng.uniform(-0.006, 0.006),
                               rng.uniform(-0.006, 0.006)};
    for (int i = 0; i < kJointCount; ++i) {
        // Trunk and head keep a tight static jitter so an unimpaired spine
        // stays within a fraction of a degree of vertical.
        JointName n = static_cast<JointName>(i);
        bool trunk = n == JointName::Head || n == JointName::Neck ||
                     n == JointName::SpineShoulder ||
                     n == JointName::SpineMid || n == JointName::SpineBase;
        double a = trunk ? 0.0015 : 0.004;
        jit.pose_offset[i] = {rng.uniform(-a, a), rng.uniform(-a, a),
                              rng.uniform(-a, a)};
    }
    // Three band-limited tremor components spread over 2-6 Hz. The bands are
    // kept narrow so the jerk magnitude tracks the noise amplitude instead of
    // being dominated by the frequency draw.
    const double bands[3][2] = {{2.0, 2.8}, {3.4, 4.2}, {5.2, 6.0}};
    const double weights[3] = {0.25, 0.30, 0.45};
    for (int k = 0; k < 3; ++k) {
        NoiseComponent c;
        c.freq = rng.uniform(bands[k][0], bands[k][1]);
        c.phase = rng.uniform(0.0, 2.0 * kPi);
        Vec3 d = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                  rng.uniform(-1.0, 1.0)};
        double n = norm(d);
        c.dir = n > 1e-9 ? d * (1.0 / n) : Vec3{1, 0, 0};
        c.weight = weights[k];
        jit.noise[k] = c;
    }
    return jit;
}

Vec3 tremor_at(const RepJitter& jit, double amp, double t, double window) {
    Vec3 v{};
    for (const auto& c : jit.noise)
        v += c.dir * (c.weight * std::sin(2.0 * kPi * c.freq * t + c.phase));
    return v * (amp * window);
}

bool is_left(Side side) { return side == Side::Unaffected; }

Vec3 mirror_x(const Vec3& v) { return {-v.x, v.y, v.z}; }

JointName mirror_joint(JointName n) {
    switch (n) {
        case JointName::ShoulderL: return JointName::ShoulderR;
        case JointName::ShoulderR: return JointName::ShoulderL;
        case JointName::ElbowL: return JointName::ElbowR;
        case JointName::ElbowR: return JointName::ElbowL;
        case JointName::WristL: return JointName::WristR;
        case JointName::WristR: return JointName::WristL;
        default: return n;
    }
}

}  // namespace

void ImpairmentSpec::validate() const {
    if (!(rom_scale > 0.0 && rom_scale <= 1.0))
        throw ConfigError("rom_scale must be in (0, 1]");
    if (!(jerk_noise_amp >= 0.0))
        throw ConfigError("jerk_noise_amp must be >= 0");
    if (!(trunk_lean_deg >= 0.0 && trunk_lean_deg <= 60.0))
        throw DomainError("trunk_lean_deg must be in [0, 60]");
}

void CorpusSpec::validate() const {
    if (n_patients < 1 || n_healthy < 0)
        throw ConfigError("corpus spec: counts must be positive");
    if (reps_per_patient_side < 1 || reps_per_healthy < 1)
        throw ConfigError("corpus spec: repetition counts must be >= 1");
    if (exercises.empty())
        throw ConfigError("corpus spec: at least one exercise");
}

double min_jerk_scalar(double x0, double xf, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0))
        throw DomainError("min_jerk_scalar: tau outside [0, 1]");
    const double t3 = tau * tau * tau;
    const double t4 = t3 * tau;
    const double t5 = t4 * tau;
    return x0 + (xf - x0) * (10.0 * t3 - 15.0 * t4 + 6.0 * t5);
}

std::pair<MotionRepetition, QualityLabel> synth_repetition(
    Exercise exercise, const ImpairmentSpec& impairment, double duration,
    std::uint64_t seed, Side side, const std::string& subject_id) {
    impairment.validate();
    if (!(duration >= 1.0 && duration <= 10.0))
        throw DomainError("synth_repetition: duration outside [1, 10] s");

    Rng rng(derive_seed(seed, 0xfeedbeef));
    RepJitter jit = draw_jitter(rng);
    jit.rom_scale_used = impairment.rom_scale;

    const bool left = is_left(side);
    const Pose base;
    const ArmTargets tgt = exercise_targets(exercise);

    const JointName wrist = left ? JointName::WristL : JointName::WristR;
    const JointName elbow = left ? JointName::ElbowL : JointName::ElbowR;

    // Motion is authored for the right arm and mirrored afterwards, so the
    // jitter draws are shared between sides.
    const Vec3 wrist_rest = base.at(JointName::WristR);
    const Vec3 elbow_rest = base.at(JointName::ElbowR);
    const Vec3 wrist_disp = (tgt.wrist + jit.wrist_target_offset - wrist_rest) *
                            (impairment.rom_scale * jit.amp_factor);
    const Vec3 elbow_disp = (tgt.elbow + jit.elbow_target_offset - elbow_rest) *
                            (impairment.rom_scale * jit.amp_factor);

    // Lean direction: horizontal component of the reach direction.
    Vec3 lean_dir = {tgt.wrist.x - wrist_rest.x, 0.0,
                     tgt.wrist.z - wrist_rest.z};
    lean_dir = norm(lean_dir) > 1e-9 ? normalized(lean_dir) : Vec3{0, 0, 1};
    const Vec3 lean_axis = normalized(cross(Vec3{0, 1, 0}, lean_dir));

    const int n_frames = static_cast<int>(std::lround(duration * kFrameRate)) + 1;

    MotionRepetition rep;
    rep.subject_id = subject_id;
    rep.exercise = exercise;
    rep.side = side;
    rep.frames.reserve(n_frames);

    const Vec3 spine_base = base.at(JointName::SpineBase);
    for (int i = 0; i < n_frames; ++i) {
        const double t = static_cast<double>(i) / kFrameRate;
        const double tau = n_frames > 1
                               ? static_cast<double>(i) / (n_frames - 1)
                               : 0.0;
        const double phase = movement_phase(tau);
        const double window = std::sin(kPi * tau);

        JointFrame f;
        f.t = t;

        // Trunk, head and shoulders lean toward the reach, scaled by phase.
        const double lean_rad =
            rad_from_deg(impairment.trunk_lean_deg) * phase;
        for (JointName n : {JointName::SpineBase, JointName::SpineMid,
                            JointName::SpineShoulder, JointName::Neck,
                            JointName::Head, JointName::ShoulderL,
                            JointName::ShoulderR}) {
            Vec3 p = base.at(n);
            // SpineMid bends at 60% of the full lean, joints above at 100%.
            double frac = 1.0;
            if (n == JointName::SpineBase) frac = 0.0;
            else if (n == JointName::SpineMid) frac = 0.6;
            Vec3 rel = p - spine_base;
            Vec3 leaned =
                spine_base + rotate_about_axis(rel, lean_axis, lean_rad * frac);
            f.at(n) = leaned + jit.pose_offset[static_cast<int>(n)];
        }

        // Active arm follows the task path; tremor rides on top.
        const Vec3 tremor =
            tremor_at(jit, impairment.jerk_noise_amp, t, window);
        Vec3 wrist_p = wrist_rest + wrist_disp * phase + tremor;
        Vec3 elbow_p = elbow_rest + elbow_disp * phase + tremor * 0.5;
        f.at(JointName::WristR) =
            wrist_p + jit.pose_offset[static_cast<int>(JointName::WristR)];
        f.at(JointName::ElbowR) =
            elbow_p + jit.pose_offset[static_cast<int>(JointName::ElbowR)];

        // Passive arm hangs from its (possibly leaned) shoulder.
        const Vec3 sh_l = f.at(JointName::ShoulderL);
        const Vec3 sh_l_base = base.at(JointName::ShoulderL);
        f.at(JointName::ElbowL) =
            sh_l + (base.at(JointName::ElbowL) - sh_l_base) +
            jit.pose_offset[static_cast<int>(JointName::ElbowL)];
        f.at(JointName::WristL) =
            sh_l + (base.at(JointName::WristL) - sh_l_base) +
            jit.pose_offset[static_cast<int>(JointName::WristL)];

        if (left) {
            JointFrame m;
            m.t = f.t;
            for (int k = 0; k < kJointCount; ++k) {
                JointName n = static_cast<JointName>(k);
                m.at(mirror_joint(n)) = mirror_x(f.at(n));
            }
            f = m;
        }
        rep.frames.push_back(f);
    }

    const LabelThresholds th;
    QualityLabel label;
    label.components["rom"] = impairment.rom_scale >= th.min_rom_scale ? 1 : 0;
    label.components["smoothness"] =
        impairment.jerk_noise_amp <= th.max_jerk_noise_amp ? 1 : 0;
    label.components["compensation"] =
        impairment.trunk_lean_deg <= th.max_trunk_lean_deg ? 1 : 0;
    label.overall = label.components["rom"] && label.components["smoothness"] &&
                    label.components["compensation"];
    rep.label = label;
    return {std::move(rep), label};
}

namespace {

// Per-subject severity. Draws avoid a band around each label threshold so
// the per-repetition jitter cannot flip the oracle label within a subject.
struct Severity {
    double rom_scale;
    double jerk_amp;
    double lean_deg;
};

Severity draw_patient_severity(Rng& rng) {
    Severity s;
    s.rom_scale = rng.bernoulli(0.55) ? rng.uniform(0.45, 0.75)
                                      : rng.uniform(0.85, 1.0);
    s.jerk_amp = rng.bernoulli(0.5) ? rng.uniform(0.012, 0.025)
                                    : rng.uniform(0.0, 0.006);
    s.lean_deg = rng.bernoulli(0.5) ? rng.uniform(7.0, 15.0)
                                    : rng.uniform(0.0, 3.0);
    return s;
}

ImpairmentSpec jitter_severity(const Severity& s, Rng& rng) {
    ImpairmentSpec imp;
    imp.rom_scale = std::clamp(s.rom_scale + rng.uniform(-0.03, 0.03), 0.05, 1.0);
    imp.jerk_noise_amp = std::max(0.0, s.jerk_amp + rng.uniform(-0.0015, 0.0015));
    imp.trunk_lean_deg =
        std::clamp(s.lean_deg + rng.uniform(-0.8, 0.8), 0.0, 60.0);
    return imp;
}

int fugl_meyer_from(const Severity& s) {
    double health = (s.rom_scale + (1.0 - s.jerk_amp / 0.025) +
                     (1.0 - s.lean_deg / 15.0)) /
                    3.0;
    int fm = static_cast<int>(std::lround(10.0 + health * 55.0));
    return std::clamp(fm, 0, 66);
}

std::string pad_id(const char* prefix, int i) {
    std::string n = std::to_string(i + 1);
    if (n.size() < 2) n = "0" + n;
    return prefix + n;
}

}  // namespace

Dataset synth_dataset(const CorpusSpec& spec) {
    spec.validate();
    Dataset ds;

    for (int p = 0; p < spec.n_patients; ++p) {
        const std::string id = pad_id("P", p);
        Rng subj_rng(derive_seed(spec.seed, 0x50, p));
        Severity sev = draw_patient_severity(subj_rng);

        SubjectMeta meta;
        meta.subject_id = id;
        meta.cohort = Cohort::Patient;
        meta.fugl_meyer = fugl_meyer_from(sev);
        ds.subjects.push_back(meta);

        for (std::size_t e = 0; e < spec.exercises.size(); ++e) {
            for (int r = 0; r < spec.reps_per_patient_side; ++r) {
                for (Side side : {Side::Affected, Side::Unaffected}) {
                    const std::uint64_t rep_seed = derive_seed(
                        derive_seed(spec.seed, 0x5e9, p),
                        e * 1000 + r * 10 + static_cast<int>(side));
                    Rng rep_rng(rep_seed);
                    ImpairmentSpec imp;  // unaffected side stays clean
                    if (side == Side::Affected)
                        imp = jitter_severity(sev, rep_rng);
                    else
                        (void)jitter_severity(sev, rep_rng);  // keep draws aligned
                    const double duration = rep_rng.uniform(2.2, 2.8);
                    auto [rep, label] = synth_repetition(
                        spec.exercises[e], imp, duration,
                        derive_seed(rep_seed, 0x7e9), side, id);
                    rep.rep_index = r;
                    ds.repetitions.push_back(std::move(rep));
                }
            }
        }
    }

    for (int h = 0; h < spec.n_healthy; ++h) {
        const std::string id = pad_id("H", h);
        SubjectMeta meta;
        meta.subject_id = id;
        meta.cohort = Cohort::Healthy;
        ds.subjects.push_back(meta);

        for (std::size_t e = 0; e < spec.exercises.size(); ++e) {
            for (int r = 0; r < spec.reps_per_healthy; ++r) {
                const std::uint64_t rep_seed = derive_seed(
                    derive_seed(spec.seed, 0x4ea17, h), e * 1000 + r * 10);
                Rng rep_rng(rep_seed);
                const double duration = rep_rng.uniform(2.2, 2.8);
                auto [rep, label] = synth_repetition(
                    spec.exercises[e], ImpairmentSpec{}, duration,
                    derive_seed(rep_seed, 0x7e9), Side::Dominant, id);
                rep.rep_index = r;
                ds.repetitions.push_back(std::move(rep));
            }
        }
    }
    return ds;
}

namespace detail {

CorpusSpec corpus_spec_from_json(const nlohmann::json& j) {
    static const std::set<std::string> kAllowed = {
        "n_patients",       "n_healthy", "reps_per_patient_side",
        "reps_per_healthy", "exercises", "seed"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!kAllowed.count(key))
            throw ConfigError("unknown corpus spec key '" + key + "'");
    }
    CorpusSpec spec;
    if (j.contains("n_patients")) spec.n_patients = j["n_patients"].get<int>();
    if (j.contains("n_healthy")) spec.n_healthy = j["n_healthy"].get<int>();
    if (j.contains("reps_per_patient_side"))
        spec.reps_per_patient_side = j["reps_per_patient_side"].get<int>();
    if (j.contains("reps_per_healthy"))
        spec.reps_per_healthy = j["reps_per_healthy"].get<int>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("exercises")) {
        spec.exercises.clear();
        for (const auto& e : j["exercises"]) {
            auto ex = exercise_from_string(e.get<std::string>());
            if (!ex)
                throw ConfigError("unknown exercise '" +
                                  e.get<std::string>() + "'");
            spec.exercises.push_back(*ex);
        }
    }
    spec.validate();
    return spec;
}

}  // namespace detail

CorpusSpec corpus_spec_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("invalid corpus spec JSON: ") + e.what());
    }
    return detail::corpus_spec_from_json(j);
}

}  // namespace rehab
