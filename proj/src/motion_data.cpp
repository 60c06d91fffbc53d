#include "rehab/motion_data.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rehab/errors.hpp"

namespace rehab {

using nlohmann::json;

namespace {

constexpr double kMinDuration = 0.5;
constexpr double kMaxDuration = 30.0;
constexpr std::size_t kMinFrames = 15;

const std::array<std::string, kJointCount> kJointNames = {
    "Head",      "Neck",   "SpineShoulder", "SpineMid", "SpineBase", "ShoulderL",
    "ShoulderR", "ElbowL", "ElbowR",        "WristL",   "WristR"};

const std::array<std::string, 3> kExerciseNames = {"E1", "E2", "E3"};
const std::array<std::string, 3> kSideNames = {"affected", "unaffected",
                                               "dominant"};
const std::array<std::string, 2> kCohortNames = {"patient", "healthy"};

}  // namespace

const std::array<std::string, kJointCount>& joint_names() {
    return kJointNames;
}

const std::string& to_string(JointName j) {
    return kJointNames[static_cast<int>(j)];
}
const std::string& to_string(Exercise e) {
    return kExerciseNames[static_cast<int>(e)];
}
const std::string& to_string(Side s) { return kSideNames[static_cast<int>(s)]; }
const std::string& to_string(Cohort c) {
    return kCohortNames[static_cast<int>(c)];
}

std::optional<JointName> joint_from_string(const std::string& s) {
    for (int i = 0; i < kJointCount; ++i)
        if (kJointNames[i] == s) return static_cast<JointName>(i);
    return std::nullopt;
}

std::optional<Exercise> exercise_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (kExerciseNames[i] == s) return static_cast<Exercise>(i);
    return std::nullopt;
}

std::optional<Side> side_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (kSideNames[i] == s) return static_cast<Side>(i);
    return std::nullopt;
}

std::optional<Cohort> cohort_from_string(const std::string& s) {
    for (int i = 0; i < 2; ++i)
        if (kCohortNames[i] == s) return static_cast<Cohort>(i);
    return std::nullopt;
}

const SubjectMeta* Dataset::find_subject(const std::string& id) const {
    for (const auto& s : subjects)
        if (s.subject_id == id) return &s;
    return nullptr;
}

std::vector<std::string> validate_repetition(const MotionRepetition& rep) {
    std::vector<std::string> violations;
    if (rep.subject_id.empty()) violations.push_back("empty subject id");
    if (rep.frames.size() < kMinFrames) violations.push_back("too few frames");

    bool monotone = true;
    bool finite = true;
    for (std::size_t i = 0; i < rep.frames.size(); ++i) {
        const auto& f = rep.frames[i];
        if (f.t < 0.0 || !std::isfinite(f.t)) {
            violations.push_back("negative or non-finite timestamp");
            break;
        }
        if (i > 0 && f.t <= rep.frames[i - 1].t) monotone = false;
        for (const auto& p : f.joints)
            if (!std::isfinite(p.x) || !std::isfinite(p.y) ||
                !std::isfinite(p.z))
                finite = false;
    }
    if (!monotone) violations.push_back("non-monotone time");
    if (!finite) violations.push_back("non-finite joint coordinate");

    if (rep.frames.size() >= 2) {
        double d = rep.duration();
        if (d < kMinDuration) violations.push_back("duration below 0.5 s");
        if (d > kMaxDuration) violations.push_back("duration above 30 s");
    }

    if (rep.label && !rep.label->components.empty()) {
        int expected = 1;
        for (const auto& [name, v] : rep.label->components) {
            (void)name;
            expected = expected && v;
        }
        if (rep.label->overall != expected)
            violations.push_back("label overall is not the AND of components");
    }
    return violations;
}

std::vector<std::string> validate_dataset(const Dataset& ds) {
    std::vector<std::string> violations;

    std::set<std::string> subject_ids;
    for (const auto& s : ds.subjects) {
        if (!subject_ids.insert(s.subject_id).second)
            violations.push_back("duplicate subject '" + s.subject_id + "'");
        if (s.fugl_meyer && s.cohort != Cohort::Patient)
            violations.push_back("fugl_meyer on non-patient '" + s.subject_id +
                                 "'");
        if (s.fugl_meyer && (*s.fugl_meyer < 0 || *s.fugl_meyer > 66))
            violations.push_back("fugl_meyer out of range for '" +
                                 s.subject_id + "'");
    }

    std::set<std::tuple<std::string, int, int, int>> keys;
    for (const auto& rep : ds.repetitions) {
        const SubjectMeta* meta = ds.find_subject(rep.subject_id);
        if (!meta) {
            violations.push_back("repetition references unknown subject '" +
                                 rep.subject_id + "'");
            continue;
        }
        if (rep.side == Side::Dominant && meta->cohort != Cohort::Healthy)
            violations.push_back("side=dominant on patient '" +
                                 rep.subject_id + "'");
        auto key = std::make_tuple(rep.subject_id,
                                   static_cast<int>(rep.exercise),
                                   static_cast<int>(rep.side), rep.rep_index);
        if (!keys.insert(key).second)
            violations.push_back("duplicate repetition key for '" +
                                 rep.subject_id + "'");
        for (const auto& v : validate_repetition(rep))
            violations.push_back(rep.subject_id + ": " + v);
    }
    return violations;
}

namespace {

Vec3 parse_position(const json& arr, std::size_t line) {
    if (!arr.is_array() || arr.size() != 3)
        throw SchemaError(line, "joint position must be a 3-element array");
    for (const auto& c : arr)
        if (!c.is_number())
            throw SchemaError(line, "joint coordinate is not a number");
    return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()};
}

MotionRepetition parse_record(const json& rec, std::size_t line,
                              SubjectMeta& meta_out, bool& has_fugl) {
    if (!rec.is_object()) throw SchemaError(line, "record is not an object");

    static const std::set<std::string> kAllowed = {
        "subject", "cohort", "fugl_meyer", "exercise", "side", "label",
        "frames"};
    for (const auto& [key, value] : rec.items()) {
        (void)value;
        if (!kAllowed.count(key))
            throw SchemaError(line, "unknown top-level key '" + key + "'");
    }

    for (const char* req : {"subject", "cohort", "exercise", "side", "frames"})
        if (!rec.contains(req))
            throw SchemaError(line, std::string("missing field '") + req + "'");

    MotionRepetition rep;
    rep.subject_id = rec.at("subject").get<std::string>();

    auto cohort = cohort_from_string(rec.at("cohort").get<std::string>());
    if (!cohort)
        throw SchemaError(line, "unknown cohort '" +
                                    rec.at("cohort").get<std::string>() + "'");
    auto exercise = exercise_from_string(rec.at("exercise").get<std::string>());
    if (!exercise)
        throw SchemaError(line, "unknown exercise '" +
                                    rec.at("exercise").get<std::string>() +
                                    "'");
    auto side = side_from_string(rec.at("side").get<std::string>());
    if (!side)
        throw SchemaError(
            line, "unknown side '" + rec.at("side").get<std::string>() + "'");
    rep.exercise = *exercise;
    rep.side = *side;

    meta_out.subject_id = rep.subject_id;
    meta_out.cohort = *cohort;
    has_fugl = rec.contains("fugl_meyer") && !rec.at("fugl_meyer").is_null();
    if (has_fugl) {
        if (!rec.at("fugl_meyer").is_number_integer())
            throw SchemaError(line, "fugl_meyer must be an integer");
        meta_out.fugl_meyer = rec.at("fugl_meyer").get<int>();
    }

    if (rec.contains("label") && !rec.at("label").is_null()) {
        const json& lab = rec.at("label");
        if (!lab.is_object() || !lab.contains("overall"))
            throw SchemaError(line, "label must be an object with 'overall'");
        QualityLabel q;
        q.overall = lab.at("overall").get<int>();
        if (q.overall != 0 && q.overall != 1)
            throw SchemaError(line, "label overall must be 0 or 1");
        if (lab.contains("components") && !lab.at("components").is_null()) {
            for (const auto& [name, v] : lab.at("components").items()) {
                int b = v.get<int>();
                if (b != 0 && b != 1)
                    throw SchemaError(line, "label component '" + name +
                                                "' must be 0 or 1");
                q.components[name] = b;
            }
        }
        rep.label = q;
    }

    const json& frames = rec.at("frames");
    if (!frames.is_array())
        throw SchemaError(line, "frames must be an array");
    for (const auto& fr : frames) {
        if (!fr.is_object() || !fr.contains("t") || !fr.contains("joints"))
            throw SchemaError(line, "frame must have 't' and 'joints'");
        JointFrame frame;
        frame.t = fr.at("t").get<double>();
        const json& joints = fr.at("joints");
        if (!joints.is_object())
            throw SchemaError(line, "frame joints must be an object");
        std::array<bool, kJointCount> seen{};
        for (const auto& [name, pos] : joints.items()) {
            auto j = joint_from_string(name);
            if (!j) throw SchemaError(line, "unknown joint '" + name + "'");
            int idx = static_cast<int>(*j);
            if (seen[idx])
                throw SchemaError(line, "duplicate joint '" + name + "'");
            seen[idx] = true;
            frame.joints[idx] = parse_position(pos, line);
        }
        for (int i = 0; i < kJointCount; ++i)
            if (!seen[i])
                throw SchemaError(line,
                                  "missing joint '" + kJointNames[i] + "'");
        rep.frames.push_back(frame);
    }

    auto violations = validate_repetition(rep);
    if (!violations.empty()) throw SchemaError(line, violations.front());
    return rep;
}

}  // namespace

Dataset parse_dataset_stream(std::istream& in) {
    Dataset ds;
    std::map<std::string, SubjectMeta> subjects;          // id -> meta
    std::map<std::string, std::size_t> first_seen_line;   // id -> line
    std::vector<std::string> subject_order;
    std::map<std::tuple<std::string, int, int>, int> rep_counters;

    std::string linebuf;
    std::size_t line = 0;
    std::size_t records = 0;
    while (std::getline(in, linebuf)) {
        ++line;
        // Skip blank lines.
        if (linebuf.find_first_not_of(" \t\r") == std::string::npos) continue;

        json rec;
        try {
            rec = json::parse(linebuf);
        } catch (const json::parse_error& e) {
            throw SchemaError(line, std::string("invalid JSON: ") + e.what());
        }

        SubjectMeta meta;
        bool has_fugl = false;
        MotionRepetition rep = parse_record(rec, line, meta, has_fugl);

        if (meta.cohort == Cohort::Healthy && has_fugl)
            throw SchemaError(line, "fugl_meyer present for healthy subject");
        if (meta.cohort == Cohort::Healthy && rep.side != Side::Dominant)
            throw SchemaError(line, "healthy subjects use side=dominant");
        if (meta.cohort == Cohort::Patient && rep.side == Side::Dominant)
            throw SchemaError(line, "side=dominant only for healthy subjects");
        if (meta.fugl_meyer && (*meta.fugl_meyer < 0 || *meta.fugl_meyer > 66))
            throw SchemaError(line, "fugl_meyer out of range");

        auto it = subjects.find(meta.subject_id);
        if (it == subjects.end()) {
            subjects[meta.subject_id] = meta;
            first_seen_line[meta.subject_id] = line;
            subject_order.push_back(meta.subject_id);
        } else {
            if (it->second.cohort != meta.cohort)
                throw SchemaError(line, "subject '" + meta.subject_id +
                                            "' changes cohort");
            if (meta.fugl_meyer) {
                if (it->second.fugl_meyer &&
                    *it->second.fugl_meyer != *meta.fugl_meyer)
                    throw SchemaError(line, "subject '" + meta.subject_id +
                                                "' changes fugl_meyer");
                it->second.fugl_meyer = meta.fugl_meyer;
            }
        }

        auto key = std::make_tuple(rep.subject_id,
                                   static_cast<int>(rep.exercise),
                                   static_cast<int>(rep.side));
        rep.rep_index = rep_counters[key]++;
        ds.repetitions.push_back(std::move(rep));
        ++records;
    }
    if (records == 0) throw SchemaError(line, "no records");

    for (const auto& id : subject_order) ds.subjects.push_back(subjects[id]);

    auto violations = validate_dataset(ds);
    if (!violations.empty()) throw SchemaError(line, violations.front());
    return ds;
}

Dataset parse_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return parse_dataset_stream(in);
}

namespace {

json repetition_to_json(const MotionRepetition& rep, const SubjectMeta& meta) {
    json rec;
    rec["subject"] = rep.subject_id;
    rec["cohort"] = to_string(meta.cohort);
    if (meta.fugl_meyer) rec["fugl_meyer"] = *meta.fugl_meyer;
    rec["exercise"] = to_string(rep.exercise);
    rec["side"] = to_string(rep.side);
    if (rep.label) {
        json lab;
        lab["overall"] = rep.label->overall;
        if (!rep.label->components.empty()) {
            json comps;
            for (const auto& [name, v] : rep.label->components)
                comps[name] = v;
            lab["components"] = comps;
        }
        rec["label"] = lab;
    }
    json frames = json::array();
    for (const auto& f : rep.frames) {
        json jf;
        jf["t"] = f.t;
        json joints;
        for (int i = 0; i < kJointCount; ++i) {
            const Vec3& p = f.joints[i];
            joints[kJointNames[i]] = {p.x, p.y, p.z};
        }
        jf["joints"] = joints;
        frames.push_back(jf);
    }
    rec["frames"] = frames;
    return rec;
}

}  // namespace

std::string serialize_dataset(const Dataset& ds) {
    std::ostringstream out;
    for (const auto& rep : ds.repetitions) {
        const SubjectMeta* meta = ds.find_subject(rep.subject_id);
        if (!meta)
            throw UnknownSubject(rep.subject_id);
        out << repetition_to_json(rep, *meta).dump() << '\n';
    }
    return out.str();
}

void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << serialize_dataset(ds);
}

std::pair<Dataset, Dataset> split_by_subject(const Dataset& ds,
                                             const std::string& held_out) {
    if (!ds.find_subject(held_out)) throw UnknownSubject(held_out);
    Dataset train, test;
    for (const auto& s : ds.subjects) {
        if (s.subject_id == held_out)
            test.subjects.push_back(s);
        else
            train.subjects.push_back(s);
    }
    for (const auto& r : ds.repetitions) {
        if (r.subject_id == held_out)
            test.repetitions.push_back(r);
        else
            train.repetitions.push_back(r);
    }
    return {std::move(train), std::move(test)};
}

}  // namespace rehab
