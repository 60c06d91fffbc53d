#include "rehab/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "rehab/errors.hpp"

namespace rehab {

namespace {

const std::map<std::string, std::string>& family_table() {
    static const std::map<std::string, std::string> table = {
        {"elbow_flexion", "rom"},      {"shoulder_flexion", "rom"},
        {"elbow_extension", "rom"},    {"shoulder_abduction", "rom"},
        {"headwrist_dist", "rom"},     {"headelbow_dist", "rom"},
        {"wrist_accel", "smoothness"}, {"wrist_jerk", "smoothness"},
        {"elbow_accel", "smoothness"}, {"elbow_jerk", "smoothness"},
        {"head_tilt", "compensation"}, {"spine_tilt", "compensation"},
        {"shoulder_tilt", "compensation"},
        {"wrist_speed", "speed"},      {"elbow_speed", "speed"},
    };
    return table;
}

std::string substitute(std::string text, const std::string& feature) {
    const std::string key = "{feature}";
    for (std::size_t pos = text.find(key); pos != std::string::npos;
         pos = text.find(key, pos))
        text.replace(pos, key.size(), feature);
    return text;
}

}  // namespace

NormalProfile fit_normal_profile(const std::vector<FeatureVector>& normals) {
    if (normals.size() < 3) throw InsufficientNormals(normals.size());
    const std::size_t f = normals.front().size();
    if (!normals.front().names)
        throw NameOrderMismatch("normal profile: repetitions carry no names");
    for (const auto& fv : normals) {
        if (fv.size() != f || !fv.names || *fv.names != *normals.front().names)
            throw NameOrderMismatch("normal profile: feature names disagree");
        if (!fv.all_acquired())
            throw DomainError("normal profile: repetitions must be fully acquired");
    }
    NormalProfile p;
    p.names = normals.front().names;
    p.source_count = normals.size();
    p.mean.assign(f, 0.0);
    p.std_dev.assign(f, 0.0);
    for (const auto& fv : normals)
        for (std::size_t i = 0; i < f; ++i) p.mean[i] += fv.values[i];
    for (double& m : p.mean) m /= normals.size();
    for (const auto& fv : normals)
        for (std::size_t i = 0; i < f; ++i) {
            const double d = fv.values[i] - p.mean[i];
            p.std_dev[i] += d * d;
        }
    for (double& s : p.std_dev)
        s = std::max(std::sqrt(s / normals.size()), 1e-8);
    return p;
}

std::vector<const MotionRepetition*> normal_pool(const Dataset& ds,
                                                 const std::string& subject_id,
                                                 Exercise exercise) {
    if (!ds.find_subject(subject_id)) throw UnknownSubject(subject_id);
    std::vector<const MotionRepetition*> own;
    for (const auto& rep : ds.repetitions)
        if (rep.subject_id == subject_id && rep.exercise == exercise &&
            rep.side == Side::Unaffected)
            own.push_back(&rep);
    if (own.size() >= 3) return own;

    std::vector<const MotionRepetition*> healthy;
    for (const auto& rep : ds.repetitions) {
        const SubjectMeta* meta = ds.find_subject(rep.subject_id);
        if (meta->cohort == Cohort::Healthy && rep.exercise == exercise)
            healthy.push_back(&rep);
    }
    return healthy;
}

std::vector<DeviationScore> deviation_scores(const NormalProfile& profile,
                                             const FeatureVector& fv) {
    if (!profile.names || !fv.names)
        throw NameOrderMismatch("deviation: missing feature names");
    if (*profile.names != *fv.names)
        throw NameOrderMismatch("deviation: feature name orders differ");
    std::vector<DeviationScore> out;
    out.reserve(fv.size());
    for (std::size_t i = 0; i < fv.size(); ++i) {
        if (!fv.mask.empty() && !fv.mask[i]) continue;
        out.push_back({(*fv.names)[i],
                       (fv.values[i] - profile.mean[i]) / profile.std_dev[i]});
    }
    return out;
}

std::string family_of(const std::string& feature_name) {
    std::string base = feature_name;
    const std::size_t dot = base.rfind('.');
    if (dot != std::string::npos) base.resize(dot);
    const auto& table = family_table();
    const auto it = table.find(base);
    return it == table.end() ? "other" : it->second;
}

FeedbackTemplates default_templates() {
    FeedbackTemplates t;
    t.by_family["rom"] = {
        "You are reaching further than your usual range on {feature}; ease "
        "back to a comfortable extent.",
        "Your movement covered less range than usual ({feature}); try to "
        "reach a little further."};
    t.by_family["smoothness"] = {
        "The motion was shakier than usual ({feature}); slow down and aim "
        "for one smooth movement.",
        "The motion was unusually damped ({feature}); let the movement flow "
        "naturally."};
    t.by_family["compensation"] = {
        "Your trunk or head leaned more than usual ({feature}); keep your "
        "back upright and let the arm do the work.",
        "Your posture was unusually rigid ({feature}); stay relaxed while "
        "keeping the back straight."};
    t.by_family["speed"] = {
        "The movement was faster than your usual pace ({feature}); slow "
        "down for better control.",
        "The movement was slower than your usual pace ({feature}); try to "
        "complete it a bit more briskly."};
    t.encouragement = "Good repetition, keep going.";
    return t;
}

FeedbackTemplates load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("templates '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw ConfigError("templates: expected an object");
    FeedbackTemplates t;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "encouragement") {
            if (!it.value().is_string())
                throw ConfigError("templates: encouragement must be a string");
            t.encouragement = it.value().get<std::string>();
            continue;
        }
        const auto& entry = it.value();
        if (!entry.is_object() || !entry.contains("above") ||
            !entry.contains("below") || entry.size() != 2)
            throw ConfigError("templates: family '" + it.key() +
                              "' needs exactly 'above' and 'below'");
        t.by_family[it.key()] = {entry.at("above").get<std::string>(),
                                 entry.at("below").get<std::string>()};
    }
    return t;
}

FeedbackReport generate_feedback(const std::vector<DeviationScore>& scores,
                                 int predicted_label,
                                 const FeedbackTemplates& templates,
                                 double threshold) {
    if (threshold <= 0.0)
        throw DomainError("feedback: threshold must be positive");
    FeedbackReport report;
    report.predicted_label = predicted_label;
    report.threshold = threshold;

    for (const auto& s : scores) {
        FeedbackItem item;
        item.feature = s.feature;
        item.family = family_of(s.feature);
        item.z = s.z;
        item.direction = s.z >= 0.0 ? "above" : "below";
        item.flagged = std::abs(s.z) > threshold;
        report.items.push_back(std::move(item));
    }

    // Strongest deviations first; one message per family.
    std::vector<std::size_t> flagged;
    for (std::size_t i = 0; i < report.items.size(); ++i)
        if (report.items[i].flagged) flagged.push_back(i);
    std::stable_sort(flagged.begin(), flagged.end(),
                     [&](std::size_t a, std::size_t b) {
                         return std::abs(report.items[a].z) >
                                std::abs(report.items[b].z);
                     });
    std::vector<std::string> seen;
    for (std::size_t i : flagged) {
        FeedbackItem& item = report.items[i];
        if (std::find(seen.begin(), seen.end(), item.family) != seen.end())
            continue;
        seen.push_back(item.family);
        const auto it = templates.by_family.find(item.family);
        if (it == templates.by_family.end()) throw MissingTemplate(item.family);
        const std::string& text =
            item.direction == "above" ? it->second.first : it->second.second;
        item.message = substitute(text, item.feature);
        report.messages.push_back(item.message);
    }

    if (report.messages.empty() && predicted_label == 1 &&
        !templates.encouragement.empty())
        report.messages.push_back(templates.encouragement);
    return report;
}

std::string render_feedback_text(const FeedbackReport& report) {
    std::string out;
    out += "predicted quality: ";
    out += report.predicted_label == 1 ? "correct" : "incorrect";
    out += "\n";
    for (const auto& msg : report.messages) {
        out += "- ";
        out += msg;
        out += "\n";
    }
    char buf[160];
    for (const auto& item : report.items) {
        if (!item.flagged) continue;
        std::snprintf(buf, sizeof buf, "  %s: z=%+.2f (%s normal)\n",
                      item.feature.c_str(), item.z, item.direction.c_str());
        out += buf;
    }
    return out;
}

std::string render_feedback_json(const FeedbackReport& report) {
    nlohmann::json j;
    j["prediction"] = report.predicted_label;
    j["threshold"] = report.threshold;
    j["messages"] = report.messages;
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : report.items)
        items.push_back({{"feature", item.feature},
                         {"family", item.family},
                         {"z", item.z},
                         {"direction", item.direction},
                         {"flagged", item.flagged},
                         {"message", item.message}});
    j["features"] = items;
    return j.dump(2);
}

}  // namespace rehab
