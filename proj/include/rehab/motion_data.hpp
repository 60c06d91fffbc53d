#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rehab/geometry.hpp"

namespace rehab {

// Closed upper-body joint set. Parsing rejects any name outside this list.
enum class JointName : int {
    Head = 0,
    Neck,
    SpineShoulder,
    SpineMid,
    SpineBase,
    ShoulderL,
    ShoulderR,
    ElbowL,
    ElbowR,
    WristL,
    WristR,
};

constexpr int kJointCount = 11;

const std::array<std::string, kJointCount>& joint_names();
const std::string& to_string(JointName j);
std::optional<JointName> joint_from_string(const std::string& s);

enum class Exercise : int { E1_Cup = 0, E2_Light, E3_Cane };
enum class Side : int { Affected = 0, Unaffected, Dominant };
enum class Cohort : int { Patient = 0, Healthy };

const std::string& to_string(Exercise e);
const std::string& to_string(Side s);
const std::string& to_string(Cohort c);
std::optional<Exercise> exercise_from_string(const std::string& s);
std::optional<Side> side_from_string(const std::string& s);
std::optional<Cohort> cohort_from_string(const std::string& s);

// One sampled skeleton pose. Positions are meters in the camera frame.
struct JointFrame {
    double t = 0.0;
    std::array<Vec3, kJointCount> joints{};

    const Vec3& at(JointName j) const { return joints[static_cast<int>(j)]; }
    Vec3& at(JointName j) { return joints[static_cast<int>(j)]; }

    bool operator==(const JointFrame& o) const = default;
};

// Binary overall quality plus optional named binary components.
// Invariant: when components are present, overall equals their logical AND.
struct QualityLabel {
    int overall = 1;
    std::map<std::string, int> components;

    bool operator==(const QualityLabel& o) const = default;
};

struct MotionRepetition {
    std::string subject_id;
    Exercise exercise = Exercise::E1_Cup;
    Side side = Side::Affected;
    int rep_index = 0;  // occurrence order within (subject, exercise, side)
    std::vector<JointFrame> frames;
    std::optional<QualityLabel> label;

    double duration() const {
        return frames.empty() ? 0.0 : frames.back().t - frames.front().t;
    }

    bool operator==(const MotionRepetition& o) const = default;
};

struct SubjectMeta {
    std::string subject_id;
    Cohort cohort = Cohort::Patient;
    std::optional<int> fugl_meyer;  // patients only, 0-66

    bool operator==(const SubjectMeta& o) const = default;
};

struct Dataset {
    std::vector<SubjectMeta> subjects;
    std::vector<MotionRepetition> repetitions;

    const SubjectMeta* find_subject(const std::string& id) const;

    bool operator==(const Dataset& o) const = default;
};

// Returns the list of violated repetition invariants, empty when valid.
std::vector<std::string> validate_repetition(const MotionRepetition& rep);

// Dataset-level invariants (subject references, duplicate keys, side/cohort
// consistency). Returns violations, empty when valid.
std::vector<std::string> validate_dataset(const Dataset& ds);

// JSON Lines ingestion. Throws IoError / SchemaError. Enforces every
// repetition and dataset invariant before returning.
Dataset parse_dataset(const std::string& path);
Dataset parse_dataset_stream(std::istream& in);

// JSON Lines emission, deterministic byte-for-byte for a given Dataset.
std::string serialize_dataset(const Dataset& ds);
void write_dataset(const Dataset& ds, const std::string& path);

// Partition by held-out subject. Throws UnknownSubject.
std::pair<Dataset, Dataset> split_by_subject(const Dataset& ds,
                                             const std::string& held_out);

}  // namespace rehab
