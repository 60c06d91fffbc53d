#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rehab/motion_data.hpp"

namespace rehab {

// Injectable impairment axes. rom_scale shrinks the reach, jerk_noise_amp
// adds band-limited positional tremor, trunk_lean_deg adds a compensatory
// trunk/head tilt toward the moving hand.
struct ImpairmentSpec {
    double rom_scale = 1.0;       // (0, 1], 1 = full range
    double jerk_noise_amp = 0.0;  // meters, >= 0
    double trunk_lean_deg = 0.0;  // [0, 60]

    void validate() const;
};

// Oracle label thresholds. A repetition is labeled per component by comparing
// its actual impairment values against these; overall is their AND.
struct LabelThresholds {
    double min_rom_scale = 0.8;
    double max_jerk_noise_amp = 0.01;  // meters
    double max_trunk_lean_deg = 5.0;
};

struct CorpusSpec {
    int n_patients = 15;
    int n_healthy = 11;
    int reps_per_patient_side = 10;
    int reps_per_healthy = 15;
    std::vector<Exercise> exercises = {Exercise::E1_Cup, Exercise::E2_Light,
                                       Exercise::E3_Cane};
    std::uint64_t seed = 0;

    void validate() const;
};

// Quintic minimum-jerk interpolation between x0 and xf.
// Throws DomainError when tau is outside [0, 1].
double min_jerk_scalar(double x0, double xf, double tau);

// One synthetic repetition at 30 Hz with its oracle label. Deterministic in
// (arguments, seed). duration must be in [1, 10] s.
std::pair<MotionRepetition, QualityLabel> synth_repetition(
    Exercise exercise, const ImpairmentSpec& impairment, double duration,
    std::uint64_t seed, Side side = Side::Dominant,
    const std::string& subject_id = "S00");

// Full corpus: patients with impaired affected-side and clean unaffected-side
// repetitions, healthy subjects with clean dominant-side repetitions.
Dataset synth_dataset(const CorpusSpec& spec);

CorpusSpec corpus_spec_from_json_file(const std::string& path);

}  // namespace rehab
