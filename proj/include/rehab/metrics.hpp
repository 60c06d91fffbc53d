#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rehab/errors.hpp"

namespace rehab {

// F1 of the positive class (label 1). When precision + recall is zero the
// score is defined as 0.
inline double f1_score(const std::vector<int>& predictions,
                       const std::vector<int>& truths) {
    if (predictions.size() != truths.size())
        throw LengthMismatch("f1_score: predictions and truths differ in length");
    if (predictions.empty())
        throw LengthMismatch("f1_score: empty input");
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == 1 && truths[i] == 1) ++tp;
        if (predictions[i] == 1 && truths[i] == 0) ++fp;
        if (predictions[i] == 0 && truths[i] == 1) ++fn;
    }
    const double p = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

inline double accuracy(const std::vector<int>& predictions,
                       const std::vector<int>& truths) {
    if (predictions.size() != truths.size())
        throw LengthMismatch("accuracy: predictions and truths differ in length");
    if (predictions.empty()) throw LengthMismatch("accuracy: empty input");
    long hit = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == truths[i]) ++hit;
    return static_cast<double>(hit) / predictions.size();
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / xs.size();
}

// Population standard deviation.
inline double std_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    const double m = mean_of(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / xs.size());
}

}  // namespace rehab
