#pragma once

// Internal: seeded stratified index split shared by the trainers.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "rehab/errors.hpp"
#include "rehab/rng.hpp"

namespace rehab::detail {

struct Split {
    std::vector<std::size_t> train, val;
};

// Validation takes floor(val_fraction * n) per class, so every class keeps
// at least one training sample. Throws DegenerateLabels when a class is
// absent.
inline Split stratified_split(const std::vector<int>& y, double val_fraction,
                              std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i)
        (y[i] == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw DegenerateLabels();
    Rng rng_pos(derive_seed(seed, 101));
    Rng rng_neg(derive_seed(seed, 102));
    rng_pos.shuffle(pos);
    rng_neg.shuffle(neg);
    Split s;
    auto take = [&](std::vector<std::size_t>& cls) {
        const std::size_t n_val =
            static_cast<std::size_t>(val_fraction * cls.size());
        for (std::size_t i = 0; i < cls.size(); ++i)
            (i < n_val ? s.val : s.train).push_back(cls[i]);
    };
    take(pos);
    take(neg);
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    return s;
}

}  // namespace rehab::detail
