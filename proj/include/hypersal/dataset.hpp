#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "hypersal/cube.hpp"
#include "hypersal/errors.hpp"
#include "hypersal/tensor.hpp"
#include "hypersal/types.hpp"

namespace hypersal {

/// One model input: a normalized sub-volume with its class label and enough
/// provenance to map results back onto the source cube.
struct LabeledPatch {
    Tensor patch;  // [1, patch_h, patch_w, bands], values in [0,1]
    ClassLabel label = ClassLabel::healthy;
    std::string source_id;
    PatchOrigin origin;
};

struct DatasetSplit {
    std::vector<LabeledPatch> train;
    std::vector<LabeledPatch> val;
    std::vector<LabeledPatch> test;
};

/// Splits patches into train/val/test by source cube, never by patch, so
/// neighboring patches of one cube cannot leak across splits. The cube order
/// is a deterministic shuffle under `seed`.
inline DatasetSplit split_dataset(const std::vector<LabeledPatch>& patches,
                                  const std::array<double, 3>& fractions, std::uint64_t seed) {
    const double total = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(total - 1.0) > 1e-9) {
        throw ValueError("split_dataset: fractions sum to " + std::to_string(total) +
                         ", expected 1");
    }

    std::vector<std::string> cube_ids;
    std::unordered_map<std::string, std::size_t> seen;
    for (const LabeledPatch& p : patches) {
        if (seen.emplace(p.source_id, cube_ids.size()).second) cube_ids.push_back(p.source_id);
    }
    if (cube_ids.empty()) throw ValueError("split_dataset: no patches");

    std::mt19937_64 rng(seed);
    std::shuffle(cube_ids.begin(), cube_ids.end(), rng);

    const std::size_t n = cube_ids.size();
    const std::size_t n_train = static_cast<std::size_t>(fractions[0] * static_cast<double>(n));
    const std::size_t n_val = static_cast<std::size_t>(fractions[1] * static_cast<double>(n));
    const std::size_t n_test = n - n_train - n_val;
    if (n_train == 0 || n_val == 0 || n_test == 0) {
        throw ValueError("split_dataset: a split would be empty with " + std::to_string(n) +
                         " cubes and fractions " + std::to_string(fractions[0]) + "/" +
                         std::to_string(fractions[1]) + "/" + std::to_string(fractions[2]));
    }

    enum { kTrain, kVal, kTest };
    std::unordered_map<std::string, int> assignment;
    for (std::size_t i = 0; i < n; ++i) {
        assignment[cube_ids[i]] = i < n_train ? kTrain : (i < n_train + n_val ? kVal : kTest);
    }

    DatasetSplit split;
    for (const LabeledPatch& p : patches) {
        switch (assignment.at(p.source_id)) {
            case kTrain: split.train.push_back(p); break;
            case kVal: split.val.push_back(p); break;
            default: split.test.push_back(p); break;
        }
    }
    return split;
}

/// Loss weights that rebalance an uneven class distribution:
/// [1, n_healthy / n_infected].
inline std::array<Real, 2> class_weights_from_counts(std::size_t n_healthy,
                                                     std::size_t n_infected) {
    if (n_healthy == 0 || n_infected == 0) {
        throw ValueError("class_weights_from_counts: both class counts must be >= 1");
    }
    return {Real{1}, static_cast<Real>(n_healthy) / static_cast<Real>(n_infected)};
}

}  // namespace hypersal
