#pragma once

#include <cstddef>

namespace hypersal::reference {

// Results reported for this architecture on the original soybean charcoal-rot
// dataset. That dataset is not publicly distributed, so these numbers cannot
// be reproduced here; they are documentation targets only, never test gates.
// The synthetic-data acceptance suite provides the verifiable substitutes.

inline constexpr double kTestAccuracyPercent = 95.73;
inline constexpr double kInfectedPrecision = 0.92;
inline constexpr double kInfectedRecall = 0.82;
inline constexpr double kInfectedF1 = 0.87;

// Original dataset composition: 111 stem cubes of 500x1600x240, split into
// 64x64x240 patches.
inline constexpr std::size_t kTrainImages = 1090;
inline constexpr std::size_t kTrainHealthy = 940;
inline constexpr std::size_t kTrainInfected = 150;
inline constexpr std::size_t kValImages = 194;
inline constexpr std::size_t kTestImages = 539;

// Loss weighting used against that class imbalance (healthy:infected).
inline constexpr double kLossRatioInfected = 6.26;

// The most classification-sensitive wavelength observed there: band 130 of
// 240, about 733 nm, in the near-infrared region.
inline constexpr std::size_t kMostSensitiveBand = 130;
inline constexpr double kMostSensitiveWavelengthNm = 733.0;

}  // namespace hypersal::reference
