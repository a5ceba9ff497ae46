#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hypersal/cube.hpp"
#include "hypersal/errors.hpp"
#include "hypersal/types.hpp"

namespace hypersal {

/// Recipe for a synthetic dataset with a known discriminative band, the
/// ground truth for end-to-end attribution checks.
struct SynthSpec {
    std::size_t num_cubes = 48;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t bands = 64;
    std::size_t planted_band = 0;   // 1-based; 0 picks the default for `bands`
    double lesion_fraction = 0.8;   // share of the area carrying the signal
    double signal_amplitude = 0.3;  // bump height at the planted band
    double noise_stddev = 0.02;
    double class_balance = 0.5;  // fraction of cubes labeled infected
    std::uint64_t seed = 0;
};

/// Band index whose wavelength matches the 733 nm landmark under the default
/// 383-1032 nm calibration, scaled to `bands` channels.
inline std::size_t default_planted_band(std::size_t bands) {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(bands) * 130.0 / 240.0));
}

struct LesionMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> mask;  // 255 = lesion, 0 = background

    bool lesion_at(std::size_t y, std::size_t x) const { return mask[y * width + x] != 0; }
};

struct SynthCube {
    std::string id;
    HyperCube cube;
    ClassLabel label = ClassLabel::healthy;
    LesionMask mask;  // empty rectangle for healthy cubes
};

namespace detail {

// Smooth baseline reflectance, identical for both classes: a broad spectral
// sweep in [0.15, 0.85] plus a mild spatial modulation. The planted band sits
// on the rising flank (~0.41) so the bump never exceeds the baseline peak and
// per-cube min-max normalization scales both classes identically.
inline double synth_baseline(std::size_t y, std::size_t x, std::size_t b, std::size_t height,
                             std::size_t width, std::size_t bands) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double u = bands > 1 ? static_cast<double>(b) / static_cast<double>(bands - 1) : 0.0;
    const double spectral = 0.5 + 0.35 * std::sin(two_pi * u);
    const double spatial = 0.03 *
                           std::sin(two_pi * static_cast<double>(y) / static_cast<double>(height) +
                                    1.0) *
                           std::sin(two_pi * static_cast<double>(x) / static_cast<double>(width) +
                                    2.0);
    return spectral + spatial;
}

// Gaussian spectral bump centered on the planted band, half-width ~4 bands.
inline double synth_bump(std::size_t b, std::size_t planted_band_zero_based) {
    constexpr double sigma = 3.4;
    const double d = static_cast<double>(b) - static_cast<double>(planted_band_zero_based);
    return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 step, so per-cube streams are independent of generation order
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Generates labeled cubes: every cube shares the same smooth baseline plus
/// Gaussian noise; infected cubes additionally carry the spectral bump inside
/// one contiguous rectangular lesion. Returns the lesion masks as ground
/// truth. Deterministic under spec.seed.
inline std::vector<SynthCube> generate_synthetic(const SynthSpec& spec) {
    if (spec.num_cubes == 0) throw ValueError("synth: num_cubes must be >= 1");
    if (spec.height == 0 || spec.width == 0 || spec.bands == 0) {
        throw ValueError("synth: cube extents must be positive");
    }
    const std::size_t planted =
        spec.planted_band == 0 ? default_planted_band(spec.bands) : spec.planted_band;
    if (planted < 1 || planted > spec.bands) {
        throw ValueError("synth: planted_band " + std::to_string(planted) +
                         " outside [1," + std::to_string(spec.bands) + "]");
    }
    if (spec.lesion_fraction <= 0.0 || spec.lesion_fraction > 1.0) {
        throw ValueError("synth: lesion_fraction must be in (0,1]");
    }
    if (spec.class_balance < 0.0 || spec.class_balance > 1.0) {
        throw ValueError("synth: class_balance must be in [0,1]");
    }
    if (spec.noise_stddev < 0.0) throw ValueError("synth: noise_stddev must be >= 0");
    if (spec.signal_amplitude < 0.0) throw ValueError("synth: signal_amplitude must be >= 0");

    // Feasibility: the bump must not be clipped by the [0,1] clamp, or the
    // planted signal (and the mean-shift contract) would be destroyed.
    double base_max_at_planted = 0.0;
    for (std::size_t y = 0; y < spec.height; ++y) {
        for (std::size_t x = 0; x < spec.width; ++x) {
            base_max_at_planted =
                std::max(base_max_at_planted, detail::synth_baseline(y, x, planted - 1,
                                                                     spec.height, spec.width,
                                                                     spec.bands));
        }
    }
    if (base_max_at_planted + spec.signal_amplitude + 4.0 * spec.noise_stddev > 1.0) {
        throw ValueError("synth: signal_amplitude " + std::to_string(spec.signal_amplitude) +
                         " pushes values past 1.0 at the planted band");
    }

    // Lesion rectangle dimensions for the requested area fraction.
    const double target_area =
        spec.lesion_fraction * static_cast<double>(spec.height * spec.width);
    std::size_t lesion_h = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(spec.height) *
                                              std::sqrt(spec.lesion_fraction))),
        1, spec.height);
    std::size_t lesion_w = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(target_area / static_cast<double>(lesion_h))), 1,
        spec.width);

    // Label assignment: a seeded shuffle of cube indices, first share infected.
    const std::size_t n_infected = static_cast<std::size_t>(
        std::llround(spec.class_balance * static_cast<double>(spec.num_cubes)));
    std::vector<std::size_t> order(spec.num_cubes);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 label_rng(detail::mix_seed(spec.seed, 0));
    std::shuffle(order.begin(), order.end(), label_rng);
    std::vector<bool> infected(spec.num_cubes, false);
    for (std::size_t i = 0; i < n_infected; ++i) infected[order[i]] = true;

    std::vector<SynthCube> cubes;
    cubes.reserve(spec.num_cubes);
    for (std::size_t c = 0; c < spec.num_cubes; ++c) {
        std::mt19937_64 rng(detail::mix_seed(spec.seed, c + 1));
        std::normal_distribution<double> noise(0.0, spec.noise_stddev);

        SynthCube out;
        char id[16];
        std::snprintf(id, sizeof id, "cube_%03zu", c);
        out.id = id;
        out.label = infected[c] ? ClassLabel::infected : ClassLabel::healthy;
        out.mask.height = spec.height;
        out.mask.width = spec.width;
        out.mask.mask.assign(spec.height * spec.width, 0);

        std::size_t y0 = 0, x0 = 0;
        if (infected[c]) {
            std::uniform_int_distribution<std::size_t> oy(0, spec.height - lesion_h);
            std::uniform_int_distribution<std::size_t> ox(0, spec.width - lesion_w);
            y0 = oy(rng);
            x0 = ox(rng);
            for (std::size_t y = y0; y < y0 + lesion_h; ++y) {
                for (std::size_t x = x0; x < x0 + lesion_w; ++x) {
                    out.mask.mask[y * spec.width + x] = 255;
                }
            }
        }

        HyperCube& cube = out.cube;
        cube.height = spec.height;
        cube.width = spec.width;
        cube.bands = spec.bands;
        cube.data.resize(spec.height * spec.width * spec.bands);
        for (std::size_t y = 0; y < spec.height; ++y) {
            for (std::size_t x = 0; x < spec.width; ++x) {
                const bool in_lesion = infected[c] && out.mask.lesion_at(y, x);
                for (std::size_t b = 0; b < spec.bands; ++b) {
                    double v = detail::synth_baseline(y, x, b, spec.height, spec.width,
                                                      spec.bands) +
                               noise(rng);
                    if (in_lesion) {
                        v += spec.signal_amplitude * detail::synth_bump(b, planted - 1);
                    }
                    cube.at(y, x, b) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
        }
        cubes.push_back(std::move(out));
    }
    return cubes;
}

}  // namespace hypersal
