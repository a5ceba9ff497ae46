#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hypersal/csv.hpp"
#include "hypersal/io_util.hpp"
#include "hypersal/model.hpp"
#include "hypersal/ops_core.hpp"
#include "hypersal/types.hpp"

namespace hypersal {

/// Gradient of the predicted class score with respect to one input patch.
/// The differentiated score is the pre-softmax logit of the argmax class;
/// softmax saturation would otherwise flatten the gradient.
struct SaliencyResult {
    Tensor grad;       // [1,H,W,B], signed gradient
    Tensor magnitude;  // [H,W,B], elementwise |grad|
    ClassLabel predicted_class = ClassLabel::healthy;
    double class_score = 0;
};

inline SaliencyResult saliency_map(const ModelParams& params, const Tensor& patch) {
    // Parameters stay read-only: gradients flow to the input alone, which
    // also keeps concurrent calls over shared params race-free.
    const ModelParams frozen = params.detached_copy();
    Tensor input = patch.detached();
    input.set_requires_grad(true);

    Tape tape;
    std::mt19937_64 unused_rng(0);
    const ForwardResult out = forward(tape, frozen, input, ForwardMode::eval, unused_rng);
    const ClassLabel predicted = predicted_class(out.probs);
    const std::size_t class_index = static_cast<std::size_t>(predicted);
    const Tensor score = select(tape, out.logits, class_index);
    tape.backward(score);

    SaliencyResult result;
    result.predicted_class = predicted;
    result.class_score = score.item();
    auto grad = input.grad();
    result.grad = Tensor(input.shape(), {grad.begin(), grad.end()});

    const Shape& s = input.shape();
    std::vector<Real> magnitude(grad.size());
    for (std::size_t i = 0; i < magnitude.size(); ++i) magnitude[i] = std::abs(grad[i]);
    result.magnitude = Tensor(Shape{s[1], s[2], s[3]}, std::move(magnitude));
    return result;
}

/// Per-pixel most sensitive band: argmax of |gradient| over the band axis,
/// 1-based, ties resolved to the lowest band index.
struct BandSensitivityMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t bands = 0;
    std::vector<std::size_t> cstar;  // H*W entries in [1, bands]

    std::size_t at(std::size_t y, std::size_t x) const { return cstar[y * width + x]; }
};

inline BandSensitivityMap cstar_map(const SaliencyResult& result) {
    const Shape& s = result.magnitude.shape();
    BandSensitivityMap map;
    map.height = s[0];
    map.width = s[1];
    map.bands = s[2];
    map.cstar.resize(map.height * map.width);
    auto mag = result.magnitude.values();
    for (std::size_t pixel = 0; pixel < map.cstar.size(); ++pixel) {
        const Real* row = mag.data() + pixel * map.bands;
        std::size_t best = 0;
        for (std::size_t b = 1; b < map.bands; ++b) {
            if (row[b] > row[best]) best = b;
        }
        map.cstar[pixel] = best + 1;
    }
    return map;
}

/// Share of pixels whose most sensitive band is b, over all maps jointly and
/// split by the images' predicted class (each class column normalized within
/// that class; all zeros when the class never occurs).
struct WavelengthHistogram {
    std::size_t bands = 0;
    double lambda_min_nm = 383.0;
    double lambda_max_nm = 1032.0;
    std::vector<double> fraction;
    std::vector<double> fraction_predicted_healthy;
    std::vector<double> fraction_predicted_infected;

    /// Band (1-based) with the largest overall fraction.
    std::size_t mode_band() const {
        std::size_t best = 0;
        for (std::size_t b = 1; b < fraction.size(); ++b) {
            if (fraction[b] > fraction[best]) best = b;
        }
        return best + 1;
    }
};

/// Linear band-to-wavelength calibration over [lambda_min, lambda_max].
inline double wavelength_of(std::size_t band, double lambda_min_nm, double lambda_max_nm,
                            std::size_t bands) {
    if (band < 1 || band > bands) {
        throw ValueError("wavelength_of: band " + std::to_string(band) + " outside [1," +
                         std::to_string(bands) + "]");
    }
    if (bands == 1) return lambda_min_nm;
    return lambda_min_nm + static_cast<double>(band - 1) * (lambda_max_nm - lambda_min_nm) /
                               static_cast<double>(bands - 1);
}

inline WavelengthHistogram wavelength_histogram(std::span<const BandSensitivityMap> maps,
                                                std::span<const ClassLabel> predicted_classes,
                                                double lambda_min_nm = 383.0,
                                                double lambda_max_nm = 1032.0) {
    if (maps.empty()) throw ValueError("wavelength_histogram: no sensitivity maps");
    if (!predicted_classes.empty() && predicted_classes.size() != maps.size()) {
        throw ValueError("wavelength_histogram: one predicted class per map required");
    }
    const std::size_t bands = maps.front().bands;
    std::vector<std::size_t> counts(bands, 0);
    std::vector<std::size_t> counts_healthy(bands, 0);
    std::vector<std::size_t> counts_infected(bands, 0);

    std::size_t total = 0, total_healthy = 0, total_infected = 0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (maps[i].bands != bands) {
            throw ShapeError("wavelength_histogram: inconsistent band counts");
        }
        const bool infected =
            !predicted_classes.empty() && predicted_classes[i] == ClassLabel::infected;
        for (std::size_t cstar : maps[i].cstar) {
            counts[cstar - 1] += 1;
            ++total;
            if (predicted_classes.empty()) continue;
            if (infected) {
                counts_infected[cstar - 1] += 1;
                ++total_infected;
            } else {
                counts_healthy[cstar - 1] += 1;
                ++total_healthy;
            }
        }
    }

    WavelengthHistogram hist;
    hist.bands = bands;
    hist.lambda_min_nm = lambda_min_nm;
    hist.lambda_max_nm = lambda_max_nm;
    hist.fraction.resize(bands);
    hist.fraction_predicted_healthy.assign(bands, 0.0);
    hist.fraction_predicted_infected.assign(bands, 0.0);
    for (std::size_t b = 0; b < bands; ++b) {
        hist.fraction[b] = static_cast<double>(counts[b]) / static_cast<double>(total);
        if (total_healthy) {
            hist.fraction_predicted_healthy[b] =
                static_cast<double>(counts_healthy[b]) / static_cast<double>(total_healthy);
        }
        if (total_infected) {
            hist.fraction_predicted_infected[b] =
                static_cast<double>(counts_infected[b]) / static_cast<double>(total_infected);
        }
    }
    return hist;
}

inline void write_histogram_csv(const WavelengthHistogram& hist,
                                const std::filesystem::path& path) {
    std::string text = "band,wavelength_nm,fraction,fraction_predicted_healthy,"
                       "fraction_predicted_infected\n";
    for (std::size_t b = 1; b <= hist.bands; ++b) {
        text += std::to_string(b) + "," +
                format_real(wavelength_of(b, hist.lambda_min_nm, hist.lambda_max_nm, hist.bands)) +
                "," + format_real(hist.fraction[b - 1]) + "," +
                format_real(hist.fraction_predicted_healthy[b - 1]) + "," +
                format_real(hist.fraction_predicted_infected[b - 1]) + "\n";
    }
    io::write_text_file(path, text);
}

/// The |gradient| plane of one band (1-based) from each result, for export.
inline std::vector<std::vector<Real>> band_slice_magnitude(
    std::span<const SaliencyResult> results, std::size_t band) {
    std::vector<std::vector<Real>> planes;
    planes.reserve(results.size());
    for (const SaliencyResult& r : results) {
        const Shape& s = r.magnitude.shape();
        const std::size_t h = s[0], w = s[1], b = s[2];
        if (band < 1 || band > b) {
            throw ValueError("band_slice_magnitude: band " + std::to_string(band) +
                             " outside [1," + std::to_string(b) + "]");
        }
        std::vector<Real> plane(h * w);
        auto mag = r.magnitude.values();
        for (std::size_t pixel = 0; pixel < h * w; ++pixel) {
            plane[pixel] = mag[pixel * b + (band - 1)];
        }
        planes.push_back(std::move(plane));
    }
    return planes;
}

/// Per-pixel max of |gradient| over all bands, one plane per result.
inline std::vector<Real> composite_magnitude(const SaliencyResult& result) {
    const Shape& s = result.magnitude.shape();
    const std::size_t h = s[0], w = s[1], b = s[2];
    std::vector<Real> plane(h * w, 0);
    auto mag = result.magnitude.values();
    for (std::size_t pixel = 0; pixel < h * w; ++pixel) {
        const Real* row = mag.data() + pixel * b;
        Real best = row[0];
        for (std::size_t i = 1; i < b; ++i) best = std::max(best, row[i]);
        plane[pixel] = best;
    }
    return plane;
}

}  // namespace hypersal
