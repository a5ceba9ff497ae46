#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hypersal/errors.hpp"
#include "hypersal/io_util.hpp"
#include "hypersal/types.hpp"

namespace hypersal {

/// Writes raw 8-bit pixels as binary PGM (P5, maxval 255).
inline void write_pgm_bytes(const std::vector<std::uint8_t>& pixels, std::size_t width,
                            std::size_t height, const std::filesystem::path& path) {
    if (pixels.size() != width * height) {
        throw ShapeError("write_pgm_bytes: " + std::to_string(pixels.size()) + " pixels for " +
                         std::to_string(width) + "x" + std::to_string(height));
    }
    std::vector<std::uint8_t> bytes;
    const std::string header =
        "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    bytes.insert(bytes.end(), header.begin(), header.end());
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    io::write_file(path, bytes);
}

/// Exports a non-negative plane as PGM, scaled so the plane maximum maps to
/// 255. An all-zero plane exports all-zero pixels.
inline void export_pgm(const std::vector<Real>& plane, std::size_t width, std::size_t height,
                       const std::filesystem::path& path) {
    if (plane.size() != width * height) {
        throw ShapeError("export_pgm: " + std::to_string(plane.size()) + " values for " +
                         std::to_string(width) + "x" + std::to_string(height));
    }
    Real max_value = 0;
    for (Real v : plane) {
        if (!std::isfinite(v)) throw NonFiniteError("export_pgm: non-finite plane value");
        max_value = std::max(max_value, v);
    }
    std::vector<std::uint8_t> pixels(plane.size(), 0);
    if (max_value > 0) {
        for (std::size_t i = 0; i < plane.size(); ++i) {
            pixels[i] = static_cast<std::uint8_t>(
                std::llround(255.0 * std::clamp(plane[i] / max_value, Real{0}, Real{1})));
        }
    }
    write_pgm_bytes(pixels, width, height, path);
}

}  // namespace hypersal
