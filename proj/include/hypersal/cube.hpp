#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hypersal/io_util.hpp"
#include "hypersal/tensor.hpp"
#include "hypersal/types.hpp"

namespace hypersal {

/// Reflectance volume of height x width x bands, stored band-interleaved by
/// pixel: index = (y*width + x)*bands + b. Calibration maps band 1 to
/// lambda_min_nm and the last band to lambda_max_nm linearly.
struct HyperCube {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t bands = 0;
    std::vector<float> data;
    double lambda_min_nm = 383.0;
    double lambda_max_nm = 1032.0;

    std::size_t index(std::size_t y, std::size_t x, std::size_t b) const {
        return (y * width + x) * bands + b;
    }
    float at(std::size_t y, std::size_t x, std::size_t b) const { return data[index(y, x, b)]; }
    float& at(std::size_t y, std::size_t x, std::size_t b) { return data[index(y, x, b)]; }
};

// Cube file format, all integers little-endian:
//   bytes 0..3  magic "HSC1"
//   u32 x 3     height, width, bands
//   f64 x 2     lambda_min_nm, lambda_max_nm
//   data        height*width*bands 32-bit little-endian floats

inline void write_cube(const HyperCube& cube, const std::filesystem::path& path) {
    for (float v : cube.data) {
        if (!std::isfinite(v)) {
            throw NonFiniteError("write_cube: cube contains non-finite values");
        }
    }
    std::vector<std::uint8_t> bytes;
    bytes.reserve(24 + cube.data.size() * 4);
    bytes.insert(bytes.end(), {'H', 'S', 'C', '1'});
    io::put_u32(bytes, static_cast<std::uint32_t>(cube.height));
    io::put_u32(bytes, static_cast<std::uint32_t>(cube.width));
    io::put_u32(bytes, static_cast<std::uint32_t>(cube.bands));
    io::put_f64(bytes, cube.lambda_min_nm);
    io::put_f64(bytes, cube.lambda_max_nm);
    for (float v : cube.data) io::put_f32(bytes, v);
    io::write_file(path, bytes);
}

inline HyperCube read_cube(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    io::ByteReader reader(bytes, "cube " + path.filename().string());

    const std::uint8_t* magic = reader.take(4);
    if (!(magic[0] == 'H' && magic[1] == 'S' && magic[2] == 'C' && magic[3] == '1')) {
        throw BadMagicError("cube " + path.filename().string() + ": bad magic, expected HSC1");
    }

    HyperCube cube;
    cube.height = reader.u32();
    cube.width = reader.u32();
    cube.bands = reader.u32();
    cube.lambda_min_nm = reader.f64();
    cube.lambda_max_nm = reader.f64();

    const std::size_t n = cube.height * cube.width * cube.bands;
    cube.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        cube.data[i] = reader.f32();
        if (!std::isfinite(cube.data[i])) {
            throw NonFiniteError("cube " + path.filename().string() +
                                 ": non-finite value at element " + std::to_string(i));
        }
    }
    reader.expect_end();
    return cube;
}

/// Per-cube min-max scaling onto [0,1]. A constant cube has no usable range.
inline HyperCube normalize(const HyperCube& cube) {
    if (cube.data.empty()) throw ValueError("normalize: empty cube");
    float lo = cube.data[0], hi = cube.data[0];
    for (float v : cube.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) throw ValueError("normalize: constant cube has no range");

    HyperCube out = cube;
    const float range = hi - lo;
    for (float& v : out.data) v = (v - lo) / range;
    return out;
}

struct PatchOrigin {
    std::size_t y = 0;
    std::size_t x = 0;
};

struct CubePatch {
    Tensor patch;  // [1, patch_h, patch_w, bands]
    PatchOrigin origin;
};

/// Tiles the cube into patch_h x patch_w sub-volumes at the given strides,
/// keeping the full spectral depth. Partial border tiles are discarded.
inline std::vector<CubePatch> extract_patches(const HyperCube& cube, std::size_t patch_h,
                                              std::size_t patch_w, std::size_t stride_y,
                                              std::size_t stride_x) {
    if (patch_h == 0 || patch_w == 0 || stride_y == 0 || stride_x == 0) {
        throw ValueError("extract_patches: patch and stride extents must be positive");
    }
    if (cube.height < patch_h || cube.width < patch_w) {
        throw ShapeError("extract_patches: cube " + shape_str({cube.height, cube.width}) +
                         " is smaller than one " + shape_str({patch_h, patch_w}) + " patch");
    }

    std::vector<CubePatch> patches;
    for (std::size_t y = 0; y + patch_h <= cube.height; y += stride_y) {
        for (std::size_t x = 0; x + patch_w <= cube.width; x += stride_x) {
            std::vector<Real> values;
            values.reserve(patch_h * patch_w * cube.bands);
            for (std::size_t py = 0; py < patch_h; ++py) {
                for (std::size_t px = 0; px < patch_w; ++px) {
                    const float* row = cube.data.data() + cube.index(y + py, x + px, 0);
                    for (std::size_t b = 0; b < cube.bands; ++b) {
                        values.push_back(static_cast<Real>(row[b]));
                    }
                }
            }
            patches.push_back({Tensor(Shape{1, patch_h, patch_w, cube.bands}, std::move(values)),
                               PatchOrigin{y, x}});
        }
    }
    return patches;
}

}  // namespace hypersal
