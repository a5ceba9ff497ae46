#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hypersal/errors.hpp"

namespace hypersal {

/// Scalar type used throughout the library. All reductions accumulate at
/// 64-bit precision; file formats that store 32-bit values convert on I/O.
using Real = double;

/// Tensor extents, outermost axis first. Image tensors are laid out
/// [channels, height, width, bands] with the band axis innermost.
using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t extent : shape) n *= extent;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Binary class of a sample. Infected is the positive class everywhere.
enum class ClassLabel : int { healthy = 0, infected = 1 };

inline std::string to_string(ClassLabel label) {
    return label == ClassLabel::healthy ? "healthy" : "infected";
}

inline ClassLabel parse_class_label(const std::string& s) {
    if (s == "healthy") return ClassLabel::healthy;
    if (s == "infected") return ClassLabel::infected;
    throw ValueError("unknown class label '" + s + "'");
}

}  // namespace hypersal
