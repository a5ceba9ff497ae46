#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "hypersal/errors.hpp"
#include "hypersal/types.hpp"

namespace hypersal {

/// Shortest round-trip decimal form of a double. Output files use this
/// everywhere so identical runs produce byte-identical text.
inline std::string format_real(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    if (res.ec != std::errc{}) throw Error("format_real: conversion failed");
    return std::string(buf, res.ptr);
}

}  // namespace hypersal
