#pragma once

// Shared test utilities: independent oracles (finite differences, brute-force
// convolution, PGM parsing), random tensor generation, temp dirs, and a CLI
// runner. Oracles here must stay independent of the library code paths they
// check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hypersal/autodiff.hpp"
#include "hypersal/tensor.hpp"
#include "hypersal/types.hpp"

namespace testutil {

namespace fs = std::filesystem;
using hypersal::Real;
using hypersal::Shape;
using hypersal::Tape;
using hypersal::Tensor;

inline std::vector<Real> random_values(std::size_t n, std::mt19937_64& rng, Real lo = -1.0,
                                       Real hi = 1.0) {
    std::uniform_real_distribution<Real> dist(lo, hi);
    std::vector<Real> out(n);
    for (Real& v : out) v = dist(rng);
    return out;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, Real lo = -1.0, Real hi = 1.0) {
    return Tensor(shape, random_values(hypersal::shape_numel(shape), rng, lo, hi));
}

// ---------------------------------------------------------------------------
// Central finite differences
// ---------------------------------------------------------------------------

using FlatInputs = std::vector<std::pair<Shape, std::vector<Real>>>;

/// Max relative error between reverse-mode gradients and central finite
/// differences, over every element of every input. `build` must be a
/// deterministic function of its inputs.
template <typename BuildFn>
double max_grad_rel_error(BuildFn build, FlatInputs inputs, double step = 1e-5) {
    Tape tape;
    std::vector<Tensor> tensors;
    tensors.reserve(inputs.size());
    for (const auto& [shape, values] : inputs) tensors.emplace_back(shape, values, true);
    const Tensor loss = build(tape, tensors);
    tape.backward(loss);

    const auto eval = [&build](const FlatInputs& probe) {
        Tape fresh;
        std::vector<Tensor> ts;
        ts.reserve(probe.size());
        for (const auto& [shape, values] : probe) ts.emplace_back(shape, values, false);
        return build(fresh, ts).item();
    };

    double max_rel = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto grad = tensors[k].grad();
        for (std::size_t i = 0; i < inputs[k].second.size(); ++i) {
            FlatInputs probe = inputs;
            probe[k].second[i] += step;
            const double up = eval(probe);
            probe[k].second[i] -= 2 * step;
            const double down = eval(probe);
            const double fd = (up - down) / (2 * step);
            const double rel = std::abs(grad[i] - fd) / (std::abs(fd) + 1e-8);
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

// ---------------------------------------------------------------------------
// Brute-force valid 3D convolution (six nested loops, no shared code)
// ---------------------------------------------------------------------------

inline std::vector<Real> conv3d_oracle(const std::vector<Real>& input, std::size_t c_in,
                                       std::size_t h, std::size_t w, std::size_t b,
                                       const std::vector<Real>& weights, std::size_t c_out,
                                       std::size_t kh, std::size_t kw, std::size_t kb,
                                       const std::vector<Real>& bias) {
    const std::size_t oh = h - kh + 1, ow = w - kw + 1, ob = b - kb + 1;
    std::vector<Real> out(c_out * oh * ow * ob, 0.0);
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                for (std::size_t bb = 0; bb < ob; ++bb) {
                    Real acc = bias[oc];
                    for (std::size_t ic = 0; ic < c_in; ++ic) {
                        for (std::size_t dy = 0; dy < kh; ++dy) {
                            for (std::size_t dx = 0; dx < kw; ++dx) {
                                for (std::size_t db = 0; db < kb; ++db) {
                                    const Real iv =
                                        input[((ic * h + y + dy) * w + x + dx) * b + bb + db];
                                    const Real wv =
                                        weights[(((oc * c_in + ic) * kh + dy) * kw + dx) * kb +
                                                db];
                                    acc += iv * wv;
                                }
                            }
                        }
                    }
                    out[((oc * oh + y) * ow + x) * ob + bb] = acc;
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Minimal independent PGM (P5) parser
// ---------------------------------------------------------------------------

struct ParsedPgm {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t maxval = 0;
    std::vector<std::uint8_t> pixels;
};

inline ParsedPgm parse_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("parse_pgm: cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("parse_pgm: magic '" + magic + "' is not P5");
    ParsedPgm pgm;
    in >> pgm.width >> pgm.height >> pgm.maxval;
    in.get();  // single whitespace after maxval
    pgm.pixels.resize(pgm.width * pgm.height);
    in.read(reinterpret_cast<char*>(pgm.pixels.data()),
            static_cast<std::streamsize>(pgm.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(pgm.pixels.size())) {
        throw std::runtime_error("parse_pgm: short pixel data in " + path.string());
    }
    return pgm;
}

// ---------------------------------------------------------------------------
// Filesystem + process helpers
// ---------------------------------------------------------------------------

struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& label) {
        std::string tmpl = (fs::temp_directory_path() / ("hypersal_" + label + "_XXXXXX")).string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed for " + tmpl);
        path = buf.data();
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_text: cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_bytes: cannot open " + path.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

inline std::size_t count_lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs the hypersal binary named by $HYPERSAL_BIN with the given arguments.
inline CliResult run_cli(const std::string& args, const fs::path& scratch) {
    const char* bin = std::getenv("HYPERSAL_BIN");
    if (!bin) throw std::runtime_error("HYPERSAL_BIN is not set");
    const fs::path out_file = scratch / "cli_stdout.txt";
    const fs::path err_file = scratch / "cli_stderr.txt";
    const std::string command = std::string(bin) + " " + args + " >" + out_file.string() + " 2>" +
                                err_file.string();
    const int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_text(out_file);
    result.err = read_text(err_file);
    return result;
}

}  // namespace testutil
