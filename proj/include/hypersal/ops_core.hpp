#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hypersal/autodiff.hpp"
#include "hypersal/errors.hpp"
#include "hypersal/tensor.hpp"

namespace hypersal {

namespace detail {

inline void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

}  // namespace detail

/// Elementwise sum of two tensors of identical shape.
inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    detail::expect_same_shape(a, b, "add");
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    Tensor result(a.shape(), std::move(out), detail::any_requires_grad({&a, &b}));
    return detail::record_if_needed(tape, result, [a, b, result](GradientStore& store) {
        auto g = store.adjoint(result);
        if (a.requires_grad()) {
            auto ga = store.accumulate(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
            auto gb = store.accumulate(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    });
}

/// Elementwise product of two tensors of identical shape.
inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    detail::expect_same_shape(a, b, "mul");
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    Tensor result(a.shape(), std::move(out), detail::any_requires_grad({&a, &b}));
    return detail::record_if_needed(tape, result, [a, b, result](GradientStore& store) {
        auto g = store.adjoint(result);
        if (a.requires_grad()) {
            auto ga = store.accumulate(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
        }
        if (b.requires_grad()) {
            auto gb = store.accumulate(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
        }
    });
}

/// Sum of all elements, as a single-element tensor.
inline Tensor sum(Tape& tape, const Tensor& t) {
    Real total = 0;
    for (std::size_t i = 0; i < t.size(); ++i) total += t[i];
    Tensor result(Shape{1}, {total}, t.requires_grad());
    return detail::record_if_needed(tape, result, [t, result](GradientStore& store) {
        const Real g = store.adjoint(result)[0];
        if (!t.requires_grad()) return;
        auto gt = store.accumulate(t);
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g;
    });
}

/// Dot product with a fixed coefficient vector, as a single-element tensor.
inline Tensor weighted_sum(Tape& tape, const Tensor& t, std::vector<Real> coeffs) {
    if (coeffs.size() != t.size()) {
        throw ShapeError("weighted_sum: " + std::to_string(coeffs.size()) +
                         " coefficients for " + std::to_string(t.size()) + " elements");
    }
    Real total = 0;
    for (std::size_t i = 0; i < t.size(); ++i) total += t[i] * coeffs[i];
    Tensor result(Shape{1}, {total}, t.requires_grad());
    return detail::record_if_needed(
        tape, result, [t, result, coeffs = std::move(coeffs)](GradientStore& store) {
            const Real g = store.adjoint(result)[0];
            if (!t.requires_grad()) return;
            auto gt = store.accumulate(t);
            for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g * coeffs[i];
        });
}

/// Picks one element by flat index, as a single-element tensor.
inline Tensor select(Tape& tape, const Tensor& t, std::size_t flat_index) {
    if (flat_index >= t.size()) {
        throw ShapeError("select: index " + std::to_string(flat_index) + " out of range for " +
                         std::to_string(t.size()) + " elements");
    }
    Tensor result(Shape{1}, {t[flat_index]}, t.requires_grad());
    return detail::record_if_needed(tape, result, [t, result, flat_index](GradientStore& store) {
        if (!t.requires_grad()) return;
        store.accumulate(t)[flat_index] += store.adjoint(result)[0];
    });
}

/// Same elements under a new shape of equal element count.
inline Tensor reshape(Tape& tape, const Tensor& t, Shape new_shape) {
    if (shape_numel(new_shape) != t.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(t.shape()) + " as " +
                         shape_str(new_shape));
    }
    Tensor result(std::move(new_shape), {t.values().begin(), t.values().end()},
                  t.requires_grad());
    return detail::record_if_needed(tape, result, [t, result](GradientStore& store) {
        if (!t.requires_grad()) return;
        auto g = store.adjoint(result);
        auto gt = store.accumulate(t);
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
    });
}

/// Stacks k same-length vectors into a [rows, k] matrix.
inline Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    const std::size_t width = rows.front().size();
    bool needs_grad = false;
    for (const Tensor& row : rows) {
        if (row.size() != width) {
            throw ShapeError("stack_rows: row length mismatch");
        }
        needs_grad = needs_grad || row.requires_grad();
    }
    std::vector<Real> out;
    out.reserve(rows.size() * width);
    for (const Tensor& row : rows) {
        out.insert(out.end(), row.values().begin(), row.values().end());
    }
    Tensor result(Shape{rows.size(), width}, std::move(out), needs_grad);
    return detail::record_if_needed(tape, result, [rows, result, width](GradientStore& store) {
        auto g = store.adjoint(result);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (!rows[r].requires_grad()) continue;
            auto gr = store.accumulate(rows[r]);
            for (std::size_t i = 0; i < width; ++i) gr[i] += g[r * width + i];
        }
    });
}

}  // namespace hypersal
