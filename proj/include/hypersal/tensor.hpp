#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hypersal/errors.hpp"
#include "hypersal/types.hpp"

namespace hypersal {

class Tape;

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<Real> data;   // flat, row-major, innermost axis fastest
    std::vector<Real> grad;   // empty until a backward pass populates it
    bool requires_grad = false;
    const Tape* tape = nullptr;  // tape that recorded the producing op
    std::ptrdiff_t node = -1;    // index of the producing node on that tape
};

}  // namespace detail

/// Dense n-dimensional array with shared storage and an optional gradient
/// buffer. Copies are shallow: they alias the same data and gradient, which
/// is what lets a tape node and the caller observe the same accumulation.
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false) {
        if (shape_numel(shape) != values.size()) {
            throw ShapeError("tensor: shape " + shape_str(shape) + " expects " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
        }
        impl_ = std::make_shared<detail::TensorImpl>();
        impl_->shape = std::move(shape);
        impl_->data = std::move(values);
        impl_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<Real> values(shape_numel(shape), Real{0});
        return Tensor(std::move(shape), std::move(values), requires_grad);
    }

    static Tensor full(Shape shape, Real value, bool requires_grad = false) {
        std::vector<Real> values(shape_numel(shape), value);
        return Tensor(std::move(shape), std::move(values), requires_grad);
    }

    static Tensor scalar(Real value, bool requires_grad = false) {
        return Tensor(Shape{1}, {value}, requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }

    const Shape& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->data.size(); }

    std::span<const Real> values() const { return impl_->data; }
    std::span<Real> values() { return impl_->data; }

    Real operator[](std::size_t i) const { return impl_->data[i]; }
    Real& operator[](std::size_t i) { return impl_->data[i]; }

    /// Value of a single-element tensor.
    Real item() const {
        if (size() != 1) {
            throw ShapeError("item: tensor has " + std::to_string(size()) + " elements");
        }
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool value) { impl_->requires_grad = value; }

    bool has_grad() const { return !impl_->grad.empty(); }

    /// Gradient buffer; throws if no backward pass has populated it yet.
    std::span<const Real> grad() const {
        if (!has_grad()) throw GraphError("grad: tensor has no gradient");
        return impl_->grad;
    }

    /// Drops the gradient buffer so the next backward pass starts fresh.
    void zero_grad() { impl_->grad.clear(); }

    /// Deep copy of the values, detached from any tape, requires_grad=false.
    Tensor detached() const {
        return Tensor(impl_->shape, impl_->data, false);
    }

    detail::TensorImpl* impl() const { return impl_.get(); }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

}  // namespace hypersal
