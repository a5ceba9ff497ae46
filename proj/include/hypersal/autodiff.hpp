#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hypersal/errors.hpp"
#include "hypersal/tensor.hpp"

namespace hypersal {

/// Scratch adjoints for one backward traversal. Adjoints are kept separate
/// from the persistent .grad buffers so that repeated backward calls each
/// add one full d(loss)/d(tensor) contribution.
class GradientStore {
public:
    bool has_adjoint(const Tensor& t) const {
        return adjoints_.find(t.impl()) != adjoints_.end();
    }

    std::span<const Real> adjoint(const Tensor& t) const {
        auto it = adjoints_.find(t.impl());
        if (it == adjoints_.end()) return {};
        return it->second;
    }

    /// Accumulation target for t, zero-initialized on first use.
    std::span<Real> accumulate(const Tensor& t) {
        auto [it, inserted] = adjoints_.try_emplace(t.impl());
        if (inserted) it->second.assign(t.size(), Real{0});
        return it->second;
    }

    /// Adds every adjoint into the .grad of its tensor, for tensors that
    /// require gradients. Tensors with requires_grad=false never accumulate.
    void flush() {
        for (auto& [impl, adjoint] : adjoints_) {
            if (!impl->requires_grad) continue;
            if (impl->grad.empty()) impl->grad.assign(impl->data.size(), Real{0});
            for (std::size_t i = 0; i < adjoint.size(); ++i) impl->grad[i] += adjoint[i];
        }
    }

private:
    std::unordered_map<detail::TensorImpl*, std::vector<Real>> adjoints_;
};

/// Dynamically recorded computation graph. Nodes are appended in execution
/// order, so recording order is a topological order and backward is a single
/// reverse sweep. One tape per logical thread; tapes share no mutable state.
class Tape {
public:
    using BackwardFn = std::function<void(GradientStore&)>;

    /// Registers the producing op of `output`. The backward rule reads the
    /// output adjoint from the store and accumulates into its inputs.
    Tensor record(Tensor output, BackwardFn backward) {
        output.impl()->tape = this;
        output.impl()->node = static_cast<std::ptrdiff_t>(nodes_.size());
        nodes_.push_back(Node{output, std::move(backward)});
        return output;
    }

    std::size_t size() const { return nodes_.size(); }

    /// Reverse-mode sweep from `loss`. Populates d(loss)/d(tensor) into the
    /// .grad of every requires_grad tensor reachable from the loss, adding to
    /// whatever the buffers already hold.
    void backward(const Tensor& loss) const {
        if (!loss.defined() || loss.size() != 1) {
            throw GraphError("backward: loss must be a single-element tensor");
        }
        if (loss.impl()->tape != this || loss.impl()->node < 0) {
            throw GraphError("backward: loss was not recorded on this tape");
        }
        GradientStore store;
        store.accumulate(loss)[0] = Real{1};
        for (std::ptrdiff_t i = loss.impl()->node; i >= 0; --i) {
            const Node& node = nodes_[static_cast<std::size_t>(i)];
            if (!store.has_adjoint(node.output)) continue;
            node.backward(store);
        }
        store.flush();
    }

private:
    struct Node {
        Tensor output;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
};

namespace detail {

/// Records the node only when the output actually needs gradients; constant
/// subgraphs stay off the tape.
inline Tensor record_if_needed(Tape& tape, Tensor output, Tape::BackwardFn backward) {
    if (output.requires_grad()) return tape.record(std::move(output), std::move(backward));
    return output;
}

inline bool any_requires_grad(std::initializer_list<const Tensor*> tensors) {
    for (const Tensor* t : tensors) {
        if (t->requires_grad()) return true;
    }
    return false;
}

}  // namespace detail

}  // namespace hypersal
