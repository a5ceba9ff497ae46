#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "hypersal/autodiff.hpp"
#include "hypersal/errors.hpp"
#include "hypersal/tensor.hpp"
#include "hypersal/types.hpp"

namespace hypersal {

/// Convolution kernel bank. Weights are [out_channels, in_channels, kh, kw, kb]
/// with the spectral tap axis innermost; bias is [out_channels].
struct Conv3dKernel {
    Tensor weights;
    Tensor bias;
};

enum class ForwardMode { train, eval };

struct DropoutSpec {
    double rate = 0.0;
    ForwardMode mode = ForwardMode::eval;
};

/// Probabilities are clamped into [kLogEpsilon, 1-kLogEpsilon] before any log
/// so a saturated softmax cannot produce an infinite loss.
inline constexpr Real kLogEpsilon = 1e-7;

namespace detail {

inline void expect_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.shape().size() != rank) {
        throw ShapeError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                         " tensor, got " + shape_str(t.shape()));
    }
}

}  // namespace detail

/// Valid (no padding), stride-1 3D convolution over [C,H,W,B] volumes.
/// Output is [C_out, H-kh+1, W-kw+1, B-kb+1].
inline Tensor conv3d(Tape& tape, const Tensor& input, const Conv3dKernel& kernel) {
    detail::expect_rank(input, 4, "conv3d");
    detail::expect_rank(kernel.weights, 5, "conv3d");
    detail::expect_rank(kernel.bias, 1, "conv3d");

    const Shape& in_shape = input.shape();
    const Shape& w_shape = kernel.weights.shape();
    const std::size_t c_in = in_shape[0], h = in_shape[1], w = in_shape[2], b = in_shape[3];
    const std::size_t c_out = w_shape[0], kh = w_shape[2], kw = w_shape[3], kb = w_shape[4];

    if (w_shape[1] != c_in) {
        throw ShapeError("conv3d: kernel expects " + std::to_string(w_shape[1]) +
                         " input channels, input has " + std::to_string(c_in));
    }
    if (kernel.bias.shape()[0] != c_out) {
        throw ShapeError("conv3d: bias length " + std::to_string(kernel.bias.shape()[0]) +
                         " does not match " + std::to_string(c_out) + " output channels");
    }
    if (kh > h || kw > w || kb > b) {
        throw ShapeError("conv3d: kernel " + shape_str({kh, kw, kb}) +
                         " exceeds input extents " + shape_str({h, w, b}));
    }

    const std::size_t oh = h - kh + 1, ow = w - kw + 1, ob = b - kb + 1;
    std::vector<Real> out(c_out * oh * ow * ob);
    const Real* in = input.values().data();
    const Real* wv = kernel.weights.values().data();

    for (std::size_t oc = 0; oc < c_out; ++oc) {
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(oc * oh * ow * ob),
                  out.begin() + static_cast<std::ptrdiff_t>((oc + 1) * oh * ow * ob),
                  kernel.bias[oc]);
        for (std::size_t ic = 0; ic < c_in; ++ic) {
            for (std::size_t dy = 0; dy < kh; ++dy) {
                for (std::size_t dx = 0; dx < kw; ++dx) {
                    for (std::size_t db = 0; db < kb; ++db) {
                        const Real tap = wv[(((oc * c_in + ic) * kh + dy) * kw + dx) * kb + db];
                        if (tap == Real{0}) continue;
                        for (std::size_t y = 0; y < oh; ++y) {
                            for (std::size_t x = 0; x < ow; ++x) {
                                const Real* src = in + ((ic * h + y + dy) * w + x + dx) * b + db;
                                Real* dst = out.data() + ((oc * oh + y) * ow + x) * ob;
                                for (std::size_t bb = 0; bb < ob; ++bb) dst[bb] += tap * src[bb];
                            }
                        }
                    }
                }
            }
        }
    }

    Tensor result(Shape{c_out, oh, ow, ob}, std::move(out),
                  detail::any_requires_grad({&input, &kernel.weights, &kernel.bias}));
    Tensor weights = kernel.weights;
    Tensor bias = kernel.bias;
    return detail::record_if_needed(tape, result, [input, weights, bias, result, c_in, c_out, h,
                                                   w, b, kh, kw, kb, oh, ow,
                                                   ob](GradientStore& store) {
        auto g = store.adjoint(result);
        const Real* in = input.values().data();
        const Real* wv = weights.values().data();

        if (input.requires_grad()) {
            auto gi = store.accumulate(input);
            for (std::size_t oc = 0; oc < c_out; ++oc) {
                for (std::size_t ic = 0; ic < c_in; ++ic) {
                    for (std::size_t dy = 0; dy < kh; ++dy) {
                        for (std::size_t dx = 0; dx < kw; ++dx) {
                            for (std::size_t db = 0; db < kb; ++db) {
                                const Real tap =
                                    wv[(((oc * c_in + ic) * kh + dy) * kw + dx) * kb + db];
                                if (tap == Real{0}) continue;
                                for (std::size_t y = 0; y < oh; ++y) {
                                    for (std::size_t x = 0; x < ow; ++x) {
                                        const Real* gsrc = g.data() + ((oc * oh + y) * ow + x) * ob;
                                        Real* gdst =
                                            gi.data() + ((ic * h + y + dy) * w + x + dx) * b + db;
                                        for (std::size_t bb = 0; bb < ob; ++bb) {
                                            gdst[bb] += tap * gsrc[bb];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        if (weights.requires_grad()) {
            auto gw = store.accumulate(weights);
            for (std::size_t oc = 0; oc < c_out; ++oc) {
                for (std::size_t ic = 0; ic < c_in; ++ic) {
                    for (std::size_t dy = 0; dy < kh; ++dy) {
                        for (std::size_t dx = 0; dx < kw; ++dx) {
                            for (std::size_t db = 0; db < kb; ++db) {
                                Real acc = 0;
                                for (std::size_t y = 0; y < oh; ++y) {
                                    for (std::size_t x = 0; x < ow; ++x) {
                                        const Real* gsrc = g.data() + ((oc * oh + y) * ow + x) * ob;
                                        const Real* src =
                                            in + ((ic * h + y + dy) * w + x + dx) * b + db;
                                        for (std::size_t bb = 0; bb < ob; ++bb) {
                                            acc += gsrc[bb] * src[bb];
                                        }
                                    }
                                }
                                gw[(((oc * c_in + ic) * kh + dy) * kw + dx) * kb + db] += acc;
                            }
                        }
                    }
                }
            }
        }

        if (bias.requires_grad()) {
            auto gb = store.accumulate(bias);
            for (std::size_t oc = 0; oc < c_out; ++oc) {
                Real acc = 0;
                const Real* gsrc = g.data() + oc * oh * ow * ob;
                for (std::size_t i = 0; i < oh * ow * ob; ++i) acc += gsrc[i];
                gb[oc] += acc;
            }
        }
    });
}

/// 2x2x2 max pooling with floor semantics: trailing odd planes are discarded.
/// Backward routes each window's gradient to its argmax element only; ties go
/// to the first element in scan order.
inline Tensor maxpool3d(Tape& tape, const Tensor& input) {
    detail::expect_rank(input, 4, "maxpool3d");
    const Shape& s = input.shape();
    const std::size_t c = s[0], h = s[1], w = s[2], b = s[3];
    if (h < 2 || w < 2 || b < 2) {
        throw ShapeError("maxpool3d: every pooled axis needs extent >= 2, got " + shape_str(s));
    }
    const std::size_t oh = h / 2, ow = w / 2, ob = b / 2;

    std::vector<Real> out(c * oh * ow * ob);
    std::vector<std::size_t> argmax(out.size());
    const Real* in = input.values().data();

    std::size_t o = 0;
    for (std::size_t ic = 0; ic < c; ++ic) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                for (std::size_t bb = 0; bb < ob; ++bb, ++o) {
                    std::size_t best = 0;
                    Real best_val = 0;
                    bool first = true;
                    for (std::size_t dy = 0; dy < 2; ++dy) {
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            for (std::size_t db = 0; db < 2; ++db) {
                                const std::size_t idx =
                                    ((ic * h + 2 * y + dy) * w + 2 * x + dx) * b + 2 * bb + db;
                                if (first || in[idx] > best_val) {
                                    best = idx;
                                    best_val = in[idx];
                                    first = false;
                                }
                            }
                        }
                    }
                    out[o] = best_val;
                    argmax[o] = best;
                }
            }
        }
    }

    Tensor result(Shape{c, oh, ow, ob}, std::move(out), input.requires_grad());
    return detail::record_if_needed(
        tape, result, [input, result, argmax = std::move(argmax)](GradientStore& store) {
            if (!input.requires_grad()) return;
            auto g = store.adjoint(result);
            auto gi = store.accumulate(input);
            for (std::size_t i = 0; i < g.size(); ++i) gi[argmax[i]] += g[i];
        });
}

/// Elementwise max(0, x); subgradient 0 at x == 0.
inline Tensor relu(Tape& tape, const Tensor& input) {
    std::vector<Real> out(input.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = input[i] > 0 ? input[i] : Real{0};
    Tensor result(input.shape(), std::move(out), input.requires_grad());
    return detail::record_if_needed(tape, result, [input, result](GradientStore& store) {
        if (!input.requires_grad()) return;
        auto g = store.adjoint(result);
        auto gi = store.accumulate(input);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (input[i] > 0) gi[i] += g[i];
        }
    });
}

/// Inverted dropout: in train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate), so eval needs no rescaling.
/// Eval mode is the identity. The forward mask is reused in backward.
inline Tensor dropout(Tape& tape, const Tensor& input, const DropoutSpec& spec,
                      std::mt19937_64& rng) {
    if (spec.rate < 0.0 || spec.rate >= 1.0) {
        throw ValueError("dropout: rate must be in [0,1), got " + std::to_string(spec.rate));
    }
    if (spec.mode == ForwardMode::eval) return input;

    const Real keep_scale = Real{1} / (Real{1} - spec.rate);
    std::bernoulli_distribution drop(spec.rate);
    std::vector<Real> mask(input.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = drop(rng) ? Real{0} : keep_scale;

    std::vector<Real> out(input.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = input[i] * mask[i];
    Tensor result(input.shape(), std::move(out), input.requires_grad());
    return detail::record_if_needed(
        tape, result, [input, result, mask = std::move(mask)](GradientStore& store) {
            if (!input.requires_grad()) return;
            auto g = store.adjoint(result);
            auto gi = store.accumulate(input);
            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * mask[i];
        });
}

/// Fully connected layer: weights [m,n] * input [n] + bias [m].
inline Tensor dense(Tape& tape, const Tensor& input, const Tensor& weights, const Tensor& bias) {
    detail::expect_rank(input, 1, "dense");
    detail::expect_rank(weights, 2, "dense");
    detail::expect_rank(bias, 1, "dense");
    const std::size_t m = weights.shape()[0], n = weights.shape()[1];
    if (input.size() != n || bias.size() != m) {
        throw ShapeError("dense: weights " + shape_str(weights.shape()) + " with input " +
                         shape_str(input.shape()) + " and bias " + shape_str(bias.shape()));
    }

    std::vector<Real> out(m);
    const Real* in = input.values().data();
    const Real* wv = weights.values().data();
    for (std::size_t r = 0; r < m; ++r) {
        Real acc = bias[r];
        const Real* row = wv + r * n;
        for (std::size_t i = 0; i < n; ++i) acc += row[i] * in[i];
        out[r] = acc;
    }

    Tensor result(Shape{m}, std::move(out),
                  detail::any_requires_grad({&input, &weights, &bias}));
    return detail::record_if_needed(tape, result, [input, weights, bias, result, m,
                                                   n](GradientStore& store) {
        auto g = store.adjoint(result);
        const Real* wv = weights.values().data();
        const Real* in = input.values().data();
        if (input.requires_grad()) {
            auto gi = store.accumulate(input);
            for (std::size_t r = 0; r < m; ++r) {
                const Real* row = wv + r * n;
                for (std::size_t i = 0; i < n; ++i) gi[i] += g[r] * row[i];
            }
        }
        if (weights.requires_grad()) {
            auto gw = store.accumulate(weights);
            for (std::size_t r = 0; r < m; ++r) {
                Real* row = gw.data() + r * n;
                for (std::size_t i = 0; i < n; ++i) row[i] += g[r] * in[i];
            }
        }
        if (bias.requires_grad()) {
            auto gb = store.accumulate(bias);
            for (std::size_t r = 0; r < m; ++r) gb[r] += g[r];
        }
    });
}

/// Numerically stable softmax over a vector of k >= 2 logits.
inline Tensor softmax(Tape& tape, const Tensor& logits) {
    detail::expect_rank(logits, 1, "softmax");
    const std::size_t k = logits.size();
    if (k < 2) throw ShapeError("softmax: needs at least 2 logits");

    Real max_logit = logits[0];
    for (std::size_t i = 1; i < k; ++i) max_logit = std::max(max_logit, logits[i]);
    std::vector<Real> out(k);
    Real denom = 0;
    for (std::size_t i = 0; i < k; ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        denom += out[i];
    }
    for (std::size_t i = 0; i < k; ++i) out[i] /= denom;

    Tensor result(Shape{k}, std::move(out), logits.requires_grad());
    return detail::record_if_needed(tape, result, [logits, result, k](GradientStore& store) {
        if (!logits.requires_grad()) return;
        auto g = store.adjoint(result);
        auto gl = store.accumulate(logits);
        Real dot = 0;
        for (std::size_t i = 0; i < k; ++i) dot += g[i] * result[i];
        for (std::size_t i = 0; i < k; ++i) gl[i] += result[i] * (g[i] - dot);
    });
}

/// Mean class-weighted negative log likelihood over already-computed
/// probability rows. Shared by the tape op and by validation-loss reporting
/// so both use identical clamping.
inline Real weighted_nll(std::span<const Real> probs_rows, std::span<const ClassLabel> labels,
                         const std::array<Real, 2>& class_weights) {
    const std::size_t batch = labels.size();
    Real total = 0;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t cls = static_cast<std::size_t>(labels[i]);
        const Real p = std::clamp(probs_rows[i * 2 + cls], kLogEpsilon, Real{1} - kLogEpsilon);
        total += class_weights[cls] * -std::log(p);
    }
    return total / static_cast<Real>(batch);
}

/// Class-weighted cross-entropy over a [batch,2] probability matrix.
/// loss = mean_i w[label_i] * (-ln p[i, label_i]), probabilities clamped.
inline Tensor weighted_cross_entropy(Tape& tape, const Tensor& probs,
                                     std::vector<ClassLabel> labels,
                                     const std::array<Real, 2>& class_weights) {
    detail::expect_rank(probs, 2, "weighted_cross_entropy");
    if (probs.shape()[1] != 2) {
        throw ShapeError("weighted_cross_entropy: expected [batch,2] probabilities, got " +
                         shape_str(probs.shape()));
    }
    if (labels.empty()) throw ValueError("weighted_cross_entropy: empty batch");
    if (labels.size() != probs.shape()[0]) {
        throw ShapeError("weighted_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(probs.shape()[0]) + " rows");
    }

    const Real loss = weighted_nll(probs.values(), labels, class_weights);
    Tensor result(Shape{1}, {loss}, probs.requires_grad());
    return detail::record_if_needed(
        tape, result,
        [probs, result, labels = std::move(labels), class_weights](GradientStore& store) {
            if (!probs.requires_grad()) return;
            const Real g = store.adjoint(result)[0];
            auto gp = store.accumulate(probs);
            const Real batch = static_cast<Real>(labels.size());
            for (std::size_t i = 0; i < labels.size(); ++i) {
                const std::size_t cls = static_cast<std::size_t>(labels[i]);
                const Real p = probs[i * 2 + cls];
                if (p <= kLogEpsilon || p >= Real{1} - kLogEpsilon) continue;  // clamped flat
                gp[i * 2 + cls] += g * -class_weights[cls] / (batch * p);
            }
        });
}

/// I.i.d. Normal(0, stddev^2) samples; used for convolution kernels.
inline Tensor init_normal(Shape shape, Real stddev, std::mt19937_64& rng) {
    std::normal_distribution<Real> dist(Real{0}, stddev);
    std::vector<Real> values(shape_numel(shape));
    for (Real& v : values) v = dist(rng);
    return Tensor(std::move(shape), std::move(values));
}

/// I.i.d. Uniform(-a, a) with a = sqrt(6/(fan_in+fan_out)); used for dense
/// layers. Returns a [fan_out, fan_in] matrix.
inline Tensor init_glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    if (fan_in < 1 || fan_out < 1) {
        throw ValueError("init_glorot_uniform: fan_in and fan_out must be >= 1");
    }
    const Real bound = std::sqrt(Real{6} / static_cast<Real>(fan_in + fan_out));
    std::uniform_real_distribution<Real> dist(-bound, bound);
    std::vector<Real> values(fan_in * fan_out);
    for (Real& v : values) v = dist(rng);
    return Tensor(Shape{fan_out, fan_in}, std::move(values));
}

}  // namespace hypersal
