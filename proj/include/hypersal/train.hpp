#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hypersal/csv.hpp"
#include "hypersal/dataset.hpp"
#include "hypersal/io_util.hpp"
#include "hypersal/model.hpp"
#include "hypersal/nn_ops.hpp"
#include "hypersal/ops_core.hpp"

namespace hypersal {

struct AdamConfig {
    Real learning_rate = 1e-6;
    Real beta1 = 0.9;
    Real beta2 = 0.999;
    Real epsilon = 1e-8;
};

/// Adam moment estimates, mirroring the parameter tensors element for
/// element. The step counter drives bias correction.
struct AdamState {
    AdamConfig config;
    std::size_t step = 0;
    std::vector<std::vector<Real>> m;
    std::vector<std::vector<Real>> v;

    explicit AdamState(const ModelParams& params, AdamConfig cfg = {}) : config(cfg) {
        for (const auto& [name, t] : params.parameters()) {
            m.emplace_back(t.size(), Real{0});
            v.emplace_back(t.size(), Real{0});
        }
    }
};

/// One bias-corrected Adam update from the gradients currently stored on the
/// parameter tensors. Errors, naming the parameter, if any gradient is
/// missing.
inline void adam_step(ModelParams& params, AdamState& state) {
    auto named = params.parameters();
    for (const auto& [name, t] : named) {
        if (!t.has_grad()) throw GraphError("adam_step: parameter '" + name + "' has no gradient");
    }

    state.step += 1;
    const Real t_real = static_cast<Real>(state.step);
    const Real bc1 = Real{1} - std::pow(state.config.beta1, t_real);
    const Real bc2 = Real{1} - std::pow(state.config.beta2, t_real);

    for (std::size_t p = 0; p < named.size(); ++p) {
        Tensor& tensor = named[p].second;
        auto grad = tensor.grad();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const Real g = grad[i];
            m[i] = state.config.beta1 * m[i] + (Real{1} - state.config.beta1) * g;
            v[i] = state.config.beta2 * v[i] + (Real{1} - state.config.beta2) * g * g;
            const Real m_hat = m[i] / bc1;
            const Real v_hat = v[i] / bc2;
            tensor[i] -= state.config.learning_rate * m_hat /
                         (std::sqrt(v_hat) + state.config.epsilon);
        }
    }
}

inline void zero_grads(ModelParams& params) {
    for (auto& [name, t] : params.parameters()) t.zero_grad();
}

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 126;
    AdamConfig adam;
    std::array<Real, 2> class_weights = {1, 1};
    std::uint64_t seed = 0;
    bool shuffle = true;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
};

using History = std::vector<EpochStats>;

namespace detail {

/// Shuffled index batches covering 0..n-1 exactly once; the last batch may be
/// partial.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                          bool shuffle, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (shuffle) std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

}  // namespace detail

/// Weighted loss and accuracy of `params` over a patch list, dropout
/// inactive. Used for the per-epoch validation row.
inline std::pair<double, double> weighted_loss_and_accuracy(
    const ModelParams& params, const std::vector<LabeledPatch>& set,
    const std::array<Real, 2>& class_weights) {
    std::mt19937_64 unused_rng(0);
    std::vector<Real> probs_rows;
    std::vector<ClassLabel> labels;
    std::size_t correct = 0;
    for (const LabeledPatch& sample : set) {
        Tape tape;
        const ForwardResult out =
            forward(tape, params, sample.patch, ForwardMode::eval, unused_rng);
        probs_rows.push_back(out.probs[0]);
        probs_rows.push_back(out.probs[1]);
        labels.push_back(sample.label);
        if (predicted_class(out.probs) == sample.label) ++correct;
    }
    const double loss = weighted_nll(probs_rows, labels, class_weights);
    const double accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
    return {loss, accuracy};
}

/// Mini-batch training loop: per-epoch seeded reshuffle, one tape per batch,
/// weighted cross-entropy over the stacked probability rows, one Adam step
/// per batch. Returns per-epoch history; validation fields stay empty when
/// the validation set is empty.
inline History train(ModelParams& params, const std::vector<LabeledPatch>& train_set,
                     const std::vector<LabeledPatch>& val_set, const TrainConfig& config) {
    if (train_set.empty()) throw ValueError("train: empty training set");
    if (config.batch_size == 0) throw ValueError("train: batch_size must be >= 1");
    if (config.epochs == 0) throw ValueError("train: epochs must be >= 1");
    bool has_healthy = false, has_infected = false;
    for (const LabeledPatch& p : train_set) {
        (p.label == ClassLabel::healthy ? has_healthy : has_infected) = true;
    }
    if (!has_healthy || !has_infected) {
        throw ValueError("train: training set contains a single class");
    }

    std::mt19937_64 rng(config.seed);
    AdamState adam(params, config.adam);
    History history;
    history.reserve(config.epochs);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto batches =
            detail::make_batches(train_set.size(), config.batch_size, config.shuffle, rng);
        double epoch_loss_sum = 0;

        for (const auto& batch : batches) {
            Tape tape;
            std::vector<Tensor> prob_rows;
            std::vector<ClassLabel> labels;
            prob_rows.reserve(batch.size());
            labels.reserve(batch.size());
            for (std::size_t idx : batch) {
                const ForwardResult out =
                    forward(tape, params, train_set[idx].patch, ForwardMode::train, rng);
                prob_rows.push_back(out.probs);
                labels.push_back(train_set[idx].label);
            }
            const Tensor probs = stack_rows(tape, prob_rows);
            const Tensor loss =
                weighted_cross_entropy(tape, probs, labels, config.class_weights);

            zero_grads(params);
            tape.backward(loss);
            adam_step(params, adam);

            epoch_loss_sum += loss.item() * static_cast<double>(batch.size());
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss_sum / static_cast<double>(train_set.size());
        if (!val_set.empty()) {
            const auto [val_loss, val_acc] =
                weighted_loss_and_accuracy(params, val_set, config.class_weights);
            stats.val_loss = val_loss;
            stats.val_accuracy = val_acc;
        }
        history.push_back(stats);
    }
    return history;
}

inline void write_history_csv(const History& history, const std::filesystem::path& path) {
    std::string text = "epoch,train_loss,val_loss,val_accuracy\n";
    for (const EpochStats& row : history) {
        text += std::to_string(row.epoch);
        text += ",";
        text += format_real(row.train_loss);
        text += ",";
        if (row.val_loss) text += format_real(*row.val_loss);
        text += ",";
        if (row.val_accuracy) text += format_real(*row.val_accuracy);
        text += "\n";
    }
    io::write_text_file(path, text);
}

}  // namespace hypersal
