#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypersal/errors.hpp"
#include "hypersal/synth.hpp"
#include "hypersal/train.hpp"
#include "hypersal/types.hpp"

namespace hypersal {

/// One JSON document that pins an entire run: synthetic data recipe, patch
/// tiling, split fractions, model input shape, training hyperparameters, and
/// saliency export bands. Unknown keys are rejected; missing keys take the
/// defaults below (training defaults: batch 32, epochs 126, lr 1e-6, class
/// weights derived from the training-split counts).
struct RunConfig {
    std::uint64_t seed = 42;
    SynthSpec synth;  // synth.seed is filled from `seed` when generating
    std::array<std::size_t, 2> patch = {16, 16};
    std::array<std::size_t, 2> stride = {16, 16};  // defaults to `patch`
    std::array<double, 3> split = {0.6, 0.2, 0.2};
    Shape input_shape;  // defaults to [1, patch_h, patch_w, synth.bands]
    TrainConfig train;  // train.seed is filled from `seed`
    bool class_weights_auto = true;
    std::vector<std::size_t> saliency_bands;
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::string& prefix,
                                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* name : allowed) {
            if (key == name) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(prefix + key, "unknown key");
    }
}

template <typename T>
T get_or(const json& obj, const std::string& prefix, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(prefix + key, "wrong type");
    }
}

template <typename T, std::size_t N>
std::array<T, N> get_array(const json& obj, const std::string& prefix, const char* key,
                           std::array<T, N> fallback) {
    if (!obj.contains(key)) return fallback;
    const json& arr = obj.at(key);
    if (!arr.is_array() || arr.size() != N) {
        throw ConfigError(prefix + key, "expected an array of " + std::to_string(N) + " values");
    }
    std::array<T, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        try {
            out[i] = arr[i].get<T>();
        } catch (const json::exception&) {
            throw ConfigError(prefix + key, "wrong element type");
        }
    }
    return out;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc) {
    using detail::get_array;
    using detail::get_or;
    using detail::reject_unknown_keys;

    RunConfig cfg;
    reject_unknown_keys(doc, "", {"seed", "data", "model", "train", "saliency"});
    cfg.seed = get_or<std::uint64_t>(doc, "", "seed", cfg.seed);

    if (doc.contains("data")) {
        const auto& data = doc.at("data");
        reject_unknown_keys(data, "data.", {"synth", "patch", "stride", "split"});
        if (data.contains("synth")) {
            const auto& synth = data.at("synth");
            reject_unknown_keys(synth, "data.synth.",
                                {"num_cubes", "height", "width", "bands", "planted_band",
                                 "lesion_fraction", "signal_amplitude", "noise_stddev",
                                 "class_balance"});
            cfg.synth.num_cubes =
                get_or<std::size_t>(synth, "data.synth.", "num_cubes", cfg.synth.num_cubes);
            cfg.synth.height = get_or<std::size_t>(synth, "data.synth.", "height",
                                                   cfg.synth.height);
            cfg.synth.width = get_or<std::size_t>(synth, "data.synth.", "width", cfg.synth.width);
            cfg.synth.bands = get_or<std::size_t>(synth, "data.synth.", "bands", cfg.synth.bands);
            cfg.synth.planted_band =
                get_or<std::size_t>(synth, "data.synth.", "planted_band", cfg.synth.planted_band);
            cfg.synth.lesion_fraction = get_or<double>(synth, "data.synth.", "lesion_fraction",
                                                       cfg.synth.lesion_fraction);
            cfg.synth.signal_amplitude = get_or<double>(synth, "data.synth.", "signal_amplitude",
                                                        cfg.synth.signal_amplitude);
            cfg.synth.noise_stddev =
                get_or<double>(synth, "data.synth.", "noise_stddev", cfg.synth.noise_stddev);
            cfg.synth.class_balance =
                get_or<double>(synth, "data.synth.", "class_balance", cfg.synth.class_balance);
        }
        cfg.patch = get_array<std::size_t, 2>(data, "data.", "patch", cfg.patch);
        cfg.stride = get_array<std::size_t, 2>(data, "data.", "stride", cfg.patch);
        cfg.split = get_array<double, 3>(data, "data.", "split", cfg.split);
    }
    if (cfg.patch[0] == 0 || cfg.patch[1] == 0) {
        throw ConfigError("data.patch", "patch extents must be positive");
    }

    cfg.input_shape = Shape{1, cfg.patch[0], cfg.patch[1], cfg.synth.bands};
    if (doc.contains("model")) {
        const auto& model = doc.at("model");
        reject_unknown_keys(model, "model.", {"input_shape"});
        if (model.contains("input_shape")) {
            const auto dims =
                get_array<std::size_t, 4>(model, "model.", "input_shape", {0, 0, 0, 0});
            cfg.input_shape = Shape{dims[0], dims[1], dims[2], dims[3]};
            if (dims[0] != 1) throw ConfigError("model.input_shape", "leading extent must be 1");
        }
    }

    cfg.train.seed = cfg.seed;
    if (doc.contains("train")) {
        const auto& train = doc.at("train");
        reject_unknown_keys(train, "train.",
                            {"batch_size", "epochs", "learning_rate", "beta1", "beta2", "epsilon",
                             "class_weights", "shuffle"});
        cfg.train.batch_size =
            get_or<std::size_t>(train, "train.", "batch_size", cfg.train.batch_size);
        cfg.train.epochs = get_or<std::size_t>(train, "train.", "epochs", cfg.train.epochs);
        cfg.train.adam.learning_rate =
            get_or<double>(train, "train.", "learning_rate", cfg.train.adam.learning_rate);
        cfg.train.adam.beta1 = get_or<double>(train, "train.", "beta1", cfg.train.adam.beta1);
        cfg.train.adam.beta2 = get_or<double>(train, "train.", "beta2", cfg.train.adam.beta2);
        cfg.train.adam.epsilon =
            get_or<double>(train, "train.", "epsilon", cfg.train.adam.epsilon);
        cfg.train.shuffle = get_or<bool>(train, "train.", "shuffle", cfg.train.shuffle);
        if (train.contains("class_weights")) {
            const auto& weights = train.at("class_weights");
            if (weights.is_string() && weights.get<std::string>() == "auto") {
                cfg.class_weights_auto = true;
            } else if (weights.is_array() && weights.size() == 2) {
                cfg.class_weights_auto = false;
                cfg.train.class_weights = {weights[0].get<Real>(), weights[1].get<Real>()};
            } else {
                throw ConfigError("train.class_weights", "expected \"auto\" or [w0, w1]");
            }
        }
        if (cfg.train.batch_size == 0) throw ConfigError("train.batch_size", "must be >= 1");
        if (cfg.train.epochs == 0) throw ConfigError("train.epochs", "must be >= 1");
    }

    if (doc.contains("saliency")) {
        const auto& saliency = doc.at("saliency");
        reject_unknown_keys(saliency, "saliency.", {"bands"});
        if (saliency.contains("bands")) {
            try {
                cfg.saliency_bands = saliency.at("bands").get<std::vector<std::size_t>>();
            } catch (const nlohmann::json::exception&) {
                throw ConfigError("saliency.bands", "expected an array of band indices");
            }
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc);
}

}  // namespace hypersal
