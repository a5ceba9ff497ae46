#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hypersal/checkpoint.hpp"
#include "hypersal/model.hpp"

#include "helpers.hpp"

using namespace hypersal;

namespace {

ModelParams zero_model(const Shape& input_shape) {
    ModelParams p = init_model(input_shape, 0);
    for (auto& [name, t] : p.parameters()) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0;
    }
    return p;
}

}  // namespace

TEST_CASE("shape chain for the full-scale input") {
    const auto chain = infer_shapes(Shape{1, 64, 64, 240});
    REQUIRE(chain.size() == 8);
    CHECK(chain[0].shape == Shape{1, 64, 64, 240});
    CHECK(chain[1].shape == Shape{2, 62, 62, 225});
    CHECK(chain[2].shape == Shape{2, 31, 31, 112});
    CHECK(chain[3].shape == Shape{4, 29, 29, 97});
    CHECK(chain[4].shape == Shape{4, 14, 14, 48});
    CHECK(chain[5].shape == Shape{37632});
    CHECK(chain[6].shape == Shape{16});
    CHECK(chain[7].shape == Shape{2});
}

TEST_CASE("shape chain for the desk-scale input") {
    const auto chain = infer_shapes(Shape{1, 16, 16, 64});
    CHECK(chain[1].shape == Shape{2, 14, 14, 49});
    CHECK(chain[2].shape == Shape{2, 7, 7, 24});
    CHECK(chain[3].shape == Shape{4, 5, 5, 9});
    CHECK(chain[4].shape == Shape{4, 2, 2, 4});
    CHECK(chain[5].shape == Shape{64});
}

TEST_CASE("infer_shapes names the failing layer") {
    // [1,8,8,34]: conv1 -> [2,6,6,19], pool1 -> [2,3,3,9]; conv2 then needs 16
    // spectral taps from 9 bands.
    CHECK_THROWS_WITH(infer_shapes(Shape{1, 8, 8, 34}),
                      Catch::Matchers::ContainsSubstring("conv2"));
    // [1,9,16,64]: conv2 emits H=1, so the second pool fails.
    CHECK_THROWS_WITH(infer_shapes(Shape{1, 9, 16, 64}),
                      Catch::Matchers::ContainsSubstring("pool2"));
    CHECK_THROWS_WITH(infer_shapes(Shape{1, 2, 16, 64}),
                      Catch::Matchers::ContainsSubstring("conv1"));
    CHECK_THROWS_AS(infer_shapes(Shape{2, 16, 16, 64}), ShapeError);
}

TEST_CASE("parameter counts") {
    CHECK(count_params(init_model(Shape{1, 64, 64, 240}, 1)) == 603'608);

    const ModelParams full = init_model(Shape{1, 64, 64, 240}, 1);
    CHECK(full.conv1.weights.size() + full.conv1.bias.size() == 290);
    CHECK(full.conv2.weights.size() + full.conv2.bias.size() == 1'156);
    CHECK(full.dense1_weights.size() + full.dense1_bias.size() == 602'128);
    CHECK(full.dense2_weights.size() + full.dense2_bias.size() == 34);
    CHECK(full.flatten_dim() == 37'632);

    // Degenerate hand-built params: the count is just the sum of sizes.
    ModelParams tiny;
    tiny.input_shape = Shape{1, 3, 3, 16};
    tiny.conv1 = {Tensor::zeros(Shape{1, 1, 1, 1, 1}), Tensor::zeros(Shape{1})};
    tiny.conv2 = {Tensor::zeros(Shape{1, 1, 1, 1, 1}), Tensor::zeros(Shape{1})};
    tiny.dense1_weights = Tensor::zeros(Shape{1, 1});
    tiny.dense1_bias = Tensor::zeros(Shape{1});
    tiny.dense2_weights = Tensor::zeros(Shape{2, 1});
    tiny.dense2_bias = Tensor::zeros(Shape{2});
    CHECK(count_params(tiny) == 10);
}

TEST_CASE("initialization: zero biases, normal kernels, reproducible") {
    const ModelParams p = init_model(Shape{1, 16, 16, 64}, 42);
    for (Real v : p.conv1.bias.values()) CHECK(v == 0);
    for (Real v : p.conv2.bias.values()) CHECK(v == 0);
    for (Real v : p.dense1_bias.values()) CHECK(v == 0);
    for (Real v : p.dense2_bias.values()) CHECK(v == 0);
    for (const auto& [name, t] : p.parameters()) CHECK(t.requires_grad());

    const ModelParams q = init_model(Shape{1, 16, 16, 64}, 42);
    const ModelParams r = init_model(Shape{1, 16, 16, 64}, 43);
    CHECK(p.conv1.weights.values()[0] == q.conv1.weights.values()[0]);
    CHECK(p.conv1.weights.values()[0] != r.conv1.weights.values()[0]);

    Real max_abs = 0;
    for (Real v : p.conv1.weights.values()) max_abs = std::max(max_abs, std::abs(v));
    CHECK(max_abs < 0.05 * 5);  // a 5 sigma outlier would be suspect
}

TEST_CASE("forward on zero params and zero patch gives even probabilities") {
    const ModelParams zeros = zero_model(Shape{1, 16, 16, 64});
    Tape tape;
    std::mt19937_64 rng(1);
    const ForwardResult out =
        forward(tape, zeros, Tensor::zeros(Shape{1, 16, 16, 64}), ForwardMode::eval, rng);
    CHECK(out.logits[0] == 0);
    CHECK(out.logits[1] == 0);
    CHECK(out.probs[0] == 0.5);
    CHECK(out.probs[1] == 0.5);
}

TEST_CASE("forward layer shapes agree with infer_shapes") {
    const ModelParams p = init_model(Shape{1, 16, 16, 64}, 7);
    Tape tape;
    std::mt19937_64 rng(1);
    const ForwardResult out =
        forward(tape, p, Tensor::zeros(Shape{1, 16, 16, 64}), ForwardMode::eval, rng);
    const auto chain = infer_shapes(Shape{1, 16, 16, 64});
    REQUIRE(out.layer_shapes.size() == chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i) {
        CHECK(out.layer_shapes[i].name == chain[i].name);
        CHECK(out.layer_shapes[i].shape == chain[i].shape);
    }
}

TEST_CASE("forward determinism") {
    std::mt19937_64 data_rng(3);
    const ModelParams p = init_model(Shape{1, 16, 16, 64}, 11);
    const Tensor patch = testutil::random_tensor(Shape{1, 16, 16, 64}, data_rng, 0.0, 1.0);

    std::mt19937_64 rng_a(1), rng_b(2);
    Tape ta, tb;
    const ForwardResult a = forward(ta, p, patch, ForwardMode::eval, rng_a);
    const ForwardResult b = forward(tb, p, patch, ForwardMode::eval, rng_b);
    CHECK(a.logits[0] == b.logits[0]);
    CHECK(a.logits[1] == b.logits[1]);

    std::mt19937_64 rng_c(5), rng_d(5), rng_e(6);
    Tape tc, td, te;
    const ForwardResult c = forward(tc, p, patch, ForwardMode::train, rng_c);
    const ForwardResult d = forward(td, p, patch, ForwardMode::train, rng_d);
    const ForwardResult e = forward(te, p, patch, ForwardMode::train, rng_e);
    CHECK(c.logits[0] == d.logits[0]);
    CHECK(c.logits[1] == d.logits[1]);
    CHECK((c.logits[0] != e.logits[0] || c.logits[1] != e.logits[1]));
}

TEST_CASE("probabilities are normalized and argmax-consistent with logits") {
    std::mt19937_64 rng(19);
    const ModelParams p = init_model(Shape{1, 16, 16, 64}, 23);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor patch = testutil::random_tensor(Shape{1, 16, 16, 64}, rng, 0.0, 1.0);
        Tape tape;
        std::mt19937_64 fwd_rng(1);
        const ForwardResult out = forward(tape, p, patch, ForwardMode::eval, fwd_rng);
        CHECK(std::abs(out.probs[0] + out.probs[1] - 1.0) < 1e-6);
        CHECK(out.probs[0] > 0);
        CHECK(out.probs[1] > 0);
        const bool logit_argmax = out.logits[1] > out.logits[0];
        const bool prob_argmax = out.probs[1] > out.probs[0];
        CHECK(logit_argmax == prob_argmax);
    }
}

TEST_CASE("forward rejects mismatched patch shapes") {
    const ModelParams p = init_model(Shape{1, 16, 16, 64}, 1);
    Tape tape;
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(forward(tape, p, Tensor::zeros(Shape{1, 16, 16, 52}), ForwardMode::eval, rng),
                    ShapeError);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    testutil::TempDir dir("ckpt");
    const ModelParams p = init_model(Shape{1, 16, 16, 64}, 77);

    const auto path_a = dir.path / "model_a.hsm";
    const auto path_b = dir.path / "model_b.hsm";
    save_checkpoint(p, path_a);
    const ModelParams loaded = load_checkpoint(path_a);
    save_checkpoint(loaded, path_b);
    CHECK(testutil::read_bytes(path_a) == testutil::read_bytes(path_b));

    CHECK(loaded.input_shape == p.input_shape);
    const auto orig = p.parameters();
    const auto back = loaded.parameters();
    for (std::size_t i = 0; i < orig.size(); ++i) {
        REQUIRE(back[i].second.shape() == orig[i].second.shape());
        for (std::size_t j = 0; j < orig[i].second.size(); ++j) {
            // storage is 32-bit, so values survive as their float casts
            CHECK(back[i].second[j] == static_cast<Real>(static_cast<float>(orig[i].second[j])));
        }
    }
}

TEST_CASE("checkpoint loader rejects malformed files") {
    testutil::TempDir dir("ckpt_bad");
    const ModelParams p = init_model(Shape{1, 16, 16, 64}, 3);
    const auto path = dir.path / "model.hsm";
    save_checkpoint(p, path);

    auto bytes = testutil::read_bytes(path);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    io::write_file(dir.path / "bad_magic.hsm", bad_magic);
    CHECK_THROWS_AS(load_checkpoint(dir.path / "bad_magic.hsm"), BadMagicError);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 17);
    io::write_file(dir.path / "truncated.hsm", truncated);
    CHECK_THROWS_AS(load_checkpoint(dir.path / "truncated.hsm"), TruncatedFileError);
}
