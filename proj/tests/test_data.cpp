#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <random>
#include <set>

#include "hypersal/cube.hpp"
#include "hypersal/dataset.hpp"
#include "hypersal/pipeline.hpp"
#include "hypersal/reference.hpp"
#include "hypersal/synth.hpp"

#include "helpers.hpp"

using namespace hypersal;

namespace {

HyperCube random_cube(std::size_t h, std::size_t w, std::size_t b, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    HyperCube cube;
    cube.height = h;
    cube.width = w;
    cube.bands = b;
    cube.data.resize(h * w * b);
    for (float& v : cube.data) v = dist(rng);
    return cube;
}

}  // namespace

TEST_CASE("cube write/read round-trips bit-exactly") {
    testutil::TempDir dir("cube");
    HyperCube cube = random_cube(8, 8, 16, 5);
    cube.lambda_min_nm = 400.25;
    cube.lambda_max_nm = 1001.5;
    const auto path = dir.path / "cube.hsc";
    write_cube(cube, path);
    const HyperCube back = read_cube(path);
    CHECK(back.height == cube.height);
    CHECK(back.width == cube.width);
    CHECK(back.bands == cube.bands);
    CHECK(back.lambda_min_nm == cube.lambda_min_nm);
    CHECK(back.lambda_max_nm == cube.lambda_max_nm);
    CHECK(std::memcmp(back.data.data(), cube.data.data(), cube.data.size() * 4) == 0);

    write_cube(back, dir.path / "again.hsc");
    CHECK(testutil::read_bytes(path) == testutil::read_bytes(dir.path / "again.hsc"));
}

TEST_CASE("cube reader rejects bad magic, truncation, and non-finite data") {
    testutil::TempDir dir("cube_bad");
    const HyperCube cube = random_cube(4, 4, 8, 9);
    const auto path = dir.path / "cube.hsc";
    write_cube(cube, path);
    auto bytes = testutil::read_bytes(path);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    bad_magic[1] = 'X';
    bad_magic[2] = 'X';
    bad_magic[3] = 'X';
    io::write_file(dir.path / "bad.hsc", bad_magic);
    CHECK_THROWS_AS(read_cube(dir.path / "bad.hsc"), BadMagicError);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 6);
    io::write_file(dir.path / "short.hsc", truncated);
    CHECK_THROWS_MATCHES(read_cube(dir.path / "short.hsc"), TruncatedFileError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("expected")));

    auto extra = bytes;
    extra.push_back(0);
    io::write_file(dir.path / "long.hsc", extra);
    CHECK_THROWS_AS(read_cube(dir.path / "long.hsc"), TruncatedFileError);

    auto nan_bytes = bytes;
    const float nan_value = std::numeric_limits<float>::quiet_NaN();
    // header: magic(4) + three u32 extents(12) + two f64 calibration(16)
    std::memcpy(nan_bytes.data() + 32, &nan_value, 4);
    io::write_file(dir.path / "nan.hsc", nan_bytes);
    CHECK_THROWS_AS(read_cube(dir.path / "nan.hsc"), NonFiniteError);

    HyperCube infinite = cube;
    infinite.data[0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(write_cube(infinite, dir.path / "inf.hsc"), NonFiniteError);
}

TEST_CASE("normalize applies per-cube min-max scaling") {
    HyperCube cube;
    cube.height = 1;
    cube.width = 3;
    cube.bands = 1;
    cube.data = {2.0f, 4.0f, 6.0f};
    const HyperCube scaled = normalize(cube);
    CHECK(scaled.data[0] == 0.0f);
    CHECK(scaled.data[1] == 0.5f);
    CHECK(scaled.data[2] == 1.0f);

    HyperCube already = cube;
    already.data = {0.0f, 0.25f, 1.0f};
    const HyperCube unchanged = normalize(already);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(unchanged.data[i] - already.data[i]) < 1e-7f);
    }

    HyperCube constant = cube;
    constant.data = {3.0f, 3.0f, 3.0f};
    CHECK_THROWS_AS(normalize(constant), ValueError);
}

TEST_CASE("patch tiling counts and origins") {
    const HyperCube big = random_cube(500, 1600, 1, 2);
    const auto patches = extract_patches(big, 64, 64, 64, 64);
    CHECK(patches.size() == 175);  // floor(500/64) * floor(1600/64) = 7 * 25

    std::set<std::pair<std::size_t, std::size_t>> origins;
    for (const CubePatch& p : patches) {
        CHECK(p.origin.y + 64 <= 500);
        CHECK(p.origin.x + 64 <= 1600);
        CHECK(p.origin.y % 64 == 0);
        CHECK(p.origin.x % 64 == 0);
        origins.insert({p.origin.y, p.origin.x});
        CHECK(p.patch.shape() == Shape{1, 64, 64, 1});
    }
    CHECK(origins.size() == patches.size());

    const HyperCube exact = random_cube(64, 64, 4, 3);
    const auto single = extract_patches(exact, 64, 64, 64, 64);
    REQUIRE(single.size() == 1);
    CHECK(single[0].origin.y == 0);
    CHECK(single[0].origin.x == 0);

    CHECK_THROWS_AS(extract_patches(random_cube(63, 64, 4, 4), 64, 64, 64, 64), ShapeError);
}

TEST_CASE("patch values copy the cube band-interleaved layout") {
    const HyperCube cube = random_cube(6, 6, 5, 8);
    const auto patches = extract_patches(cube, 3, 3, 3, 3);
    REQUIRE(patches.size() == 4);
    const CubePatch& p = patches[3];  // origin (3,3)
    for (std::size_t y = 0; y < 3; ++y) {
        for (std::size_t x = 0; x < 3; ++x) {
            for (std::size_t b = 0; b < 5; ++b) {
                CHECK(p.patch[(y * 3 + x) * 5 + b] ==
                      static_cast<Real>(cube.at(3 + y, 3 + x, b)));
            }
        }
    }
}

TEST_CASE("synthetic cubes plant the promised mean shift at the planted band") {
    SynthSpec spec;
    spec.num_cubes = 12;
    spec.height = 16;
    spec.width = 16;
    spec.bands = 24;
    spec.planted_band = 13;  // default_planted_band(24) = 13
    spec.signal_amplitude = 0.3;
    spec.noise_stddev = 0.02;
    spec.lesion_fraction = 0.5;
    spec.seed = 99;
    const auto cubes = generate_synthetic(spec);
    REQUIRE(cubes.size() == 12);

    double lesion_sum = 0, healthy_sum = 0;
    std::size_t lesion_n = 0, healthy_n = 0;
    const std::size_t b = spec.planted_band - 1;
    for (const SynthCube& sc : cubes) {
        for (std::size_t y = 0; y < spec.height; ++y) {
            for (std::size_t x = 0; x < spec.width; ++x) {
                if (sc.label == ClassLabel::infected && sc.mask.lesion_at(y, x)) {
                    lesion_sum += sc.cube.at(y, x, b);
                    ++lesion_n;
                } else if (sc.label == ClassLabel::healthy) {
                    healthy_sum += sc.cube.at(y, x, b);
                    ++healthy_n;
                }
            }
        }
    }
    REQUIRE(lesion_n > 0);
    REQUIRE(healthy_n > 0);
    const double shift = lesion_sum / lesion_n - healthy_sum / healthy_n;
    CHECK(shift > spec.signal_amplitude - 0.02);
    CHECK(shift < spec.signal_amplitude + 0.02);
}

TEST_CASE("zero amplitude leaves classes statistically indistinguishable") {
    SynthSpec spec;
    spec.num_cubes = 12;
    spec.height = 16;
    spec.width = 16;
    spec.bands = 24;
    spec.signal_amplitude = 0.0;
    spec.noise_stddev = 0.02;
    spec.seed = 7;
    const auto cubes = generate_synthetic(spec);

    const std::size_t b = default_planted_band(24) - 1;
    double infected_sum = 0, healthy_sum = 0;
    std::size_t infected_n = 0, healthy_n = 0;
    for (const SynthCube& sc : cubes) {
        for (std::size_t y = 0; y < spec.height; ++y) {
            for (std::size_t x = 0; x < spec.width; ++x) {
                if (sc.label == ClassLabel::infected) {
                    infected_sum += sc.cube.at(y, x, b);
                    ++infected_n;
                } else {
                    healthy_sum += sc.cube.at(y, x, b);
                    ++healthy_n;
                }
            }
        }
    }
    const double diff = std::abs(infected_sum / infected_n - healthy_sum / healthy_n);
    // noise sigma 0.02 over ~1500 pixels per class: mean sigma ~ 5e-4
    CHECK(diff < 5e-3);
}

TEST_CASE("synthetic generation is deterministic and masks are rectangles") {
    SynthSpec spec;
    spec.num_cubes = 6;
    spec.height = 12;
    spec.width = 12;
    spec.bands = 16;
    spec.seed = 31;
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].cube.data == b[i].cube.data);
        CHECK(a[i].mask.mask == b[i].mask.mask);
    }

    for (const SynthCube& sc : a) {
        std::size_t count = 0;
        std::size_t y_min = spec.height, y_max = 0, x_min = spec.width, x_max = 0;
        for (std::size_t y = 0; y < spec.height; ++y) {
            for (std::size_t x = 0; x < spec.width; ++x) {
                if (!sc.mask.lesion_at(y, x)) continue;
                ++count;
                y_min = std::min(y_min, y);
                y_max = std::max(y_max, y);
                x_min = std::min(x_min, x);
                x_max = std::max(x_max, x);
            }
        }
        if (sc.label == ClassLabel::healthy) {
            CHECK(count == 0);
        } else {
            REQUIRE(count > 0);
            CHECK(count == (y_max - y_min + 1) * (x_max - x_min + 1));  // contiguous rectangle
            const double fraction =
                static_cast<double>(count) / static_cast<double>(spec.height * spec.width);
            CHECK(fraction > spec.lesion_fraction - 0.1);
            CHECK(fraction < spec.lesion_fraction + 0.1);
        }
    }
}

TEST_CASE("infeasible synthetic specs error out") {
    SynthSpec spec;
    spec.bands = 24;
    spec.signal_amplitude = 0.8;  // would clip at the planted band
    CHECK_THROWS_AS(generate_synthetic(spec), ValueError);

    SynthSpec bad_band;
    bad_band.bands = 24;
    bad_band.planted_band = 25;
    CHECK_THROWS_AS(generate_synthetic(bad_band), ValueError);

    SynthSpec bad_fraction;
    bad_fraction.lesion_fraction = 0.0;
    CHECK_THROWS_AS(generate_synthetic(bad_fraction), ValueError);
}

TEST_CASE("dataset directory round-trip") {
    testutil::TempDir dir("dataset");
    SynthSpec spec;
    spec.num_cubes = 6;
    spec.height = 16;
    spec.width = 16;
    spec.bands = 20;
    spec.seed = 13;
    const auto cubes = generate_synthetic(spec);
    write_dataset(cubes, dir.path);

    const auto entries = read_labels_csv(dir.path);
    REQUIRE(entries.size() == cubes.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        CHECK(entries[i].cube_id == cubes[i].id);
        CHECK(entries[i].label == cubes[i].label);
        const HyperCube back = read_cube(dir.path / entries[i].relpath);
        CHECK(back.data == cubes[i].cube.data);
    }

    const auto mask = testutil::parse_pgm(dir.path / "masks" / (cubes[0].id + "_mask.pgm"));
    CHECK(mask.width == spec.width);
    CHECK(mask.height == spec.height);
    CHECK(mask.maxval == 255);
    CHECK(mask.pixels == cubes[0].mask.mask);

    const LoadedDataset loaded = load_patches(dir.path, {8, 8}, {8, 8});
    CHECK(loaded.patches.size() == cubes.size() * 4);
    CHECK(loaded.bands == spec.bands);
    for (const LabeledPatch& p : loaded.patches) {
        for (Real v : p.patch.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("split_dataset splits by cube with deterministic shuffling") {
    std::vector<LabeledPatch> patches;
    for (int cube = 0; cube < 10; ++cube) {
        for (int p = 0; p < 4; ++p) {
            LabeledPatch patch;
            patch.patch = Tensor::zeros(Shape{1, 2, 2, 2});
            patch.label = cube % 2 ? ClassLabel::infected : ClassLabel::healthy;
            patch.source_id = "cube_" + std::to_string(cube);
            patch.origin = {0, static_cast<std::size_t>(p)};
            patches.push_back(patch);
        }
    }

    const DatasetSplit split = split_dataset(patches, {0.6, 0.2, 0.2}, 5);
    auto cube_ids = [](const std::vector<LabeledPatch>& set) {
        std::set<std::string> ids;
        for (const LabeledPatch& p : set) ids.insert(p.source_id);
        return ids;
    };
    const auto train_ids = cube_ids(split.train);
    const auto val_ids = cube_ids(split.val);
    const auto test_ids = cube_ids(split.test);
    CHECK(train_ids.size() == 6);
    CHECK(val_ids.size() == 2);
    CHECK(test_ids.size() == 2);
    CHECK(split.train.size() == 24);
    CHECK(split.val.size() == 8);
    CHECK(split.test.size() == 8);

    std::set<std::string> all;
    all.insert(train_ids.begin(), train_ids.end());
    all.insert(val_ids.begin(), val_ids.end());
    all.insert(test_ids.begin(), test_ids.end());
    CHECK(all.size() == 10);  // disjoint and covering

    const DatasetSplit again = split_dataset(patches, {0.6, 0.2, 0.2}, 5);
    CHECK(cube_ids(again.train) == train_ids);
    CHECK(cube_ids(again.test) == test_ids);

    CHECK_THROWS_AS(split_dataset(patches, {0.5, 0.5, 0.0}, 1), ValueError);
    CHECK_THROWS_AS(split_dataset(patches, {0.7, 0.2, 0.2}, 1), ValueError);

    std::vector<LabeledPatch> two(patches.begin(), patches.begin() + 8);
    CHECK_THROWS_AS(split_dataset(two, {0.6, 0.2, 0.2}, 1), ValueError);
}

TEST_CASE("class weights from counts") {
    const auto paper = class_weights_from_counts(940, 150);
    CHECK(paper[0] == 1.0);
    CHECK(std::abs(paper[1] - reference::kLossRatioInfected) < 0.01);

    const auto balanced = class_weights_from_counts(100, 100);
    CHECK(balanced[0] == 1.0);
    CHECK(balanced[1] == 1.0);

    CHECK_THROWS_AS(class_weights_from_counts(0, 10), ValueError);
    CHECK_THROWS_AS(class_weights_from_counts(10, 0), ValueError);
}

TEST_CASE("reference dataset constants stay documented") {
    CHECK(reference::kTrainImages == reference::kTrainHealthy + reference::kTrainInfected);
    CHECK(reference::kTrainImages == 1090);
    CHECK(reference::kValImages == 194);
    CHECK(reference::kTestImages == 539);
}
