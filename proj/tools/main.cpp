// hypersal: synthetic hyperspectral data generation, 3D-CNN training,
// evaluation, and saliency-based wavelength sensitivity analysis.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hypersal/checkpoint.hpp"
#include "hypersal/config.hpp"
#include "hypersal/metrics.hpp"
#include "hypersal/parallel.hpp"
#include "hypersal/pipeline.hpp"
#include "hypersal/saliency.hpp"
#include "hypersal/train.hpp"

namespace fs = std::filesystem;
using namespace hypersal;

namespace {

int cmd_gen_synth(const std::string& config_path, const std::string& out_dir) {
    RunConfig cfg = load_config(config_path);
    cfg.synth.seed = cfg.seed;

    const auto cubes = generate_synthetic(cfg.synth);
    fs::create_directories(out_dir);
    write_dataset(cubes, out_dir);

    std::size_t healthy = 0, infected = 0;
    for (const SynthCube& c : cubes) (c.label == ClassLabel::healthy ? healthy : infected) += 1;
    std::cout << "wrote " << cubes.size() << " cubes to " << out_dir << "\n"
              << "healthy: " << healthy << "\n"
              << "infected: " << infected << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
    RunConfig cfg = load_config(config_path);

    const LoadedDataset data = load_patches(data_dir, cfg.patch, cfg.stride);
    const Shape expected{1, cfg.patch[0], cfg.patch[1], data.bands};
    if (cfg.input_shape != expected) {
        throw ConfigError("model.input_shape", "configured " + shape_str(cfg.input_shape) +
                                                   " but data yields " + shape_str(expected));
    }

    DatasetSplit split = split_dataset(data.patches, cfg.split, cfg.seed);
    if (cfg.class_weights_auto) {
        std::size_t healthy = 0, infected = 0;
        for (const LabeledPatch& p : split.train) {
            (p.label == ClassLabel::healthy ? healthy : infected) += 1;
        }
        cfg.train.class_weights = class_weights_from_counts(healthy, infected);
    }

    fs::create_directories(out_dir);
    const fs::path checkpoint_path = fs::path(out_dir) / "model.hsm";
    if (fs::exists(checkpoint_path)) {
        std::cerr << "warning: overwriting existing checkpoint " << checkpoint_path.string()
                  << "\n";
    }

    ModelParams params = init_model(cfg.input_shape, cfg.seed);
    const History history = train(params, split.train, split.val, cfg.train);

    save_checkpoint(params, checkpoint_path);
    write_history_csv(history, fs::path(out_dir) / "history.csv");

    std::string split_csv = "cube_id,split\n";
    auto append_split = [&split_csv](const std::vector<LabeledPatch>& set, const char* name) {
        std::string last;
        for (const LabeledPatch& p : set) {
            if (p.source_id == last) continue;
            last = p.source_id;
            split_csv += p.source_id + std::string(",") + name + "\n";
        }
    };
    append_split(split.train, "train");
    append_split(split.val, "val");
    append_split(split.test, "test");
    io::write_text_file(fs::path(out_dir) / "split.csv", split_csv);

    const EpochStats& final_epoch = history.back();
    std::cout << "trained " << history.size() << " epochs on " << split.train.size()
              << " patches\n";
    std::cout << "final train_loss=" << format_real(final_epoch.train_loss);
    if (final_epoch.val_loss) {
        std::cout << " val_loss=" << format_real(*final_epoch.val_loss)
                  << " val_accuracy=" << format_real(*final_epoch.val_accuracy);
    }
    std::cout << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             const std::string& out_dir) {
    const ModelParams params = load_checkpoint(checkpoint_path);
    const Shape& in = params.input_shape;

    const LoadedDataset data = load_patches(data_dir, {in[1], in[2]}, {in[1], in[2]});
    if (data.bands != in[3]) {
        throw ShapeError("eval: checkpoint expects " + std::to_string(in[3]) +
                         " bands, data has " + std::to_string(data.bands));
    }

    const EvalReport report = evaluate(params, data.patches);
    fs::create_directories(out_dir);
    write_eval_csv(report, fs::path(out_dir) / "eval.csv");

    std::cout << "accuracy,precision,recall,f1\n"
              << format_real(report.accuracy) << "," << format_real(report.precision) << ","
              << format_real(report.recall) << "," << format_real(report.f1) << "\n";
    return 0;
}

int cmd_saliency(const std::string& checkpoint_path, const std::string& data_dir,
                 const std::string& out_dir, const std::vector<std::size_t>& bands) {
    const ModelParams params = load_checkpoint(checkpoint_path);
    const Shape& in = params.input_shape;

    const LoadedDataset data = load_patches(data_dir, {in[1], in[2]}, {in[1], in[2]});
    if (data.bands != in[3]) {
        throw ShapeError("saliency: checkpoint expects " + std::to_string(in[3]) +
                         " bands, data has " + std::to_string(data.bands));
    }
    for (std::size_t band : bands) {
        if (band < 1 || band > data.bands) {
            throw ValueError("saliency: requested band " + std::to_string(band) + " outside [1," +
                             std::to_string(data.bands) + "]");
        }
    }

    const std::size_t n = data.patches.size();
    std::vector<SaliencyResult> results(n);
    parallel_for(n, [&](std::size_t i) {
        results[i] = saliency_map(params, data.patches[i].patch);
    });

    std::vector<BandSensitivityMap> maps;
    std::vector<ClassLabel> predicted;
    maps.reserve(n);
    predicted.reserve(n);
    for (const SaliencyResult& r : results) {
        maps.push_back(cstar_map(r));
        predicted.push_back(r.predicted_class);
    }
    const WavelengthHistogram hist =
        wavelength_histogram(maps, predicted, data.lambda_min_nm, data.lambda_max_nm);

    fs::create_directories(out_dir);
    write_histogram_csv(hist, fs::path(out_dir) / "histogram.csv");

    for (std::size_t i = 0; i < n; ++i) {
        const LabeledPatch& p = data.patches[i];
        const std::string stem = p.source_id + "_y" + std::to_string(p.origin.y) + "_x" +
                                 std::to_string(p.origin.x);
        const Shape& ms = results[i].magnitude.shape();
        export_pgm(composite_magnitude(results[i]), ms[1], ms[0],
                   fs::path(out_dir) / (stem + "_composite.pgm"));
        for (std::size_t band : bands) {
            const auto planes = band_slice_magnitude({&results[i], 1}, band);
            export_pgm(planes.front(), ms[1], ms[0],
                       fs::path(out_dir) / (stem + "_band" + std::to_string(band) + ".pgm"));
        }
    }

    // Top bands by share of most-sensitive pixels.
    std::vector<std::size_t> order(hist.bands);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&hist](std::size_t a, std::size_t b) {
        if (hist.fraction[a] != hist.fraction[b]) return hist.fraction[a] > hist.fraction[b];
        return a < b;
    });
    const std::size_t top = std::min<std::size_t>(5, hist.bands);
    for (std::size_t i = 0; i < top; ++i) {
        const std::size_t band = order[i] + 1;
        char line[128];
        std::snprintf(line, sizeof line, "band %zu (%.1f nm): %.1f%%", band,
                      wavelength_of(band, hist.lambda_min_nm, hist.lambda_max_nm, hist.bands),
                      100.0 * hist.fraction[order[i]]);
        std::cout << line << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D-CNN hyperspectral classification and wavelength saliency analysis"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, checkpoint_path;
    std::vector<std::size_t> bands;

    CLI::App* gen = app.add_subcommand("gen-synth", "generate a synthetic labeled dataset");
    gen->add_option("--config", config_path, "run configuration JSON")->required();
    gen->add_option("--out", out_dir, "output dataset directory")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset directory");
    train_cmd->add_option("--config", config_path, "run configuration JSON")->required();
    train_cmd->add_option("--data", data_dir, "dataset directory")->required();
    train_cmd->add_option("--out", out_dir, "run output directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset directory");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "HSM1 checkpoint")->required();
    eval_cmd->add_option("--data", data_dir, "dataset directory (treated as the test set)")
        ->required();
    eval_cmd->add_option("--out", out_dir, "report output directory")->required();

    CLI::App* sal = app.add_subcommand("saliency", "saliency maps and wavelength histogram");
    sal->add_option("--checkpoint", checkpoint_path, "HSM1 checkpoint")->required();
    sal->add_option("--data", data_dir, "dataset directory (treated as the test set)")
        ->required();
    sal->add_option("--out", out_dir, "output directory")->required();
    sal->add_option("--bands", bands, "1-based band indices for per-band exports")
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_synth(config_path, out_dir);
        if (train_cmd->parsed()) return cmd_train(config_path, data_dir, out_dir);
        if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, data_dir, out_dir);
        if (sal->parsed()) return cmd_saliency(checkpoint_path, data_dir, out_dir, bands);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
