#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hypersal/config.hpp"
#include "hypersal/cube.hpp"
#include "hypersal/dataset.hpp"
#include "hypersal/io_util.hpp"
#include "hypersal/pgm.hpp"
#include "hypersal/synth.hpp"

namespace hypersal {

// Dataset directory layout, shared by every command:
//   <dir>/labels.csv             cube_id,path,label,lesion_length_mm
//   <dir>/cubes/<id>.hsc         HSC1 cubes
//   <dir>/masks/<id>_mask.pgm    lesion ground truth (gen-synth only)

struct DatasetEntry {
    std::string cube_id;
    std::string relpath;
    ClassLabel label = ClassLabel::healthy;
};

inline std::vector<DatasetEntry> read_labels_csv(const std::filesystem::path& dir) {
    const auto path = dir / "labels.csv";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::vector<DatasetEntry> entries;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    if (line.rfind("cube_id,path,label", 0) != 0) {
        throw IoError(path.string() + ": unexpected header '" + line + "'");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        DatasetEntry entry;
        std::string label, rest;
        if (!std::getline(row, entry.cube_id, ',') || !std::getline(row, entry.relpath, ',') ||
            !std::getline(row, label, ',')) {
            throw IoError(path.string() + ": malformed row '" + line + "'");
        }
        entry.label = parse_class_label(label);
        entries.push_back(std::move(entry));
    }
    if (entries.empty()) throw IoError(path.string() + ": no dataset rows");
    return entries;
}

/// Materializes a generated dataset: cubes, lesion masks, and the labels
/// manifest. The lesion_length_mm column is informational (lesion rectangle
/// height; empty for healthy cubes).
inline void write_dataset(const std::vector<SynthCube>& cubes,
                          const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "cubes");
    fs::create_directories(dir / "masks");

    std::string manifest = "cube_id,path,label,lesion_length_mm\n";
    for (const SynthCube& sc : cubes) {
        const std::string relpath = "cubes/" + sc.id + ".hsc";
        write_cube(sc.cube, dir / relpath);
        write_pgm_bytes(sc.mask.mask, sc.mask.width, sc.mask.height,
                        dir / "masks" / (sc.id + "_mask.pgm"));
        std::size_t lesion_rows = 0;
        if (sc.label == ClassLabel::infected) {
            for (std::size_t y = 0; y < sc.mask.height; ++y) {
                for (std::size_t x = 0; x < sc.mask.width; ++x) {
                    if (sc.mask.lesion_at(y, x)) {
                        ++lesion_rows;
                        break;
                    }
                }
            }
        }
        manifest += sc.id + "," + relpath + "," + to_string(sc.label) + ",";
        if (sc.label == ClassLabel::infected) manifest += std::to_string(lesion_rows);
        manifest += "\n";
    }
    io::write_text_file(dir / "labels.csv", manifest);
}

struct LoadedDataset {
    std::vector<LabeledPatch> patches;
    std::size_t bands = 0;
    double lambda_min_nm = 383.0;
    double lambda_max_nm = 1032.0;
};

/// Reads every cube listed in the manifest, min-max normalizes it, and tiles
/// it into labeled patches.
inline LoadedDataset load_patches(const std::filesystem::path& dir,
                                  std::array<std::size_t, 2> patch,
                                  std::array<std::size_t, 2> stride) {
    LoadedDataset out;
    for (const DatasetEntry& entry : read_labels_csv(dir)) {
        const HyperCube cube = normalize(read_cube(dir / entry.relpath));
        if (out.bands == 0) {
            out.bands = cube.bands;
            out.lambda_min_nm = cube.lambda_min_nm;
            out.lambda_max_nm = cube.lambda_max_nm;
        } else if (cube.bands != out.bands) {
            throw ShapeError("load_patches: cube '" + entry.cube_id + "' has " +
                             std::to_string(cube.bands) + " bands, dataset has " +
                             std::to_string(out.bands));
        }
        for (CubePatch& cp : extract_patches(cube, patch[0], patch[1], stride[0], stride[1])) {
            out.patches.push_back(
                {std::move(cp.patch), entry.label, entry.cube_id, cp.origin});
        }
    }
    return out;
}

}  // namespace hypersal
