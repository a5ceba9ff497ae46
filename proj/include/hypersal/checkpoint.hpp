#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "hypersal/io_util.hpp"
#include "hypersal/model.hpp"

namespace hypersal {

// Checkpoint format, all integers little-endian:
//   bytes 0..3   magic "HSM1"
//   u32          manifest entry count
//   per entry    u32 byte length, then that many UTF-8 bytes of
//                "<name> <dim0>x<dim1>x... <offset>", offset relative to the
//                start of the data section
//   u64          data section byte length
//   data         raw 32-bit little-endian floats, in manifest order
// The first entry, "input_shape", carries the model input shape and owns no
// data bytes. Loading validates every shape against that input shape.

namespace detail {

struct ManifestEntry {
    std::string name;
    Shape shape;
    std::uint64_t offset = 0;
};

inline std::string manifest_line(const std::string& name, const Shape& shape,
                                 std::uint64_t offset) {
    std::string dims;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) dims += "x";
        dims += std::to_string(shape[i]);
    }
    return name + " " + dims + " " + std::to_string(offset);
}

inline ManifestEntry parse_manifest_line(const std::string& line) {
    std::istringstream in(line);
    ManifestEntry entry;
    std::string dims;
    std::uint64_t offset = 0;
    if (!(in >> entry.name >> dims >> offset)) {
        throw IoError("checkpoint: malformed manifest entry '" + line + "'");
    }
    entry.offset = offset;
    std::size_t start = 0;
    while (start <= dims.size()) {
        const std::size_t end = dims.find('x', start);
        const std::string piece = dims.substr(start, end == std::string::npos ? end : end - start);
        entry.shape.push_back(static_cast<std::size_t>(std::stoull(piece)));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return entry;
}

}  // namespace detail

inline void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    const auto named = params.parameters();

    std::vector<detail::ManifestEntry> manifest;
    manifest.push_back({"input_shape", params.input_shape, 0});
    std::uint64_t offset = 0;
    for (const auto& [name, t] : named) {
        manifest.push_back({name, t.shape(), offset});
        offset += static_cast<std::uint64_t>(t.size()) * 4;
    }

    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), {'H', 'S', 'M', '1'});
    io::put_u32(bytes, static_cast<std::uint32_t>(manifest.size()));
    for (const auto& entry : manifest) {
        const std::string line = detail::manifest_line(entry.name, entry.shape, entry.offset);
        io::put_u32(bytes, static_cast<std::uint32_t>(line.size()));
        bytes.insert(bytes.end(), line.begin(), line.end());
    }
    io::put_u64(bytes, offset);
    for (const auto& [name, t] : named) {
        for (std::size_t i = 0; i < t.size(); ++i) io::put_f32(bytes, static_cast<float>(t[i]));
    }
    io::write_file(path, bytes);
}

/// Loads an HSM1 checkpoint, validating magic, sizes, finiteness, and the
/// layer shapes implied by the stored input shape.
inline ModelParams load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    io::ByteReader reader(bytes, "checkpoint " + path.filename().string());

    const std::uint8_t* magic = reader.take(4);
    if (!(magic[0] == 'H' && magic[1] == 'S' && magic[2] == 'M' && magic[3] == '1')) {
        throw BadMagicError("checkpoint " + path.filename().string() +
                            ": bad magic, expected HSM1");
    }

    const std::uint32_t count = reader.u32();
    std::vector<detail::ManifestEntry> manifest;
    manifest.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = reader.u32();
        const std::uint8_t* p = reader.take(len);
        manifest.push_back(detail::parse_manifest_line(std::string(p, p + len)));
    }
    const std::uint64_t data_len = reader.u64();
    if (reader.remaining() != data_len) {
        throw TruncatedFileError("checkpoint " + path.filename().string() + ": expected " +
                                 std::to_string(reader.pos() + data_len) + " bytes, file has " +
                                 std::to_string(bytes.size()));
    }

    if (manifest.empty() || manifest.front().name != "input_shape") {
        throw IoError("checkpoint: missing input_shape manifest entry");
    }
    const Shape input_shape = manifest.front().shape;
    ModelParams params = init_model(input_shape, 0);  // shapes only; values overwritten

    auto named = params.parameters();
    if (manifest.size() != named.size() + 1) {
        throw IoError("checkpoint: expected " + std::to_string(named.size()) +
                      " parameter entries, found " + std::to_string(manifest.size() - 1));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& entry = manifest[i + 1];
        auto& [name, tensor] = named[i];
        if (entry.name != name) {
            throw IoError("checkpoint: expected entry '" + name + "', found '" + entry.name + "'");
        }
        if (entry.shape != tensor.shape()) {
            throw ShapeError("checkpoint: entry '" + name + "' has shape " +
                             shape_str(entry.shape) + ", model built for " +
                             shape_str(tensor.shape()));
        }
        const std::uint64_t need = entry.offset + static_cast<std::uint64_t>(tensor.size()) * 4;
        if (need > data_len) {
            throw TruncatedFileError("checkpoint: entry '" + name + "' needs " +
                                     std::to_string(need) + " data bytes, section has " +
                                     std::to_string(data_len));
        }
    }

    const std::size_t data_start = reader.pos();
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& entry = manifest[i + 1];
        auto& [name, tensor] = named[i];
        io::ByteReader data(bytes, "checkpoint data");
        data.take(data_start + entry.offset);
        for (std::size_t j = 0; j < tensor.size(); ++j) {
            const float v = data.f32();
            if (!std::isfinite(v)) {
                throw NonFiniteError("checkpoint: non-finite value in '" + name + "'");
            }
            tensor[j] = static_cast<Real>(v);
        }
    }
    return params;
}

}  // namespace hypersal
