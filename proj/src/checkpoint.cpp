#include "glyphrl/blobfile.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace glyphrl {

static_assert(std::endian::native == std::endian::little,
              "blob files are little-endian and so must the host be");

void write_blob_file(const std::string& path, const nlohmann::ordered_json& manifest,
                     const std::vector<double>& blob) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const std::string text = manifest.dump();
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to " + path);
}

BlobFile read_blob_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open " + path);
    const std::streamsize size = in.tellg();
    in.seekg(0);

    std::uint64_t len = 0;
    if (size < static_cast<std::streamsize>(sizeof(len)))
        throw std::runtime_error(path + ": truncated header");
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (static_cast<std::uint64_t>(size) < sizeof(len) + len)
        throw std::runtime_error(path + ": truncated manifest");

    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));

    const std::uint64_t blob_bytes = static_cast<std::uint64_t>(size) - sizeof(len) - len;
    if (blob_bytes % sizeof(double) != 0)
        throw std::runtime_error(path + ": blob is not a whole number of doubles");

    BlobFile file;
    try {
        file.manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + ": bad manifest: " + e.what());
    }
    file.blob.resize(blob_bytes / sizeof(double));
    in.read(reinterpret_cast<char*>(file.blob.data()),
            static_cast<std::streamsize>(blob_bytes));
    if (!in) throw std::runtime_error(path + ": truncated blob");
    return file;
}

}  // namespace glyphrl
