#pragma once

// Shared on-disk container for checkpoints and rollout replays:
//   u64 little-endian manifest length | manifest JSON bytes | float64 blob.
// The blob is raw little-endian doubles in manifest order.

#include <json.hpp>

#include <string>
#include <vector>

namespace glyphrl {

struct BlobFile {
    nlohmann::json manifest;
    std::vector<double> blob;
};

void write_blob_file(const std::string& path, const nlohmann::ordered_json& manifest,
                     const std::vector<double>& blob);

BlobFile read_blob_file(const std::string& path);

}  // namespace glyphrl
