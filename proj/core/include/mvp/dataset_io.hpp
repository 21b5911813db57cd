#pragma once

#include <string>
#include <vector>

#include "mvp/scene.hpp"

namespace mvp {

// Scene container file, magic "MVPD". Little-endian throughout; every scene
// record carries a CRC32 so corruption is detected on read. Exact byte
// layout is documented in docs/file_formats.md. Round trips are lossless:
// poses and cameras are stored as f64, features as f32 (scene generation
// already quantizes feature values to binary32).
inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(const std::vector<Scene>& scenes, const std::string& path);

// Throws IoError on bad magic, unsupported version, truncation, or checksum
// mismatch.
std::vector<Scene> read_dataset(const std::string& path);

}  // namespace mvp
