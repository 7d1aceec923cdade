#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hmr/tensor.hpp"

namespace hmr {

// One binary envelope for checkpoints and datasets: 4-byte magic, u32 format
// version, a JSON manifest, then named f64 tensors. All integers and doubles
// are raw little-endian; the writer assumes a little-endian host.
struct ContainerEntry {
    std::string name;
    Tensor tensor;
};

struct Container {
    std::array<char, 4> magic{};
    uint32_t version = 0;
    std::string manifest_json;
    std::vector<ContainerEntry> entries;
};

void write_container(const std::string& path, const Container& c);

// Throws IoError on missing file, magic mismatch, or truncated payload.
Container read_container(const std::string& path, const std::array<char, 4>& expected_magic);

// FNV-1a, 64 bit. Used for content hashes in reports (timestamps excluded by
// hashing the payload, never file metadata).
uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a(const std::string& s);
uint64_t file_fnv1a(const std::string& path);

inline constexpr std::array<char, 4> kCheckpointMagic{'H', 'M', 'R', 'W'};
inline constexpr std::array<char, 4> kDatasetMagic{'H', 'M', 'R', 'D'};

}  // namespace hmr
