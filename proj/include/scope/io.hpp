#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "scope/types.hpp"

// Bit-exact little-endian file formats:
//   SCNB  scenes      magic "SCNB", version u32=1, M u32, d0 u32,
//                     label_present u8, M*d0 float32, [M int32 labels]
//   MSKB  mask sets   magic "MSKB", version u32=1, M u32, Q u32, then Q of
//                     (confidence float32, ceil(M/8) bitset bytes LSB-first)
//   EMBB  embeddings  magic "EMBB", version u32=1, M u32, D u32, M*D float32
//   IPBB  bank        magic "IPBB", version u32=1, count u32, D u32, then
//                     count of (scene_id u32 length + UTF-8 bytes,
//                     mask_index u32, D float32)
// Writers go through a temp file plus rename, so a crash never leaves a
// half-written artifact; bitset padding bits are always written as zero.
namespace scope::io {

void save_scene(const PointCloudScene& scene, const std::filesystem::path& path);
PointCloudScene load_scene(const std::filesystem::path& path);

void save_masks(const std::vector<InstanceMask>& masks, std::size_t point_count,
                const std::filesystem::path& path);
std::vector<InstanceMask> load_masks(const std::filesystem::path& path,
                                     std::size_t expected_point_count);

void save_embedding(const EmbeddingMatrix& embedding, const std::filesystem::path& path);
EmbeddingMatrix load_embedding(const std::filesystem::path& path);

void save_bank(const PrototypeBank& bank, const std::filesystem::path& path);
PrototypeBank load_bank(const std::filesystem::path& path);

/// Splits the xy-plane into non-overlapping block_size_m squares anchored at
/// the scene minimum, samples exactly sample_count points per non-empty block
/// (without replacement when possible, with replacement otherwise), and
/// appends block-normalized XYZ columns (output d0 = input d0 + 3). Blocks
/// come out in row-major grid order.
std::vector<PointCloudScene> partition_scene(const PointCloudScene& raw, float block_size_m,
                                             int sample_count, std::uint64_t seed);

/// FNV-1a 64 over the raw file bytes; used for manifest checksums and
/// determinism checks.
std::uint64_t file_checksum(const std::filesystem::path& path);

/// Writes bytes through a sibling temp file and renames into place.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

} // namespace scope::io
