#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scope/types.hpp"

// Single-threaded reference implementations of the kernels in kernels.hpp.
// Kept deliberately plain; tests assert bitwise agreement with the parallel
// versions and the benchmark target compares their throughput.
namespace scope::serial {

std::vector<std::int32_t> predict_rows(const float* embedding, std::size_t m,
                                       const float* rows, std::size_t c, std::size_t d);

std::vector<float> cosine_scan(std::span<const float> query,
                               const std::vector<Prototype>& bank,
                               double norm_epsilon);

std::vector<std::vector<float>> pool_masks(const EmbeddingMatrix& features,
                                           const std::vector<InstanceMask>& masks);

void tally_confusion(const std::int32_t* gt_idx, const std::int32_t* pred_idx,
                     std::size_t m, std::size_t c,
                     std::uint64_t* counts, std::uint64_t& ignored);

} // namespace scope::serial
