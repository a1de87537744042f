#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scope/types.hpp"

// OpenMP-parallel hot loops. Each kernel writes only per-iteration-independent
// outputs, so results are bitwise identical for any thread count, including
// the serial twins in scope::serial (see serial.hpp) used as test references.
namespace scope::kernels {

/// Worker cap: min(SCOPE_THREADS, hardware concurrency), at least 1.
int max_threads();

/// Per-point argmax over raw dot products against C classifier rows.
/// Returns row indices (not class ids); ties go to the lowest row index.
std::vector<std::int32_t> predict_rows(const float* embedding, std::size_t m,
                                       const float* rows, std::size_t c, std::size_t d);

/// Cosine of the query against every bank entry, in bank order.
std::vector<float> cosine_scan(std::span<const float> query,
                               const std::vector<Prototype>& bank,
                               double norm_epsilon);

/// masked_mean value vectors for a batch of masks, in mask order.
std::vector<std::vector<float>> pool_masks(const EmbeddingMatrix& features,
                                           const std::vector<InstanceMask>& masks);

/// Confusion tally over index-mapped labels: counts is a c x c row-major
/// (gt, pred) matrix incremented in place; gt index -1 increments ignored.
/// Inputs must already be validated (pred in [0,c), gt in [-1,c)).
void tally_confusion(const std::int32_t* gt_idx, const std::int32_t* pred_idx,
                     std::size_t m, std::size_t c,
                     std::uint64_t* counts, std::uint64_t& ignored);

} // namespace scope::kernels
