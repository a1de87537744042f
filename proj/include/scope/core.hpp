#pragma once

#include <span>
#include <vector>

#include "scope/types.hpp"

namespace scope {

inline constexpr double kDefaultNormEpsilon = 1e-12;

// All reductions accumulate in 64-bit floats in ascending index order, so
// results are bitwise-reproducible for a fixed binary.
double dot(std::span<const float> a, std::span<const float> b);
double l2_norm(std::span<const float> v);

/// Arithmetic mean of the feature rows whose mask bit is set.
/// Provenance is default-initialized; callers tag it.
Prototype masked_mean(const EmbeddingMatrix& features, const InstanceMask& mask);

/// a·b / (‖a‖‖b‖), clamped to [-1, 1].
float cosine(std::span<const float> a, std::span<const float> b,
             double norm_epsilon = kDefaultNormEpsilon);

/// softmax over r of (query·key_r / sqrt(dim)), with max-subtraction
/// stabilization. Query and keys must already be l2-normalized.
std::vector<float> attention_weights(std::span<const float> query,
                                     const std::vector<std::vector<float>>& keys,
                                     std::size_t dim);

std::vector<float> l2_normalize(std::span<const float> v,
                                double norm_epsilon = kDefaultNormEpsilon);

} // namespace scope
