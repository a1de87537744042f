#include "scope/core.hpp"

#include <algorithm>
#include <cmath>

namespace scope {

double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) raise(Errc::dim_mismatch, "dot: vector lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

double l2_norm(std::span<const float> v) {
    double acc = 0.0;
    for (float x : v) acc += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(acc);
}

Prototype masked_mean(const EmbeddingMatrix& features, const InstanceMask& mask) {
    if (mask.selection.size() != features.point_count)
        raise(Errc::dim_mismatch, "masked_mean: mask length does not match point count");
    const std::size_t selected = mask.selection.count();
    if (selected == 0) raise(Errc::empty_mask, "masked_mean: no bit set");

    const std::size_t d = features.dim;
    std::vector<double> acc(d, 0.0);
    for (std::size_t i = 0; i < features.point_count; ++i) {
        if (!mask.selection.test(i)) continue;
        const float* row = features.data.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) acc[j] += static_cast<double>(row[j]);
    }

    Prototype out;
    out.values.resize(d);
    const double inv = 1.0 / static_cast<double>(selected);
    for (std::size_t j = 0; j < d; ++j) out.values[j] = static_cast<float>(acc[j] * inv);
    return out;
}

float cosine(std::span<const float> a, std::span<const float> b, double norm_epsilon) {
    if (a.size() != b.size()) raise(Errc::dim_mismatch, "cosine: vector lengths differ");
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na < norm_epsilon || nb < norm_epsilon)
        raise(Errc::degenerate_vector, "cosine: near-zero vector");
    const double value = dot(a, b) / (na * nb);
    return static_cast<float>(std::clamp(value, -1.0, 1.0));
}

std::vector<float> attention_weights(std::span<const float> query,
                                     const std::vector<std::vector<float>>& keys,
                                     std::size_t dim) {
    if (keys.empty()) raise(Errc::empty_context, "attention_weights: no keys");
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));

    std::vector<double> logits(keys.size());
    for (std::size_t r = 0; r < keys.size(); ++r) {
        if (keys[r].size() != query.size())
            raise(Errc::dim_mismatch, "attention_weights: key dim does not match query");
        logits[r] = dot(query, keys[r]) * scale;
    }

    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> expd(keys.size());
    double total = 0.0;
    for (std::size_t r = 0; r < keys.size(); ++r) {
        expd[r] = std::exp(logits[r] - peak);
        total += expd[r];
    }

    std::vector<float> weights(keys.size());
    for (std::size_t r = 0; r < keys.size(); ++r)
        weights[r] = static_cast<float>(expd[r] / total);
    return weights;
}

std::vector<float> l2_normalize(std::span<const float> v, double norm_epsilon) {
    const double n = l2_norm(v);
    if (n < norm_epsilon) raise(Errc::degenerate_vector, "l2_normalize: near-zero vector");
    std::vector<float> out(v.size());
    const double inv = 1.0 / n;
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = static_cast<float>(static_cast<double>(v[i]) * inv);
    return out;
}

} // namespace scope
