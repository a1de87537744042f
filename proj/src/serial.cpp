#include "scope/serial.hpp"

#include "scope/core.hpp"

namespace scope::serial {

std::vector<std::int32_t> predict_rows(const float* embedding, std::size_t m,
                                       const float* rows, std::size_t c, std::size_t d) {
    if (c == 0) raise(Errc::empty_classifier, "predict_rows: no classifier rows");
    std::vector<std::int32_t> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::span<const float> point(embedding + i * d, d);
        std::size_t best = 0;
        double best_score = 0.0;
        for (std::size_t r = 0; r < c; ++r) {
            const double score = dot(point, std::span<const float>(rows + r * d, d));
            if (r == 0 || score > best_score) {
                best = r;
                best_score = score;
            }
        }
        out[i] = static_cast<std::int32_t>(best);
    }
    return out;
}

std::vector<float> cosine_scan(std::span<const float> query,
                               const std::vector<Prototype>& bank,
                               double norm_epsilon) {
    if (l2_norm(query) < norm_epsilon)
        raise(Errc::degenerate_vector, "cosine_scan: near-zero query");
    std::vector<float> scores(bank.size());
    for (std::size_t b = 0; b < bank.size(); ++b)
        scores[b] = cosine(query, bank[b].values, norm_epsilon);
    return scores;
}

std::vector<std::vector<float>> pool_masks(const EmbeddingMatrix& features,
                                           const std::vector<InstanceMask>& masks) {
    std::vector<std::vector<float>> out;
    out.reserve(masks.size());
    for (const InstanceMask& mask : masks)
        out.push_back(masked_mean(features, mask).values);
    return out;
}

void tally_confusion(const std::int32_t* gt_idx, const std::int32_t* pred_idx,
                     std::size_t m, std::size_t c,
                     std::uint64_t* counts, std::uint64_t& ignored) {
    for (std::size_t i = 0; i < m; ++i) {
        const std::int32_t g = gt_idx[i];
        if (g < 0)
            ++ignored;
        else
            ++counts[static_cast<std::size_t>(g) * c + static_cast<std::size_t>(pred_idx[i])];
    }
}

} // namespace scope::serial
