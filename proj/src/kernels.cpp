#include "scope/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#else
#include <thread>
#endif

#include "scope/core.hpp"

namespace scope::kernels {

int max_threads() {
    static const int cap = [] {
        int hw = 1;
#ifdef _OPENMP
        hw = omp_get_max_threads();
#else
        hw = static_cast<int>(std::thread::hardware_concurrency());
#endif
        if (hw < 1) hw = 1;
        if (const char* env = std::getenv("SCOPE_THREADS")) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end != env && *end == '\0' && v >= 1 && v < hw) hw = static_cast<int>(v);
        }
        return hw;
    }();
    return cap;
}

namespace {

// Exceptions must not cross an OpenMP region; workers record the first
// failure here and the caller raises after the join.
class DeferredError {
public:
    void record(Errc code) {
        int expected = -1;
        code_.compare_exchange_strong(expected, static_cast<int>(code));
    }
    void raise_if_set(const char* what) const {
        const int c = code_.load();
        if (c >= 0) raise(static_cast<Errc>(c), what);
    }

private:
    std::atomic<int> code_{-1};
};

} // namespace

std::vector<std::int32_t> predict_rows(const float* embedding, std::size_t m,
                                       const float* rows, std::size_t c, std::size_t d) {
    if (c == 0) raise(Errc::empty_classifier, "predict_rows: no classifier rows");
    std::vector<std::int32_t> out(m);
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (long long i = 0; i < static_cast<long long>(m); ++i) {
        const float* point = embedding + static_cast<std::size_t>(i) * d;
        std::size_t best = 0;
        double best_score = 0.0;
        for (std::size_t r = 0; r < c; ++r) {
            const float* row = rows + r * d;
            double score = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                score += static_cast<double>(point[j]) * static_cast<double>(row[j]);
            if (r == 0 || score > best_score) {
                best = r;
                best_score = score;
            }
        }
        out[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(best);
    }
    return out;
}

std::vector<float> cosine_scan(std::span<const float> query,
                               const std::vector<Prototype>& bank,
                               double norm_epsilon) {
    const double nq = l2_norm(query);
    if (nq < norm_epsilon) raise(Errc::degenerate_vector, "cosine_scan: near-zero query");

    std::vector<float> scores(bank.size());
    DeferredError err;
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (long long b = 0; b < static_cast<long long>(bank.size()); ++b) {
        const std::vector<float>& entry = bank[static_cast<std::size_t>(b)].values;
        if (entry.size() != query.size()) {
            err.record(Errc::dim_mismatch);
            continue;
        }
        double acc = 0.0;
        double sq = 0.0;
        for (std::size_t j = 0; j < entry.size(); ++j) {
            acc += static_cast<double>(query[j]) * static_cast<double>(entry[j]);
            sq += static_cast<double>(entry[j]) * static_cast<double>(entry[j]);
        }
        const double nb = std::sqrt(sq);
        if (nb < norm_epsilon) {
            err.record(Errc::degenerate_vector);
            continue;
        }
        const double value = acc / (nq * nb);
        scores[static_cast<std::size_t>(b)] = static_cast<float>(std::clamp(value, -1.0, 1.0));
    }
    err.raise_if_set("cosine_scan: bad bank entry");
    return scores;
}

std::vector<std::vector<float>> pool_masks(const EmbeddingMatrix& features,
                                           const std::vector<InstanceMask>& masks) {
    std::vector<std::vector<float>> out(masks.size());
    DeferredError err;
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (long long q = 0; q < static_cast<long long>(masks.size()); ++q) {
        const InstanceMask& mask = masks[static_cast<std::size_t>(q)];
        if (mask.selection.size() != features.point_count) {
            err.record(Errc::dim_mismatch);
            continue;
        }
        const std::size_t selected = mask.selection.count();
        if (selected == 0) {
            err.record(Errc::empty_mask);
            continue;
        }
        const std::size_t d = features.dim;
        std::vector<double> acc(d, 0.0);
        for (std::size_t i = 0; i < features.point_count; ++i) {
            if (!mask.selection.test(i)) continue;
            const float* row = features.data.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) acc[j] += static_cast<double>(row[j]);
        }
        std::vector<float>& mean = out[static_cast<std::size_t>(q)];
        mean.resize(d);
        const double inv = 1.0 / static_cast<double>(selected);
        for (std::size_t j = 0; j < d; ++j) mean[j] = static_cast<float>(acc[j] * inv);
    }
    err.raise_if_set("pool_masks: bad mask");
    return out;
}

void tally_confusion(const std::int32_t* gt_idx, const std::int32_t* pred_idx,
                     std::size_t m, std::size_t c,
                     std::uint64_t* counts, std::uint64_t& ignored) {
#ifdef _OPENMP
    const int nt = max_threads();
    std::vector<std::vector<std::uint64_t>> locals(
        static_cast<std::size_t>(nt), std::vector<std::uint64_t>(c * c, 0));
    std::vector<std::uint64_t> local_ignored(static_cast<std::size_t>(nt), 0);
#pragma omp parallel num_threads(nt)
    {
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
        std::uint64_t* local = locals[tid].data();
#pragma omp for schedule(static)
        for (long long i = 0; i < static_cast<long long>(m); ++i) {
            const std::int32_t g = gt_idx[i];
            if (g < 0)
                ++local_ignored[tid];
            else
                ++local[static_cast<std::size_t>(g) * c + static_cast<std::size_t>(pred_idx[i])];
        }
    }
    // u64 sums are exact, so merge order cannot affect the totals.
    for (std::size_t t = 0; t < locals.size(); ++t) {
        for (std::size_t k = 0; k < c * c; ++k) counts[k] += locals[t][k];
        ignored += local_ignored[t];
    }
#else
    for (std::size_t i = 0; i < m; ++i) {
        const std::int32_t g = gt_idx[i];
        if (g < 0)
            ++ignored;
        else
            ++counts[static_cast<std::size_t>(g) * c + static_cast<std::size_t>(pred_idx[i])];
    }
#endif
}

} // namespace scope::kernels
