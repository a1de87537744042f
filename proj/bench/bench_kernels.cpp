#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "scope/core.hpp"
#include "scope/det_rng.hpp"
#include "scope/kernels.hpp"
#include "scope/serial.hpp"
#include "scope/types.hpp"

// Times each OpenMP kernel against its serial twin on identical inputs and
// checks the outputs stay bitwise equal. --quick shrinks the sizes so the
// binary doubles as a fast regression test.
namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    fn(); // warm-up, also materializes lazily-allocated buffers
    const auto start = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const std::chrono::duration<double, std::milli> elapsed = Clock::now() - start;
    return elapsed.count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
    std::printf("%-16s serial %9.3f ms   parallel %9.3f ms   x%.2f   %s\n", name,
                serial_ms, parallel_ms, parallel_ms > 0 ? serial_ms / parallel_ms : 0.0,
                equal ? "bitwise-equal" : "MISMATCH");
}

std::vector<float> random_block(scope::rng::Stream& stream, std::size_t n) {
    std::vector<float> out(n);
    for (float& v : out) v = static_cast<float>(stream.next_normal());
    return out;
}

} // namespace

int main(int argc, char** argv) {
    bool quick = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--quick") == 0) quick = true;

    const std::size_t m = quick ? 2048 : 262144; // points
    const std::size_t d = quick ? 16 : 64;       // embedding dim
    const std::size_t c = quick ? 8 : 24;        // classifier rows
    const std::size_t bank_n = quick ? 256 : 8192;
    const std::size_t mask_q = quick ? 16 : 128;
    const int reps = quick ? 2 : 5;

    scope::rng::Stream stream(scope::rng::mix(7, scope::rng::kGolden));
    bool all_equal = true;

    scope::EmbeddingMatrix emb;
    emb.scene_id = "bench";
    emb.point_count = m;
    emb.dim = d;
    emb.data = random_block(stream, m * d);

    std::printf("points=%zu dim=%zu rows=%zu bank=%zu masks=%zu threads=%d\n", m, d, c,
                bank_n, mask_q, scope::kernels::max_threads());

    { // predict_rows
        const std::vector<float> rows = random_block(stream, c * d);
        std::vector<std::int32_t> serial_out, parallel_out;
        const double ts = time_ms(
            [&] { serial_out = scope::serial::predict_rows(emb.data.data(), m, rows.data(), c, d); },
            reps);
        const double tp = time_ms(
            [&] { parallel_out = scope::kernels::predict_rows(emb.data.data(), m, rows.data(), c, d); },
            reps);
        const bool equal = serial_out == parallel_out;
        all_equal = all_equal && equal;
        report("predict_rows", ts, tp, equal);
    }

    { // cosine_scan
        scope::PrototypeBank bank(d);
        for (std::size_t i = 0; i < bank_n; ++i) {
            scope::Prototype p;
            p.values = random_block(stream, d);
            p.provenance = scope::BankProvenance{"bench", static_cast<std::uint32_t>(i)};
            bank.append(std::move(p));
        }
        bank.freeze();
        const std::vector<float> query = random_block(stream, d);
        std::vector<float> serial_out, parallel_out;
        const double ts =
            time_ms([&] { serial_out = scope::serial::cosine_scan(query, bank.prototypes(), scope::kDefaultNormEpsilon); },
                    reps);
        const double tp =
            time_ms([&] { parallel_out = scope::kernels::cosine_scan(query, bank.prototypes(), scope::kDefaultNormEpsilon); },
                    reps);
        const bool equal = serial_out.size() == parallel_out.size() &&
                           std::memcmp(serial_out.data(), parallel_out.data(),
                                       serial_out.size() * sizeof(float)) == 0;
        all_equal = all_equal && equal;
        report("cosine_scan", ts, tp, equal);
    }

    { // pool_masks
        std::vector<scope::InstanceMask> masks;
        for (std::size_t q = 0; q < mask_q; ++q) {
            scope::InstanceMask mask;
            mask.selection = scope::Bitset(m);
            for (std::size_t i = q; i < m; i += mask_q) mask.selection.set(i);
            mask.confidence = 0.9f;
            mask.mask_index = static_cast<std::uint32_t>(q);
            masks.push_back(std::move(mask));
        }
        std::vector<std::vector<float>> serial_out, parallel_out;
        const double ts =
            time_ms([&] { serial_out = scope::serial::pool_masks(emb, masks); }, reps);
        const double tp =
            time_ms([&] { parallel_out = scope::kernels::pool_masks(emb, masks); }, reps);
        bool equal = serial_out.size() == parallel_out.size();
        for (std::size_t q = 0; equal && q < serial_out.size(); ++q)
            equal = serial_out[q].size() == parallel_out[q].size() &&
                    std::memcmp(serial_out[q].data(), parallel_out[q].data(),
                                serial_out[q].size() * sizeof(float)) == 0;
        all_equal = all_equal && equal;
        report("pool_masks", ts, tp, equal);
    }

    { // tally_confusion
        std::vector<std::int32_t> gt(m), pred(m);
        for (std::size_t i = 0; i < m; ++i) {
            gt[i] = static_cast<std::int32_t>(stream.next_below(c + 1)) - 1; // -1 = ignored
            pred[i] = static_cast<std::int32_t>(stream.next_below(c));
        }
        std::vector<std::uint64_t> serial_counts(c * c), parallel_counts(c * c);
        std::uint64_t serial_ignored = 0, parallel_ignored = 0;
        const double ts = time_ms(
            [&] {
                std::fill(serial_counts.begin(), serial_counts.end(), 0);
                serial_ignored = 0;
                scope::serial::tally_confusion(gt.data(), pred.data(), m, c,
                                               serial_counts.data(), serial_ignored);
            },
            reps);
        const double tp = time_ms(
            [&] {
                std::fill(parallel_counts.begin(), parallel_counts.end(), 0);
                parallel_ignored = 0;
                scope::kernels::tally_confusion(gt.data(), pred.data(), m, c,
                                                parallel_counts.data(), parallel_ignored);
            },
            reps);
        const bool equal =
            serial_counts == parallel_counts && serial_ignored == parallel_ignored;
        all_equal = all_equal && equal;
        report("tally_confusion", ts, tp, equal);
    }

    if (!all_equal) {
        std::fprintf(stderr, "kernel outputs diverged from the serial reference\n");
        return 1;
    }
    return 0;
}
