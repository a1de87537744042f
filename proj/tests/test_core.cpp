#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "scope/core.hpp"
#include "scope/det_rng.hpp"
#include "scope/kernels.hpp"
#include "scope/serial.hpp"

using namespace scope;

namespace {

template <typename Fn>
void expect_error(Errc code, Fn&& fn) {
    try {
        fn();
        FAIL_CHECK("expected an error, got none");
    } catch (const Error& e) {
        CHECK(e.code() == code);
    }
}

EmbeddingMatrix make_embedding(std::size_t m, std::size_t d, std::vector<float> data) {
    EmbeddingMatrix emb;
    emb.scene_id = "t";
    emb.point_count = m;
    emb.dim = d;
    emb.data = std::move(data);
    return emb;
}

InstanceMask mask_of(std::size_t m, std::initializer_list<std::size_t> bits) {
    InstanceMask mask;
    mask.selection = Bitset(m);
    for (std::size_t i : bits) mask.selection.set(i);
    mask.confidence = 0.9f;
    return mask;
}

} // namespace

TEST_CASE("masked_mean averages exactly the selected rows") {
    const EmbeddingMatrix emb = make_embedding(2, 2, {1, 1, 3, 3});
    const Prototype p = masked_mean(emb, mask_of(2, {0, 1}));
    CHECK(p.values == std::vector<float>{2.0f, 2.0f});

    const EmbeddingMatrix emb3 = make_embedding(3, 2, {1, 0, 3, 0, 5, 0});
    const Prototype skip = masked_mean(emb3, mask_of(3, {0, 2}));
    CHECK(skip.values == std::vector<float>{3.0f, 0.0f});

    const Prototype single = masked_mean(emb3, mask_of(3, {1}));
    CHECK(single.values == std::vector<float>{3.0f, 0.0f});
}

TEST_CASE("masked_mean rejects empty and mismatched masks") {
    const EmbeddingMatrix emb = make_embedding(2, 2, {1, 1, 3, 3});
    expect_error(Errc::empty_mask, [&] { masked_mean(emb, mask_of(2, {})); });
    expect_error(Errc::dim_mismatch, [&] { masked_mean(emb, mask_of(5, {0})); });
}

TEST_CASE("cosine matches hand-computed values") {
    const std::vector<float> x{1, 0};
    const std::vector<float> diag{1, 1};
    CHECK(cosine(x, diag) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-4));
    CHECK(cosine(x, x) == doctest::Approx(1.0));
    CHECK(cosine(x, std::vector<float>{0, 1}) == doctest::Approx(0.0));

    const std::vector<float> scaled{7, 7};
    CHECK(cosine(x, scaled) == doctest::Approx(cosine(x, diag)).epsilon(1e-6));

    CHECK(cosine(x, std::vector<float>{-1, 0}) >= -1.0f);
    expect_error(Errc::degenerate_vector,
                 [&] { cosine(x, std::vector<float>{0, 0}); });
    expect_error(Errc::dim_mismatch, [&] { cosine(x, std::vector<float>{1, 0, 0}); });
}

TEST_CASE("attention_weights is a scaled-dot softmax") {
    const std::vector<float> q{1, 0, 0, 0};
    const std::vector<std::vector<float>> keys{{1, 0, 0, 0}, {0, 1, 0, 0}};
    const std::vector<float> w = attention_weights(q, keys, 4);
    REQUIRE(w.size() == 2);
    // logits 1/sqrt(4) and 0 -> softmax(0.5, 0)
    const double e = std::exp(0.5);
    CHECK(w[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-4));
    CHECK(w[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-4));
    CHECK(static_cast<double>(w[0]) + w[1] == doctest::Approx(1.0).epsilon(1e-6));

    const std::vector<float> lone = attention_weights(q, {{0, 1, 0, 0}}, 4);
    REQUIRE(lone.size() == 1);
    CHECK(lone[0] == 1.0f);

    // equal logits split the mass exactly
    const std::vector<float> even =
        attention_weights(std::vector<float>{1, 1, 0, 0}, keys, 4);
    CHECK(even[0] == 0.5f);
    CHECK(even[1] == 0.5f);

    expect_error(Errc::empty_context, [&] { attention_weights(q, {}, 4); });
    expect_error(Errc::dim_mismatch,
                 [&] { attention_weights(q, {{1, 0}}, 4); });
}

TEST_CASE("l2_normalize returns a unit vector") {
    const std::vector<float> v{3, 4};
    const std::vector<float> n = l2_normalize(v);
    CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(l2_norm(n) == doctest::Approx(1.0).epsilon(1e-6));

    const std::vector<float> again = l2_normalize(n);
    CHECK(again[0] == doctest::Approx(n[0]).epsilon(1e-6));

    expect_error(Errc::degenerate_vector, [&] { l2_normalize(std::vector<float>{0, 0}); });
}

TEST_CASE("dot accumulates in declared order and checks dims") {
    CHECK(dot(std::vector<float>{1, 2, 3}, std::vector<float>{4, 5, 6}) == 32.0);
    expect_error(Errc::dim_mismatch,
                 [&] { dot(std::vector<float>{1}, std::vector<float>{1, 2}); });
}

TEST_CASE("parallel kernels match the serial reference bitwise") {
    rng::Stream stream(rng::mix(3, rng::kGolden));
    const std::size_t m = 257, d = 7, c = 5;
    std::vector<float> emb_data(m * d), rows(c * d);
    for (float& v : emb_data) v = static_cast<float>(stream.next_normal());
    for (float& v : rows) v = static_cast<float>(stream.next_normal());
    const EmbeddingMatrix emb = make_embedding(m, d, emb_data);

    CHECK(kernels::max_threads() >= 1);

    SUBCASE("predict_rows") {
        const auto a = kernels::predict_rows(emb_data.data(), m, rows.data(), c, d);
        const auto b = serial::predict_rows(emb_data.data(), m, rows.data(), c, d);
        CHECK(a == b);
    }

    SUBCASE("cosine_scan") {
        PrototypeBank bank(d);
        for (std::size_t i = 0; i < 64; ++i) {
            Prototype p;
            p.values.resize(d);
            for (float& v : p.values) v = static_cast<float>(stream.next_normal());
            p.provenance = BankProvenance{"b", static_cast<std::uint32_t>(i)};
            bank.append(std::move(p));
        }
        bank.freeze();
        const std::vector<float> q(emb_data.begin(), emb_data.begin() + d);
        const auto a = kernels::cosine_scan(q, bank.prototypes(), kDefaultNormEpsilon);
        const auto b = serial::cosine_scan(q, bank.prototypes(), kDefaultNormEpsilon);
        REQUIRE(a.size() == b.size());
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
    }

    SUBCASE("pool_masks") {
        std::vector<InstanceMask> masks;
        for (std::size_t q = 0; q < 9; ++q) {
            InstanceMask mask;
            mask.selection = Bitset(m);
            for (std::size_t i = q; i < m; i += 9) mask.selection.set(i);
            masks.push_back(std::move(mask));
        }
        const auto a = kernels::pool_masks(emb, masks);
        const auto b = serial::pool_masks(emb, masks);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].size() == b[i].size());
            CHECK(std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(float)) == 0);
        }
    }

    SUBCASE("tally_confusion") {
        std::vector<std::int32_t> gt(m), pred(m);
        for (std::size_t i = 0; i < m; ++i) {
            gt[i] = static_cast<std::int32_t>(stream.next_below(c + 1)) - 1;
            pred[i] = static_cast<std::int32_t>(stream.next_below(c));
        }
        std::vector<std::uint64_t> a(c * c, 0), b(c * c, 0);
        std::uint64_t ia = 0, ib = 0;
        kernels::tally_confusion(gt.data(), pred.data(), m, c, a.data(), ia);
        serial::tally_confusion(gt.data(), pred.data(), m, c, b.data(), ib);
        CHECK(a == b);
        CHECK(ia == ib);
    }
}

TEST_CASE("deterministic rng streams replay exactly") {
    rng::Stream a(rng::mix(11, rng::fnv1a("stream")));
    rng::Stream b(rng::mix(11, rng::fnv1a("stream")));
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
        const double u = a.next_unit();
        CHECK(u == b.next_unit());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    rng::Stream c(rng::mix(12, rng::fnv1a("stream")));
    CHECK(a.next_u64() != c.next_u64());

    rng::Stream n(7);
    double sum = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) sum += n.next_normal();
    CHECK(std::abs(sum / draws) < 4.5 / std::sqrt(static_cast<double>(draws)));
}
