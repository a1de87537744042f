#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "scope/context.hpp"
#include "scope/det_rng.hpp"

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

PointCloudScene background_scene(std::size_t m) {
    PointCloudScene scene;
    scene.scene_id = "bg";
    scene.point_count = m;
    scene.feature_dim = 3;
    scene.points.assign(m * 3, 0.0f);
    scene.labels.assign(m, kBackgroundLabel);
    return scene;
}

InstanceMask mask_of(std::size_t m, std::initializer_list<std::size_t> bits, float conf,
                     std::uint32_t index) {
    InstanceMask mask;
    mask.selection = Bitset(m);
    for (std::size_t i : bits) mask.selection.set(i);
    mask.confidence = conf;
    mask.mask_index = index;
    return mask;
}

} // namespace

TEST_CASE("filter keeps confident background masks in order") {
    const PointCloudScene scene = background_scene(4);
    const std::vector<InstanceMask> masks{
        mask_of(4, {0, 1}, 0.9f, 0),
        mask_of(4, {1, 2}, 0.6f, 1),
        mask_of(4, {2, 3}, 0.8f, 2),
    };
    context::FilterCriteria crit;
    crit.tau = 0.75;
    const auto kept = context::filter_masks(scene, masks, crit);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].mask_index == 0);
    CHECK(kept[1].mask_index == 2);
}

TEST_CASE("confidence exactly at tau is rejected") {
    const PointCloudScene scene = background_scene(4);
    const std::vector<InstanceMask> masks{mask_of(4, {0}, 0.75f, 0)};
    context::FilterCriteria crit;
    crit.tau = 0.75;
    CHECK(context::filter_masks(scene, masks, crit).empty());

    crit.tau = 0.7499;
    CHECK(context::filter_masks(scene, masks, crit).size() == 1);
}

TEST_CASE("background overlap gates masks that touch labelled points") {
    PointCloudScene scene = background_scene(4);
    scene.labels[0] = 2; // one labelled point
    const std::vector<InstanceMask> masks{mask_of(4, {0, 1, 2, 3}, 0.9f, 0)};

    context::FilterCriteria strict;
    strict.tau = 0.5;
    strict.bg_overlap = 1.0;
    CHECK(context::filter_masks(scene, masks, strict).empty());

    context::FilterCriteria loose = strict;
    loose.bg_overlap = 0.75; // 3 of 4 mask points are background
    CHECK(context::filter_masks(scene, masks, loose).size() == 1);

    context::FilterCriteria tight = strict;
    tight.bg_overlap = 0.76;
    CHECK(context::filter_masks(scene, masks, tight).empty());
}

TEST_CASE("empty masks are dropped unconditionally") {
    const PointCloudScene scene = background_scene(4);
    const std::vector<InstanceMask> masks{mask_of(4, {}, 1.0f, 0)};
    context::FilterCriteria crit;
    crit.tau = 0.0;
    CHECK(context::filter_masks(scene, masks, crit).empty());
}

TEST_CASE("filter validates mask length against the scene") {
    const PointCloudScene scene = background_scene(4);
    const std::vector<InstanceMask> masks{mask_of(8, {0}, 0.9f, 0)};
    expect_error(Errc::dim_mismatch,
                 [&] { context::filter_masks(scene, masks, context::FilterCriteria{}); });
}

TEST_CASE("build_ipb pools retained masks and freezes the bank") {
    PointCloudScene scene = background_scene(2);
    EmbeddingMatrix emb;
    emb.scene_id = "bg";
    emb.point_count = 2;
    emb.dim = 2;
    emb.data = {2, 0, 4, 0};
    const std::vector<InstanceMask> masks{
        mask_of(2, {0, 1}, 0.9f, 0),
        mask_of(2, {0}, 0.3f, 1), // filtered out
    };
    context::FilterCriteria crit;
    crit.tau = 0.75;

    const PrototypeBank bank =
        context::build_ipb({{&scene, &emb, &masks}}, crit);
    CHECK(bank.frozen());
    REQUIRE(bank.size() == 1);
    CHECK(bank.at(0).values == std::vector<float>{3.0f, 0.0f});
    const auto& prov = std::get<BankProvenance>(bank.at(0).provenance);
    CHECK(prov.scene_id == "bg");
    CHECK(prov.mask_index == 0);

    expect_error(Errc::frozen_bank, [&] {
        PrototypeBank grown = bank;
        Prototype p;
        p.values = {1.0f, 1.0f};
        p.provenance = BankProvenance{"x", 9};
        grown.append(std::move(p));
    });
}

TEST_CASE("an empty bank is a legal outcome") {
    PointCloudScene scene = background_scene(2);
    EmbeddingMatrix emb;
    emb.point_count = 2;
    emb.dim = 2;
    emb.data = {1, 1, 1, 1};
    const std::vector<InstanceMask> masks{mask_of(2, {0}, 0.1f, 0)};
    context::FilterCriteria crit; // tau 0.75
    const PrototypeBank bank = context::build_ipb({{&scene, &emb, &masks}}, crit);
    CHECK(bank.frozen());
    CHECK(bank.empty());
}

TEST_CASE("bank size is monotone non-increasing in tau") {
    const std::size_t m = 32;
    PointCloudScene scene = background_scene(m);
    EmbeddingMatrix emb;
    emb.scene_id = "bg";
    emb.point_count = m;
    emb.dim = 4;
    emb.data.assign(m * 4, 1.0f);

    rng::Stream stream(rng::mix(21, rng::fnv1a("mono")));
    std::vector<InstanceMask> masks;
    for (std::uint32_t q = 0; q < 40; ++q) {
        InstanceMask mask;
        mask.selection = Bitset(m);
        mask.selection.set(stream.next_below(m));
        mask.confidence = static_cast<float>(stream.next_unit());
        mask.mask_index = q;
        masks.push_back(std::move(mask));
    }

    std::size_t previous = masks.size() + 1;
    for (double tau : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        context::FilterCriteria crit;
        crit.tau = tau;
        const std::size_t kept = context::filter_masks(scene, masks, crit).size();
        CHECK(kept <= previous);
        previous = kept;
    }
    context::FilterCriteria top;
    top.tau = 1.0;
    CHECK(context::filter_masks(scene, masks, top).empty()); // conf <= 1 always
}
