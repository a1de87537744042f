#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "scope/evaluation.hpp"

using namespace scope;
using namespace scope::evaluation;

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

MetricsReport report_of(int stage, double miou, double miou_b, double miou_n) {
    MetricsReport r;
    r.stage = stage;
    r.miou = miou;
    r.miou_b = miou_b;
    r.miou_n = miou_n;
    r.hm = harmonic_mean(miou_b, miou_n);
    return r;
}

} // namespace

TEST_CASE("confusion matrix counts pairs and ignores background gt") {
    ConfusionMatrix cm({0, 1});
    cm.accumulate({0, 1, -1, 0}, {0, 0, 1, 1});
    CHECK(cm.count(0, 0) == 1);
    CHECK(cm.count(1, 0) == 1);
    CHECK(cm.count(0, 1) == 1);
    CHECK(cm.count(1, 1) == 0);
    CHECK(cm.ignored_points() == 1);
    CHECK(cm.total_points() == 4); // counted pairs + ignored

    cm.accumulate({1}, {1});
    CHECK(cm.count(1, 1) == 1);
}

TEST_CASE("confusion matrix rejects malformed input") {
    expect_error(Errc::bad_config, [] { ConfusionMatrix({0, -1}); });
    expect_error(Errc::duplicate_class, [] { ConfusionMatrix({2, 2}); });

    ConfusionMatrix cm({0, 1});
    expect_error(Errc::length_mismatch, [&] { cm.accumulate({0, 1}, {0}); });
    expect_error(Errc::unknown_prediction, [&] { cm.accumulate({0}, {5}); });
    expect_error(Errc::unknown_prediction, [&] { cm.accumulate({0}, {-1}); });
    expect_error(Errc::unknown_class, [&] { cm.accumulate({5}, {0}); });
}

TEST_CASE("merge adds counts elementwise") {
    ConfusionMatrix a({0, 1});
    a.accumulate({0, 1}, {0, 0});
    ConfusionMatrix b({0, 1});
    b.accumulate({0, -1}, {1, 0});
    a.merge(b);
    CHECK(a.count(0, 0) == 1);
    CHECK(a.count(0, 1) == 1);
    CHECK(a.count(1, 0) == 1);
    CHECK(a.ignored_points() == 1);

    ConfusionMatrix other({0, 2});
    expect_error(Errc::bad_config, [&] { a.merge(other); });
}

TEST_CASE("iou is TP over union, undefined when the class is absent") {
    ConfusionMatrix cm({0, 1});
    // class 0: TP=5, FN (gt 0 pred 1) = 2, FP (gt 1 pred 0) = 3
    cm.accumulate(std::vector<ClassId>(5, 0), std::vector<ClassId>(5, 0));
    cm.accumulate(std::vector<ClassId>(2, 0), std::vector<ClassId>(2, 1));
    cm.accumulate(std::vector<ClassId>(3, 1), std::vector<ClassId>(3, 0));
    const auto v = iou(cm, 0);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(0.5));

    ConfusionMatrix fresh({0, 1});
    fresh.accumulate({0}, {0});
    CHECK_FALSE(iou(fresh, 1).has_value()); // class 1 absent everywhere
    expect_error(Errc::unknown_class, [&] { iou(fresh, 9); });
}

TEST_CASE("harmonic mean handles the degenerate cases") {
    CHECK(harmonic_mean(40.0, 20.0) == doctest::Approx(2.0 * 40 * 20 / 60.0).epsilon(1e-6));
    CHECK(harmonic_mean(0.35, 0.35) == doctest::Approx(0.35));
    CHECK(harmonic_mean(0.0, 10.0) == 0.0);
    CHECK(harmonic_mean(0.0, 0.0) == 0.0);
}

TEST_CASE("summarize splits base and novel means") {
    ConfusionMatrix cm({0, 1, 5});
    cm.accumulate(std::vector<ClassId>(4, 0), std::vector<ClassId>(4, 0)); // TP(0)=4
    cm.accumulate(std::vector<ClassId>(2, 1), {1, 0}); // TP(1)=1, FN(1)=1, FP(0)=1
    cm.accumulate(std::vector<ClassId>(2, 5), {5, 5}); // TP(5)=2
    // iou(0) = 4/(4+1) = 0.8, iou(1) = 1/2, iou(5) = 1
    const MetricsReport r = summarize(cm, {0, 1}, {5}, 2);
    CHECK(r.stage == 2);
    CHECK(r.miou_b == doctest::Approx(0.65));
    CHECK(r.miou_n == doctest::Approx(1.0));
    CHECK(r.miou == doctest::Approx((0.8 + 0.5 + 1.0) / 3.0));
    CHECK(r.hm == doctest::Approx(harmonic_mean(0.65, 1.0)));
    CHECK(r.per_class_iou.size() == 3);

    const MetricsReport stage0 = summarize(cm, {0, 1}, {}, 0);
    CHECK(stage0.miou_n == 0.0);
    CHECK(stage0.hm == 0.0);
    CHECK(stage0.miou == doctest::Approx(0.65));

    expect_error(Errc::bad_config, [&] { summarize(cm, {0, 1}, {1}, 1); });
}

TEST_CASE("undefined classes are excluded from the means") {
    ConfusionMatrix cm({0, 1});
    cm.accumulate({0, 0}, {0, 0}); // class 1 never appears
    const MetricsReport r = summarize(cm, {0, 1}, {}, 0);
    CHECK(r.miou_b == doctest::Approx(1.0)); // mean over the defined class only
    CHECK(r.per_class_iou.size() == 1);
    CHECK(r.classes_evaluated == std::vector<ClassId>{0});
}

TEST_CASE("finalize_run aggregates stages") {
    const std::vector<MetricsReport> reports{
        report_of(0, 0.6, 0.5, 0.0),
        report_of(1, 0.5, 0.4, 0.3),
        report_of(2, 0.4, 0.3, 0.2),
    };
    const RunSummary all = finalize_run(reports, true);
    CHECK(all.miou_i == doctest::Approx((0.6 + 0.5 + 0.4) / 3.0));
    CHECK(all.fpp == doctest::Approx(0.2));

    const RunSummary incremental = finalize_run(reports, false);
    CHECK(incremental.miou_i == doctest::Approx((0.5 + 0.4) / 2.0));
    CHECK(incremental.fpp == doctest::Approx(0.2)); // fpp always spans stage 0..T

    const RunSummary only0 = finalize_run({report_of(0, 0.6, 0.5, 0.0)}, false);
    CHECK(only0.miou_i == doctest::Approx(0.6)); // sole stage always counts
    CHECK(only0.fpp == 0.0);

    expect_error(Errc::empty_run, [] { finalize_run({}, true); });
    expect_error(Errc::bad_config,
                 [] { finalize_run({report_of(1, 0.5, 0.4, 0.3)}, true); });
}

TEST_CASE("ensemble aggregation modes differ as documented") {
    const std::vector<MetricsReport> runs{
        report_of(1, 0.0, 0.4, 0.2),
        report_of(1, 0.0, 0.6, 0.4),
    };
    const EnsembleAggregate per_run = aggregate_ensemble(runs, kAggregatePerRunHm);
    CHECK(per_run.runs == 2);
    CHECK(per_run.miou_b == doctest::Approx(0.5));
    CHECK(per_run.miou_n == doctest::Approx(0.3));
    CHECK(per_run.hm ==
          doctest::Approx((harmonic_mean(0.4, 0.2) + harmonic_mean(0.6, 0.4)) / 2.0));

    const EnsembleAggregate averaged = aggregate_ensemble(runs, kAggregateAveragedHm);
    CHECK(averaged.hm == doctest::Approx(harmonic_mean(0.5, 0.3)));
    CHECK(per_run.hm != averaged.hm); // Jensen gap

    expect_error(Errc::bad_config, [&] { aggregate_ensemble(runs, "median"); });
    expect_error(Errc::empty_run, [] { aggregate_ensemble({}, kAggregatePerRunHm); });
}

TEST_CASE("csv layout is one summary row then per-class rows") {
    MetricsReport r = report_of(0, 0.5, 0.5, 0.0);
    r.per_class_iou[3] = 0.25;
    r.per_class_iou[1] = 0.75;
    const std::string csv = reports_to_csv({r});
    const std::string expected = "stage,class_id,iou,miou,miou_b,miou_n,hm\n"
                                 "0,-1,,0.5,0.5,0,0\n"
                                 "0,1,0.75,0.5,0.5,0,0\n"
                                 "0,3,0.25,0.5,0.5,0,0\n";
    CHECK(csv == expected);
}
