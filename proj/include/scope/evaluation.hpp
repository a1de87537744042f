#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scope/types.hpp"

// Confusion-matrix accumulation and the metric suite: per-class IoU, mIoU,
// mIoU-B, mIoU-N, HM, mIoU-I, FPP. Counts are 64-bit integers, metrics
// 64-bit floats; IoUs are fractions in [0,1].
namespace scope::evaluation {

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<ClassId> known_classes);

    /// Per point: gt == -1 increments ignored_points, otherwise
    /// counts[gt][pred]. Unknown predictions and unknown non-background
    /// ground truth are errors.
    void accumulate(const std::vector<ClassId>& gt, const std::vector<ClassId>& pred);

    /// Element-wise addition; both matrices must share the class set.
    void merge(const ConfusionMatrix& other);

    std::uint64_t count(ClassId gt, ClassId pred) const;
    std::uint64_t ignored_points() const { return ignored_; }
    std::uint64_t total_points() const;
    const std::vector<ClassId>& classes() const { return classes_; }

private:
    std::size_t index_of(ClassId c, const char* what) const;

    std::vector<ClassId> classes_;
    std::map<ClassId, std::size_t> index_;
    std::vector<std::uint64_t> counts_; // row-major (gt, pred)
    std::uint64_t ignored_ = 0;
};

/// TP/(TP+FP+FN); nullopt when the union is zero (class absent from both gt
/// and predictions) — excluded from means rather than counted as 0.
std::optional<double> iou(const ConfusionMatrix& cm, ClassId c);

struct MetricsReport {
    int stage = 0;
    std::map<ClassId, double> per_class_iou; // defined IoUs only
    double miou = 0.0;
    double miou_b = 0.0;
    double miou_n = 0.0;
    double hm = 0.0;
    std::vector<ClassId> classes_evaluated;
};

/// 2bn/(b+n), or 0 when b+n is not positive.
double harmonic_mean(double b, double n);

/// Means over the defined IoUs of each set; at stage 0 miou_n and hm are
/// reported as 0 (no novel classes exist yet).
MetricsReport summarize(const ConfusionMatrix& cm, const std::vector<ClassId>& base_ids,
                        const std::vector<ClassId>& novel_ids, int stage);

struct RunSummary {
    std::vector<MetricsReport> per_stage;
    double miou_i = 0.0; // mean of per-stage miou
    double fpp = 0.0;    // miou_b at stage 0 minus miou_b at the last stage
};

/// Reports must cover contiguous stages 0..T. include_stage0 controls whether
/// stage 0 enters the mIoU-I mean (it always does when it is the only stage).
RunSummary finalize_run(const std::vector<MetricsReport>& reports, bool include_stage0 = true);

inline constexpr const char* kAggregatePerRunHm = "per-run-hm";
inline constexpr const char* kAggregateAveragedHm = "averaged-hm";

struct EnsembleAggregate {
    std::string mode;
    double miou = 0.0;
    double miou_b = 0.0;
    double miou_n = 0.0;
    double hm = 0.0;
    std::size_t runs = 0;
};

/// Aggregates the same-stage reports of an ensemble of runs. per-run-hm
/// averages each run's own HM; averaged-hm recomputes HM from the averaged
/// mIoU-B/mIoU-N.
EnsembleAggregate aggregate_ensemble(const std::vector<MetricsReport>& runs,
                                     const std::string& mode);

/// Long-format rows: stage, class_id, iou, miou, miou_b, miou_n, hm. Each
/// stage opens with a summary row (class_id -1, empty iou), then one row per
/// defined per-class IoU.
std::string reports_to_csv(const std::vector<MetricsReport>& reports);

} // namespace scope::evaluation
