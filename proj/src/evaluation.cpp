#include "scope/evaluation.hpp"

#include <algorithm>
#include <cstdio>

#include "scope/kernels.hpp"

namespace scope::evaluation {

ConfusionMatrix::ConfusionMatrix(std::vector<ClassId> known_classes)
    : classes_(std::move(known_classes)) {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i] == kBackgroundLabel)
            raise(Errc::bad_config, "confusion: -1 cannot be a known class");
        if (!index_.emplace(classes_[i], i).second)
            raise(Errc::duplicate_class,
                  "confusion: class " + std::to_string(classes_[i]) + " repeated");
    }
    counts_.assign(classes_.size() * classes_.size(), 0);
}

std::size_t ConfusionMatrix::index_of(ClassId c, const char* what) const {
    const auto it = index_.find(c);
    if (it == index_.end())
        raise(Errc::unknown_class, std::string(what) + ": class " + std::to_string(c) +
                                       " is not in the known set");
    return it->second;
}

void ConfusionMatrix::accumulate(const std::vector<ClassId>& gt,
                                 const std::vector<ClassId>& pred) {
    if (gt.size() != pred.size())
        raise(Errc::length_mismatch, "accumulate: gt and pred lengths differ");

    // Map to dense indices up front; this pass also does all validation so
    // the tally kernel never throws.
    std::vector<std::int32_t> gt_idx(gt.size());
    std::vector<std::int32_t> pred_idx(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const auto pit = index_.find(pred[i]);
        if (pit == index_.end())
            raise(Errc::unknown_prediction, "accumulate: predicted class " +
                                                std::to_string(pred[i]) +
                                                " is not in the known set");
        pred_idx[i] = static_cast<std::int32_t>(pit->second);
        if (gt[i] == kBackgroundLabel) {
            gt_idx[i] = -1;
        } else {
            gt_idx[i] = static_cast<std::int32_t>(index_of(gt[i], "accumulate"));
        }
    }
    kernels::tally_confusion(gt_idx.data(), pred_idx.data(), gt.size(), classes_.size(),
                             counts_.data(), ignored_);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (classes_ != other.classes_)
        raise(Errc::bad_config, "merge: confusion matrices cover different class sets");
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
    ignored_ += other.ignored_;
}

std::uint64_t ConfusionMatrix::count(ClassId gt, ClassId pred) const {
    return counts_[index_of(gt, "count") * classes_.size() + index_of(pred, "count")];
}

std::uint64_t ConfusionMatrix::total_points() const {
    std::uint64_t total = ignored_;
    for (std::uint64_t v : counts_) total += v;
    return total;
}

std::optional<double> iou(const ConfusionMatrix& cm, ClassId c) {
    const std::vector<ClassId>& classes = cm.classes();
    std::uint64_t tp = 0, fp = 0, fn = 0;
    bool known = false;
    for (ClassId g : classes)
        if (g == c) known = true;
    if (!known) raise(Errc::unknown_class, "iou: class " + std::to_string(c) + " unknown");
    for (ClassId other : classes) {
        if (other == c) {
            tp = cm.count(c, c);
        } else {
            fp += cm.count(other, c);
            fn += cm.count(c, other);
        }
    }
    const std::uint64_t uni = tp + fp + fn;
    if (uni == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(uni);
}

double harmonic_mean(double b, double n) {
    const double denom = b + n;
    if (!(denom > 0.0)) return 0.0;
    return 2.0 * b * n / denom;
}

MetricsReport summarize(const ConfusionMatrix& cm, const std::vector<ClassId>& base_ids,
                        const std::vector<ClassId>& novel_ids, int stage) {
    for (ClassId b : base_ids)
        for (ClassId n : novel_ids)
            if (b == n)
                raise(Errc::bad_config,
                      "summarize: class " + std::to_string(b) + " is both base and novel");

    MetricsReport report;
    report.stage = stage;

    double sum_all = 0.0, sum_b = 0.0, sum_n = 0.0;
    std::size_t n_all = 0, n_b = 0, n_n = 0;
    const auto take = [&](const std::vector<ClassId>& ids, double& sum, std::size_t& count) {
        for (ClassId c : ids) {
            const std::optional<double> value = iou(cm, c);
            if (!value) continue;
            report.per_class_iou[c] = *value;
            report.classes_evaluated.push_back(c);
            sum += *value;
            ++count;
            sum_all += *value;
            ++n_all;
        }
    };
    take(base_ids, sum_b, n_b);
    take(novel_ids, sum_n, n_n);

    report.miou = n_all > 0 ? sum_all / static_cast<double>(n_all) : 0.0;
    report.miou_b = n_b > 0 ? sum_b / static_cast<double>(n_b) : 0.0;
    if (novel_ids.empty()) {
        report.miou_n = 0.0;
        report.hm = 0.0;
    } else {
        report.miou_n = n_n > 0 ? sum_n / static_cast<double>(n_n) : 0.0;
        report.hm = harmonic_mean(report.miou_b, report.miou_n);
    }
    return report;
}

RunSummary finalize_run(const std::vector<MetricsReport>& reports, bool include_stage0) {
    if (reports.empty()) raise(Errc::empty_run, "finalize_run: no stage reports");
    for (std::size_t t = 0; t < reports.size(); ++t)
        if (reports[t].stage != static_cast<int>(t))
            raise(Errc::bad_config, "finalize_run: stages must be contiguous from 0");

    RunSummary summary;
    summary.per_stage = reports;

    const std::size_t first = (!include_stage0 && reports.size() > 1) ? 1 : 0;
    double sum = 0.0;
    for (std::size_t t = first; t < reports.size(); ++t) sum += reports[t].miou;
    summary.miou_i = sum / static_cast<double>(reports.size() - first);
    summary.fpp = reports.front().miou_b - reports.back().miou_b;
    return summary;
}

EnsembleAggregate aggregate_ensemble(const std::vector<MetricsReport>& runs,
                                     const std::string& mode) {
    if (runs.empty()) raise(Errc::empty_run, "aggregate_ensemble: no runs");
    if (mode != kAggregatePerRunHm && mode != kAggregateAveragedHm)
        raise(Errc::bad_config, "aggregate_ensemble: unknown mode " + mode);

    EnsembleAggregate agg;
    agg.mode = mode;
    agg.runs = runs.size();
    double hm_sum = 0.0;
    for (const MetricsReport& run : runs) {
        agg.miou += run.miou;
        agg.miou_b += run.miou_b;
        agg.miou_n += run.miou_n;
        hm_sum += run.hm;
    }
    const auto n = static_cast<double>(runs.size());
    agg.miou /= n;
    agg.miou_b /= n;
    agg.miou_n /= n;
    agg.hm = mode == kAggregatePerRunHm ? hm_sum / n : harmonic_mean(agg.miou_b, agg.miou_n);
    return agg;
}

namespace {

std::string format_metric(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

} // namespace

std::string reports_to_csv(const std::vector<MetricsReport>& reports) {
    std::string out = "stage,class_id,iou,miou,miou_b,miou_n,hm\n";
    for (const MetricsReport& report : reports) {
        const std::string tail = format_metric(report.miou) + "," +
                                 format_metric(report.miou_b) + "," +
                                 format_metric(report.miou_n) + "," + format_metric(report.hm);
        out += std::to_string(report.stage) + ",-1,," + tail + "\n";
        for (const auto& [class_id, value] : report.per_class_iou)
            out += std::to_string(report.stage) + "," + std::to_string(class_id) + "," +
                   format_metric(value) + "," + tail + "\n";
    }
    return out;
}

} // namespace scope::evaluation
