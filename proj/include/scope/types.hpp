#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scope/error.hpp"

namespace scope {

using ClassId = std::int32_t;

// Points outside the currently known class set carry this label; they never
// contribute to prototypes or metric counts.
inline constexpr ClassId kBackgroundLabel = -1;

/// Per-scene point matrix. Rows are points; the first three columns are XYZ
/// in meters, optional RGB in [0,1] follows, and block-normalized XYZ is
/// appended by the preprocessor (d0 = 9 in the standard layout).
struct PointCloudScene {
    std::string scene_id;
    std::size_t point_count = 0; // M
    std::size_t feature_dim = 0; // d0
    std::vector<float> points;   // row-major M x d0
    std::vector<std::int32_t> labels; // length M, -1 = background/unannotated

    std::span<const float> point(std::size_t i) const {
        return std::span<const float>(points).subspan(i * feature_dim, feature_dim);
    }
};

/// Point-wise feature matrix produced by a feature provider. Same M as its
/// source scene.
struct EmbeddingMatrix {
    std::string scene_id;
    std::size_t point_count = 0; // M
    std::size_t dim = 0;         // D
    std::vector<float> data;     // row-major M x D

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(data).subspan(i * dim, dim);
    }
};

/// Fixed-length bitset stored as bytes, LSB-first within each byte — the same
/// layout the mask file format uses on disk.
class Bitset {
public:
    Bitset() = default;
    explicit Bitset(std::size_t size) : size_(size), bytes_((size + 7) / 8, 0) {}
    Bitset(std::size_t size, std::vector<std::uint8_t> bytes)
        : size_(size), bytes_(std::move(bytes)) {
        if (bytes_.size() != (size_ + 7) / 8)
            raise(Errc::dim_mismatch, "bitset byte count does not match length");
        mask_padding();
    }

    std::size_t size() const { return size_; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

    bool test(std::size_t i) const { return (bytes_[i / 8] >> (i % 8)) & 1u; }
    void set(std::size_t i) { bytes_[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8)); }
    void reset(std::size_t i) { bytes_[i / 8] &= static_cast<std::uint8_t>(~(1u << (i % 8))); }

    std::size_t count() const {
        std::size_t total = 0;
        for (std::uint8_t b : bytes_) total += static_cast<std::size_t>(__builtin_popcount(b));
        return total;
    }

    bool operator==(const Bitset& other) const = default;

private:
    // Bits at positions >= size_ never represent points.
    void mask_padding() {
        if (size_ % 8 != 0 && !bytes_.empty())
            bytes_.back() &= static_cast<std::uint8_t>((1u << (size_ % 8)) - 1u);
    }

    std::size_t size_ = 0;
    std::vector<std::uint8_t> bytes_;
};

/// One pseudo-instance proposal: a point selection plus the segmenter's
/// confidence for it.
struct InstanceMask {
    Bitset selection;
    float confidence = 0.0f; // in [0, 1]
    std::uint32_t mask_index = 0;
};

struct BaseProvenance {
    ClassId class_id = 0;
    bool operator==(const BaseProvenance&) const = default;
};

struct FewShotProvenance {
    ClassId class_id = 0;
    int stage = 0;
    bool operator==(const FewShotProvenance&) const = default;
};

struct BankProvenance {
    std::string scene_id;
    std::uint32_t mask_index = 0;
    bool operator==(const BankProvenance&) const = default;
};

struct EnrichedProvenance {
    ClassId class_id = 0;
    int stage = 0;
    bool operator==(const EnrichedProvenance&) const = default;
};

using Provenance = std::variant<BaseProvenance, FewShotProvenance, BankProvenance, EnrichedProvenance>;

/// A D-vector acting as a class-level (or instance-level) representative in
/// embedding space, tagged with where it came from.
struct Prototype {
    std::vector<float> values;
    Provenance provenance;

    std::size_t dim() const { return values.size(); }
};

/// Frozen reservoir of pooled background pseudo-instance features. Append
/// order is the deterministic scene-then-mask ingestion order; once frozen,
/// contents and order are immutable.
class PrototypeBank {
public:
    PrototypeBank() = default;
    explicit PrototypeBank(std::size_t dim) : dim_(dim) {}

    void append(Prototype prototype) {
        if (frozen_) raise(Errc::frozen_bank, "append to frozen bank");
        if (!std::holds_alternative<BankProvenance>(prototype.provenance))
            raise(Errc::bad_config, "bank entries require bank provenance");
        if (dim_ == 0 && prototypes_.empty()) dim_ = prototype.dim();
        if (prototype.dim() != dim_)
            raise(Errc::dim_mismatch, "prototype dim does not match bank dim");
        prototypes_.push_back(std::move(prototype));
    }

    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

    std::size_t size() const { return prototypes_.size(); }
    bool empty() const { return prototypes_.empty(); }
    std::size_t dim() const { return dim_; }

    const Prototype& at(std::size_t i) const { return prototypes_.at(i); }
    const std::vector<Prototype>& prototypes() const { return prototypes_; }

private:
    std::vector<Prototype> prototypes_;
    std::size_t dim_ = 0;
    bool frozen_ = false;
};

/// Unified classifier: one prototype row per known class, base rows first,
/// then novel rows in stage-then-registration order.
class ClassifierMatrix {
public:
    struct Row {
        ClassId class_id = 0;
        Prototype prototype;
    };

    void append_row(ClassId class_id, Prototype prototype) {
        for (const Row& row : rows_)
            if (row.class_id == class_id)
                raise(Errc::duplicate_class, "class " + std::to_string(class_id) + " already registered");
        if (dim_ == 0 && rows_.empty()) dim_ = prototype.dim();
        if (prototype.dim() != dim_)
            raise(Errc::dim_mismatch, "prototype dim does not match classifier dim");
        rows_.push_back(Row{class_id, std::move(prototype)});
    }

    // Marks [previous end, current end) as the row range introduced at stage t.
    void mark_stage(int stage) {
        std::size_t begin = 0;
        for (const auto& [_, range] : stage_boundaries_) begin = std::max(begin, range.second);
        stage_boundaries_[stage] = {begin, rows_.size()};
    }

    const std::vector<Row>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    std::size_t dim() const { return dim_; }

    std::optional<std::pair<std::size_t, std::size_t>> stage_range(int stage) const {
        auto it = stage_boundaries_.find(stage);
        if (it == stage_boundaries_.end()) return std::nullopt;
        return it->second;
    }

    const std::map<int, std::pair<std::size_t, std::size_t>>& stage_boundaries() const {
        return stage_boundaries_;
    }

    std::vector<ClassId> class_ids() const {
        std::vector<ClassId> ids;
        ids.reserve(rows_.size());
        for (const Row& row : rows_) ids.push_back(row.class_id);
        return ids;
    }

    // Contiguous C x D copy of the row vectors, for the prediction kernel.
    std::vector<float> packed_rows() const {
        std::vector<float> packed;
        packed.reserve(rows_.size() * dim_);
        for (const Row& row : rows_)
            packed.insert(packed.end(), row.prototype.values.begin(), row.prototype.values.end());
        return packed;
    }

private:
    std::vector<Row> rows_;
    std::map<int, std::pair<std::size_t, std::size_t>> stage_boundaries_;
    std::size_t dim_ = 0;
};

/// Ordered class-introduction plan. Stage 0 holds the base classes; each
/// later stage introduces novel classes backed by exactly K support scenes.
struct StageSchedule {
    struct NovelClass {
        ClassId class_id = 0;
        std::vector<std::string> support_scene_ids; // exactly K entries
    };
    struct Stage {
        std::vector<NovelClass> classes;
        int k = 0;
    };

    std::vector<ClassId> base_classes;
    std::vector<Stage> stages; // stages[i] is incremental stage i+1

    void validate() const;
    std::vector<ClassId> known_classes_through(std::size_t stage) const;
};

struct HyperParams {
    double tau = 0.75;         // pseudo-mask confidence threshold (strict >)
    int top_r = 50;            // retrieved context size
    double lambda = 0.5;       // fusion weight, 1 = support-only
    double bg_overlap = 1.0;   // min fraction of mask points labelled background
    double norm_epsilon = 1e-12;

    void validate() const;
};

} // namespace scope
