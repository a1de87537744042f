#pragma once

#include <utility>
#include <vector>

#include "scope/core.hpp"
#include "scope/types.hpp"

// Incremental class registration: few-shot prototypes, Contextual Prototype
// Retrieval over the bank, Attention-based Prototype Enrichment, classifier
// assembly, and per-point prediction.
namespace scope::registration {

struct RetrievalResult {
    ClassId class_id = 0;
    std::vector<std::pair<std::size_t, float>> entries; // (bank_index, similarity)
    int requested_r = 0;
    int effective_r = 0; // min(requested_r, bank size)
};

/// One labelled support: an embedding matrix plus per-point labels.
struct SupportShot {
    const EmbeddingMatrix* embedding = nullptr;
    const std::vector<std::int32_t>* labels = nullptr;
};

/// (1/K) sum over shots of the masked mean of the shot's class points.
Prototype fewshot_prototype(ClassId class_id, const std::vector<SupportShot>& shots, int k,
                            int stage);

/// Top-min(R, |bank|) bank entries by cosine similarity to p, sorted by
/// similarity descending, ties to the lower bank index.
RetrievalResult retrieve_context(const Prototype& p, const PrototypeBank& bank, int r,
                                 double norm_epsilon = kDefaultNormEpsilon);

/// lambda*p + (1-lambda)*h where h is the attention-weighted sum of the
/// l2-normalized context vectors queried by the l2-normalized p. The blend
/// uses the UNnormalized p. Empty context returns p unchanged.
Prototype enrich(const Prototype& p, const std::vector<Prototype>& context, double lambda,
                 std::size_t dim, double norm_epsilon = kDefaultNormEpsilon);

/// Class-mean pooling over every labelled point of each base class, in input
/// order with a single 64-bit accumulation pass (scenes weighted by point
/// count, not scene count).
std::vector<Prototype> base_prototypes(const std::vector<SupportShot>& base_data,
                                       const std::vector<ClassId>& base_class_ids);

/// Base rows as a stage-0 classifier.
ClassifierMatrix base_classifier(const std::vector<SupportShot>& base_data,
                                 const std::vector<ClassId>& base_class_ids);

struct StageSpec {
    int stage = 1;
    int k = 1;
    // (class, K shots) in declared order.
    std::vector<std::pair<ClassId, std::vector<SupportShot>>> classes;
};

/// Grows the classifier by one stage: per class fewshot_prototype ->
/// retrieve_context -> enrich, appended in declared order; existing rows are
/// never touched. Returns the grown copy.
ClassifierMatrix register_stage(ClassifierMatrix classifier, const StageSpec& stage,
                                const PrototypeBank& bank, const HyperParams& hp);

/// Per-point argmax over raw dot products with every classifier row; ties go
/// to the lowest row index. Background is never predicted.
std::vector<ClassId> predict(const EmbeddingMatrix& embedding,
                             const ClassifierMatrix& classifier);

} // namespace scope::registration
