#include "scope/registration.hpp"

#include <algorithm>

#include "scope/kernels.hpp"

namespace scope::registration {

Prototype fewshot_prototype(ClassId class_id, const std::vector<SupportShot>& shots, int k,
                            int stage) {
    if (k < 1) raise(Errc::bad_config, "fewshot_prototype: K must be >= 1");
    if (shots.size() != static_cast<std::size_t>(k))
        raise(Errc::shot_count_mismatch, "fewshot_prototype: got " +
                                             std::to_string(shots.size()) +
                                             " shots, expected " + std::to_string(k));

    std::vector<double> acc;
    for (const SupportShot& shot : shots) {
        const EmbeddingMatrix& emb = *shot.embedding;
        const std::vector<std::int32_t>& labels = *shot.labels;
        if (labels.size() != emb.point_count)
            raise(Errc::length_mismatch, "fewshot_prototype: label count does not match M");
        InstanceMask mask;
        mask.selection = Bitset(emb.point_count);
        bool any = false;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == class_id) {
                mask.selection.set(i);
                any = true;
            }
        }
        if (!any)
            raise(Errc::empty_class_support, "fewshot_prototype: support " + emb.scene_id +
                                                 " has no points of class " +
                                                 std::to_string(class_id));
        const Prototype shot_mean = masked_mean(emb, mask);
        if (acc.empty()) acc.assign(shot_mean.dim(), 0.0);
        if (shot_mean.dim() != acc.size())
            raise(Errc::dim_mismatch, "fewshot_prototype: shot dims differ");
        for (std::size_t j = 0; j < acc.size(); ++j)
            acc[j] += static_cast<double>(shot_mean.values[j]);
    }

    Prototype out;
    out.provenance = FewShotProvenance{class_id, stage};
    out.values.resize(acc.size());
    const double inv = 1.0 / static_cast<double>(k);
    for (std::size_t j = 0; j < acc.size(); ++j)
        out.values[j] = static_cast<float>(acc[j] * inv);
    return out;
}

RetrievalResult retrieve_context(const Prototype& p, const PrototypeBank& bank, int r,
                                 double norm_epsilon) {
    if (!bank.frozen()) raise(Errc::bad_config, "retrieve_context: bank must be frozen");
    if (r < 1) raise(Errc::bad_config, "retrieve_context: R must be >= 1");

    RetrievalResult result;
    if (const auto* few = std::get_if<FewShotProvenance>(&p.provenance))
        result.class_id = few->class_id;
    result.requested_r = r;
    if (bank.empty()) {
        result.effective_r = 0;
        return result;
    }
    if (p.dim() != bank.dim())
        raise(Errc::dim_mismatch, "retrieve_context: prototype dim does not match bank");

    const std::vector<float> scores =
        kernels::cosine_scan(p.values, bank.prototypes(), norm_epsilon);

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(r), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), [&scores](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });

    result.effective_r = static_cast<int>(take);
    result.entries.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
        result.entries.emplace_back(order[i], scores[order[i]]);
    return result;
}

Prototype enrich(const Prototype& p, const std::vector<Prototype>& context, double lambda,
                 std::size_t dim, double norm_epsilon) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        raise(Errc::bad_config, "enrich: lambda must be in [0,1]");
    if (p.dim() != dim) raise(Errc::dim_mismatch, "enrich: prototype dim does not match D");
    if (context.empty()) return p;

    ClassId class_id = 0;
    int stage = 0;
    if (const auto* few = std::get_if<FewShotProvenance>(&p.provenance)) {
        class_id = few->class_id;
        stage = few->stage;
    }

    const std::vector<float> query = l2_normalize(p.values, norm_epsilon);
    std::vector<std::vector<float>> keys;
    keys.reserve(context.size());
    for (const Prototype& mu : context) {
        if (mu.dim() != dim) raise(Errc::dim_mismatch, "enrich: context dim does not match D");
        keys.push_back(l2_normalize(mu.values, norm_epsilon));
    }
    const std::vector<float> weights = attention_weights(query, keys, dim);

    Prototype out;
    out.provenance = EnrichedProvenance{class_id, stage};
    if (lambda == 1.0) {
        // The blend contributes (1-lambda)*h = 0; return p's values verbatim
        // rather than adding a zero that could flip a -0.0 bit.
        out.values = p.values;
        return out;
    }

    std::vector<double> fused(dim, 0.0);
    for (std::size_t r = 0; r < keys.size(); ++r)
        for (std::size_t j = 0; j < dim; ++j)
            fused[j] += static_cast<double>(weights[r]) * static_cast<double>(keys[r][j]);

    out.values.resize(dim);
    for (std::size_t j = 0; j < dim; ++j)
        out.values[j] = static_cast<float>(lambda * static_cast<double>(p.values[j]) +
                                           (1.0 - lambda) * fused[j]);
    return out;
}

std::vector<Prototype> base_prototypes(const std::vector<SupportShot>& base_data,
                                       const std::vector<ClassId>& base_class_ids) {
    std::vector<std::vector<double>> acc(base_class_ids.size());
    std::vector<std::uint64_t> counts(base_class_ids.size(), 0);

    std::map<ClassId, std::size_t> slot;
    for (std::size_t i = 0; i < base_class_ids.size(); ++i) {
        if (!slot.emplace(base_class_ids[i], i).second)
            raise(Errc::duplicate_class, "base_prototypes: class " +
                                             std::to_string(base_class_ids[i]) + " repeated");
    }

    std::size_t dim = 0;
    for (const SupportShot& shot : base_data) {
        const EmbeddingMatrix& emb = *shot.embedding;
        const std::vector<std::int32_t>& labels = *shot.labels;
        if (labels.size() != emb.point_count)
            raise(Errc::length_mismatch, "base_prototypes: label count does not match M");
        if (dim == 0) dim = emb.dim;
        if (emb.dim != dim) raise(Errc::dim_mismatch, "base_prototypes: embedding dims differ");
        for (std::size_t i = 0; i < emb.point_count; ++i) {
            const auto it = slot.find(labels[i]);
            if (it == slot.end()) continue;
            std::vector<double>& a = acc[it->second];
            if (a.empty()) a.assign(dim, 0.0);
            const float* row = emb.data.data() + i * dim;
            for (std::size_t j = 0; j < dim; ++j) a[j] += static_cast<double>(row[j]);
            ++counts[it->second];
        }
    }

    std::vector<Prototype> out;
    out.reserve(base_class_ids.size());
    for (std::size_t c = 0; c < base_class_ids.size(); ++c) {
        if (counts[c] == 0)
            raise(Errc::empty_class_support, "base_prototypes: class " +
                                                 std::to_string(base_class_ids[c]) +
                                                 " has no labelled points");
        Prototype p;
        p.provenance = BaseProvenance{base_class_ids[c]};
        p.values.resize(dim);
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (std::size_t j = 0; j < dim; ++j)
            p.values[j] = static_cast<float>(acc[c][j] * inv);
        out.push_back(std::move(p));
    }
    return out;
}

ClassifierMatrix base_classifier(const std::vector<SupportShot>& base_data,
                                 const std::vector<ClassId>& base_class_ids) {
    ClassifierMatrix classifier;
    std::vector<Prototype> protos = base_prototypes(base_data, base_class_ids);
    for (std::size_t c = 0; c < protos.size(); ++c)
        classifier.append_row(base_class_ids[c], std::move(protos[c]));
    classifier.mark_stage(0);
    return classifier;
}

ClassifierMatrix register_stage(ClassifierMatrix classifier, const StageSpec& stage,
                                const PrototypeBank& bank, const HyperParams& hp) {
    hp.validate();
    if (!bank.frozen()) raise(Errc::bad_config, "register_stage: bank must be frozen");

    for (const auto& [class_id, shots] : stage.classes) {
        const Prototype raw = fewshot_prototype(class_id, shots, stage.k, stage.stage);
        std::vector<Prototype> context;
        if (!bank.empty()) {
            const RetrievalResult retrieved =
                retrieve_context(raw, bank, hp.top_r, hp.norm_epsilon);
            context.reserve(retrieved.entries.size());
            for (const auto& [bank_index, similarity] : retrieved.entries)
                context.push_back(bank.at(bank_index));
        }
        Prototype enriched = enrich(raw, context, hp.lambda, raw.dim(), hp.norm_epsilon);
        classifier.append_row(class_id, std::move(enriched));
    }
    classifier.mark_stage(stage.stage);
    return classifier;
}

std::vector<ClassId> predict(const EmbeddingMatrix& embedding,
                             const ClassifierMatrix& classifier) {
    if (classifier.empty()) raise(Errc::empty_classifier, "predict: no registered classes");
    if (embedding.dim != classifier.dim())
        raise(Errc::dim_mismatch, "predict: embedding dim does not match classifier");

    const std::vector<float> rows = classifier.packed_rows();
    const std::vector<std::int32_t> row_idx = kernels::predict_rows(
        embedding.data.data(), embedding.point_count, rows.data(), classifier.size(),
        classifier.dim());

    const std::vector<ClassId> ids = classifier.class_ids();
    std::vector<ClassId> out(row_idx.size());
    for (std::size_t i = 0; i < row_idx.size(); ++i)
        out[i] = ids[static_cast<std::size_t>(row_idx[i])];
    return out;
}

} // namespace scope::registration
