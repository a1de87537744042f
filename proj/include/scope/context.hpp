#pragma once

#include <vector>

#include "scope/types.hpp"

// Scene contextualisation: keep only high-confidence background pseudo-masks
// and pool them into the frozen Instance Prototype Bank.
namespace scope::context {

struct FilterCriteria {
    double tau = 0.75;       // strict >: confidence exactly tau is rejected
    double bg_overlap = 1.0; // min fraction of mask points labelled background

    void validate() const;
};

/// Order-preserving filter: confidence > tau AND background fraction >=
/// bg_overlap; empty masks are dropped unconditionally. mask_index values are
/// carried through so survivors still cite their original file position.
std::vector<InstanceMask> filter_masks(const PointCloudScene& scene,
                                       const std::vector<InstanceMask>& masks,
                                       const FilterCriteria& crit);

struct SceneRecord {
    const PointCloudScene* scene = nullptr;
    const EmbeddingMatrix* embedding = nullptr;
    const std::vector<InstanceMask>* masks = nullptr;
};

/// Pools every retained mask in scene-then-mask order and returns the frozen
/// bank. An empty bank is a legal outcome, not an error.
PrototypeBank build_ipb(const std::vector<SceneRecord>& scenes, const FilterCriteria& crit);

} // namespace scope::context
