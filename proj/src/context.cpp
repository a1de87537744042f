#include "scope/context.hpp"

#include "scope/kernels.hpp"

namespace scope::context {

void FilterCriteria::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) raise(Errc::bad_config, "filter: tau must be in [0,1]");
    if (!(bg_overlap > 0.0 && bg_overlap <= 1.0))
        raise(Errc::bad_config, "filter: bg_overlap must be in (0,1]");
}

std::vector<InstanceMask> filter_masks(const PointCloudScene& scene,
                                       const std::vector<InstanceMask>& masks,
                                       const FilterCriteria& crit) {
    crit.validate();
    std::vector<InstanceMask> kept;
    for (const InstanceMask& mask : masks) {
        if (mask.selection.size() != scene.point_count)
            raise(Errc::dim_mismatch, "filter_masks: mask length does not match scene M");
        std::size_t selected = 0;
        std::size_t background = 0;
        for (std::size_t i = 0; i < scene.point_count; ++i) {
            if (!mask.selection.test(i)) continue;
            ++selected;
            if (scene.labels[i] == kBackgroundLabel) ++background;
        }
        if (selected == 0) continue;
        if (!(static_cast<double>(mask.confidence) > crit.tau)) continue;
        const double fraction =
            static_cast<double>(background) / static_cast<double>(selected);
        if (fraction < crit.bg_overlap) continue;
        kept.push_back(mask);
    }
    return kept;
}

PrototypeBank build_ipb(const std::vector<SceneRecord>& scenes, const FilterCriteria& crit) {
    PrototypeBank bank;
    for (const SceneRecord& record : scenes) {
        if (record.embedding->point_count != record.scene->point_count)
            raise(Errc::dim_mismatch, "build_ipb: embedding M does not match scene M for " +
                                          record.scene->scene_id);
        const std::vector<InstanceMask> kept =
            filter_masks(*record.scene, *record.masks, crit);
        const std::vector<std::vector<float>> pooled =
            kernels::pool_masks(*record.embedding, kept);
        for (std::size_t q = 0; q < kept.size(); ++q) {
            Prototype p;
            p.values = pooled[q];
            p.provenance = BankProvenance{record.scene->scene_id, kept[q].mask_index};
            bank.append(std::move(p));
        }
    }
    bank.freeze();
    return bank;
}

} // namespace scope::context
