#include "scope/types.hpp"

#include <set>

namespace scope {

void StageSchedule::validate() const {
    std::set<ClassId> seen;
    for (ClassId c : base_classes)
        if (!seen.insert(c).second)
            raise(Errc::duplicate_class, "schedule: base class " + std::to_string(c) + " repeated");
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const Stage& stage = stages[s];
        if (stage.k < 1) raise(Errc::bad_config, "schedule: K must be >= 1");
        for (const NovelClass& nc : stage.classes) {
            if (!seen.insert(nc.class_id).second)
                raise(Errc::duplicate_class,
                      "schedule: class " + std::to_string(nc.class_id) + " appears twice");
            if (nc.support_scene_ids.size() != static_cast<std::size_t>(stage.k))
                raise(Errc::shot_count_mismatch,
                      "schedule: class " + std::to_string(nc.class_id) + " has " +
                          std::to_string(nc.support_scene_ids.size()) + " supports, expected " +
                          std::to_string(stage.k));
        }
    }
}

std::vector<ClassId> StageSchedule::known_classes_through(std::size_t stage) const {
    std::vector<ClassId> known = base_classes;
    for (std::size_t s = 0; s < stage && s < stages.size(); ++s)
        for (const NovelClass& nc : stages[s].classes) known.push_back(nc.class_id);
    return known;
}

void HyperParams::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) raise(Errc::bad_config, "tau must be in [0,1]");
    if (top_r < 1) raise(Errc::bad_config, "top_r must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) raise(Errc::bad_config, "lambda must be in [0,1]");
    if (!(bg_overlap > 0.0 && bg_overlap <= 1.0))
        raise(Errc::bad_config, "bg_overlap must be in (0,1]");
    if (!(norm_epsilon > 0.0)) raise(Errc::bad_config, "norm_epsilon must be positive");
}

} // namespace scope
