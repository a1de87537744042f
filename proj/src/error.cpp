#include "scope/error.hpp"

namespace scope {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::empty_mask: return "EmptyMask";
        case Errc::dim_mismatch: return "DimMismatch";
        case Errc::degenerate_vector: return "DegenerateVector";
        case Errc::empty_context: return "EmptyContext";
        case Errc::bad_magic: return "BadMagic";
        case Errc::bad_version: return "BadVersion";
        case Errc::truncated_file: return "TruncatedFile";
        case Errc::non_finite_value: return "NonFiniteValue";
        case Errc::confidence_out_of_range: return "ConfidenceOutOfRange";
        case Errc::empty_scene: return "EmptyScene";
        case Errc::unknown_class: return "UnknownClass";
        case Errc::insufficient_classes: return "InsufficientClasses";
        case Errc::empty_class_support: return "EmptyClassSupport";
        case Errc::shot_count_mismatch: return "ShotCountMismatch";
        case Errc::duplicate_class: return "DuplicateClass";
        case Errc::unknown_prediction: return "UnknownPrediction";
        case Errc::length_mismatch: return "LengthMismatch";
        case Errc::empty_classifier: return "EmptyClassifier";
        case Errc::empty_run: return "EmptyRun";
        case Errc::frozen_bank: return "FrozenBank";
        case Errc::io_failure: return "IoFailure";
        case Errc::bad_config: return "BadConfig";
    }
    return "UnknownError";
}

} // namespace scope
