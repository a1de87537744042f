#pragma once

#include <stdexcept>
#include <string>

namespace scope {

// One code per failure mode the pipeline can report. Codes map onto CLI
// exit status 2 (input/config) at the tool boundary.
enum class Errc {
    empty_mask,
    dim_mismatch,
    degenerate_vector,
    empty_context,
    bad_magic,
    bad_version,
    truncated_file,
    non_finite_value,
    confidence_out_of_range,
    empty_scene,
    unknown_class,
    insufficient_classes,
    empty_class_support,
    shot_count_mismatch,
    duplicate_class,
    unknown_prediction,
    length_mismatch,
    empty_classifier,
    empty_run,
    frozen_bank,
    io_failure,
    bad_config,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace scope
