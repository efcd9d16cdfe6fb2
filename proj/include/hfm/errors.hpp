#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hfm {

// Geometric input that is formally valid but has no usable answer
// (coincident points, a point sitting exactly at the origin, ...).
class DegenerateInput : public std::invalid_argument {
public:
    explicit DegenerateInput(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed binary or CSV payload. Carries the byte offset at which the
// problem was detected so corrupt files can be diagnosed directly.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Filesystem-level failure while emitting an artifact (as opposed to
// FormatError, which means the bytes were readable but malformed).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimization produced a non-finite objective. Carries the step at which
// the divergence was detected.
class TrainingFailure : public std::runtime_error {
public:
    TrainingFailure(const std::string& msg, std::size_t step)
        : std::runtime_error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace hfm
