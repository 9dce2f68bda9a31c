#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ghostrnn {

/// Bad caller input: shapes, ranges, empty collections.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed file contents. `offset` is the byte position of the offense.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A NaN or infinity showed up during an iterative computation.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, long iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

}  // namespace ghostrnn
