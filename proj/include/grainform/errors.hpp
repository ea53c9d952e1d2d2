#ifndef GRAINFORM_ERRORS_HPP
#define GRAINFORM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace grainform {

// Bad inputs: shape mismatches, out-of-range labels, malformed configs.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training blew up (non-finite loss or gradient).
class DivergedError : public std::runtime_error {
public:
    explicit DivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / decode / format problems.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace grainform

#endif
