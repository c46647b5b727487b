#ifndef USSEG_ERRORS_HPP
#define USSEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace usseg {

// Unsupported or malformed file content (bad header field, unknown encoding).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error("format: " + msg) {}
};

// Header and payload disagree (size mismatch, truncated blob).
class IntegrityError : public std::runtime_error {
public:
    explicit IntegrityError(const std::string& msg) : std::runtime_error("integrity: " + msg) {}
};

// Data violates a documented invariant (NaN values, degenerate input).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error("validation: " + msg) {}
};

// Run configuration is inconsistent or contains unknown keys.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error("config: " + msg) {}
};

// A requested class is missing from the sampling domain.
class SamplingError : public std::runtime_error {
public:
    explicit SamplingError(const std::string& msg) : std::runtime_error("sampling: " + msg) {}
};

// Tensor shapes are inconsistent; message names the pipeline stage.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape: " + msg) {}
};

} // namespace usseg

#endif
