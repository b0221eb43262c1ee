#ifndef XATTN_ERRORS_HPP
#define XATTN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace xattn {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/matrix dimension disagreement.
class InvalidShapeError : public Error {
public:
    explicit InvalidShapeError(const std::string& msg) : Error(msg) {}
};

/// Bad configuration value, window, or missing required input.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Mask selects too few pixels for statistics.
class DegenerateMaskError : public Error {
public:
    explicit DegenerateMaskError(const std::string& msg) : Error(msg) {}
};

/// Inversion cannot solve for a noise map (sigma_t = 0 or similar).
class InversionError : public Error {
public:
    explicit InversionError(const std::string& msg) : Error(msg) {}
};

/// AttentionPlan references unknown layers or is otherwise unusable.
class PlanError : public Error {
public:
    explicit PlanError(const std::string& msg) : Error(msg) {}
};

/// Denoiser backbone unavailable or failed.
class BackboneError : public Error {
public:
    explicit BackboneError(const std::string& msg) : Error(msg) {}
};

/// File could not be read, written, or parsed.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace xattn

#endif // XATTN_ERRORS_HPP
