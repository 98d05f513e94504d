#pragma once

#include <stdexcept>
#include <string>

namespace wfo {

// Error classes map one-to-one onto CLI exit codes:
//   2 = bad input / parse failure, 3 = numerical/degenerate, 4 = measurement validity.
enum class ErrorClass : int { input = 2, numerical = 3, validity = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string kind, const std::string& message)
        : std::runtime_error(message), class_(cls), kind_(std::move(kind)) {}

    ErrorClass error_class() const noexcept { return class_; }
    int exit_code() const noexcept { return static_cast<int>(class_); }
    const std::string& kind() const noexcept { return kind_; }

private:
    ErrorClass class_;
    std::string kind_;
};

struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error(ErrorClass::input, "parse", m) {}
};

struct InputError : Error {
    explicit InputError(const std::string& m) : Error(ErrorClass::input, "input", m) {}
};

// Point/field outside the supported domain (unit disk, model range, ...).
struct DomainError : Error {
    explicit DomainError(const std::string& m) : Error(ErrorClass::input, "domain", m) {}
};

struct UnsupportedOrderError : Error {
    explicit UnsupportedOrderError(const std::string& m)
        : Error(ErrorClass::input, "unsupported-order", m) {}
};

// Map too coarsely sampled for the requested operation.
struct ResolutionError : Error {
    explicit ResolutionError(const std::string& m) : Error(ErrorClass::input, "resolution", m) {}
};

// Quadrature / integration did not reach the requested accuracy.
struct AccuracyError : Error {
    AccuracyError(const std::string& m, double residual)
        : Error(ErrorClass::numerical, "accuracy", m), estimated_residual(residual) {}
    double estimated_residual;
};

// |beta| >= 1: a wavefront slope no Shack-Hartmann geometry can produce.
struct NonphysicalGradientError : Error {
    explicit NonphysicalGradientError(const std::string& m)
        : Error(ErrorClass::numerical, "nonphysical-gradient", m) {}
};

struct DegenerateLayoutError : Error {
    explicit DegenerateLayoutError(const std::string& m)
        : Error(ErrorClass::numerical, "degenerate-layout", m) {}
};

struct StitchingError : Error {
    explicit StitchingError(const std::string& m) : Error(ErrorClass::numerical, "stitching", m) {}
};

struct AliasingError : Error {
    explicit AliasingError(const std::string& m) : Error(ErrorClass::numerical, "aliasing", m) {}
};

// First-order thin-element formula used outside its validity range.
struct ApproximationValidityError : Error {
    explicit ApproximationValidityError(const std::string& m)
        : Error(ErrorClass::numerical, "approximation-validity", m) {}
};

struct MeasurementValidityError : Error {
    explicit MeasurementValidityError(const std::string& m)
        : Error(ErrorClass::validity, "measurement-validity", m) {}
};

}  // namespace wfo
