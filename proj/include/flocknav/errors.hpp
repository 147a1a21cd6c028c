#pragma once

#include <stdexcept>
#include <string>

namespace flocknav {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a prediction snapshot carries no usable entries.
struct MissingPrediction : Error {
    explicit MissingPrediction(const std::string& msg) : Error(msg) {}
};

// Raised when an objective or gradient evaluates to NaN/inf.
struct NonFiniteCost : Error {
    explicit NonFiniteCost(const std::string& msg) : Error(msg) {}
};

// Raised on malformed config or log input.
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Raised when config contents violate the documented constraints.
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Raised when two logs cannot be compared (incompatible fields or tick ranges).
struct SchemaMismatch : Error {
    explicit SchemaMismatch(const std::string& msg) : Error(msg) {}
};

}  // namespace flocknav
