#pragma once

#include <stdexcept>
#include <string>

namespace glyphalign {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: empty text, malformed config, out-of-range parameters.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical failure, e.g. a rank-deficient interpolation system.
/// The CLI maps these to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

class EmptyTextError : public ValidationError {
public:
    EmptyTextError() : ValidationError("text must not be empty") {}
};

class UnsupportedCodepointError : public ValidationError {
public:
    explicit UnsupportedCodepointError(char32_t cp)
        : ValidationError("no glyph available for U+" + to_hex(cp)), codepoint(cp) {}
    char32_t codepoint;

private:
    static std::string to_hex(char32_t cp);
};

class DegenerateSourceError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NonFiniteError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DimensionMismatchError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyGroundTruthError : public ValidationError {
public:
    EmptyGroundTruthError() : ValidationError("ground truth must not be empty") {}
};

class EmptyInputError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class GlyphMissingError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Duplicate or collinear control points make the interpolation system singular.
class SingularSystemError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A sample could not be placed within the configured retry budget.
class PlacementFailureError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace glyphalign
