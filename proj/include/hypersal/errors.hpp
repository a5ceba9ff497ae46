#pragma once

#include <stdexcept>
#include <string>

namespace hypersal {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor extents do not match what an operation requires.
struct ShapeError : Error {
    using Error::Error;
};

/// An argument value is outside its legal range.
struct ValueError : Error {
    using Error::Error;
};

/// Misuse of the autodiff tape (loss not scalar, loss not recorded, ...).
struct GraphError : Error {
    using Error::Error;
};

/// File-level I/O failure.
struct IoError : Error {
    using Error::Error;
};

/// A binary file does not start with the expected magic bytes.
struct BadMagicError : IoError {
    using IoError::IoError;
};

/// A binary file is shorter (or longer) than its header promises.
struct TruncatedFileError : IoError {
    using IoError::IoError;
};

/// A data buffer contains NaN or infinite values.
struct NonFiniteError : IoError {
    using IoError::IoError;
};

/// A run configuration document failed validation; carries the field path.
struct ConfigError : Error {
    ConfigError(std::string field_path, const std::string& message)
        : Error(field_path + ": " + message), field(std::move(field_path)) {}

    std::string field;
};

}  // namespace hypersal
