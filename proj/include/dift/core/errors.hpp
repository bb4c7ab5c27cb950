#pragma once

#include <stdexcept>
#include <string>

namespace dift {

/// Root of the toolkit's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied something malformed: bad dims, out-of-range point, bad config.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A referenced entity (image id, file) does not exist.
class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Bytes could not be decoded as an image.
class DecodeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// An upload exceeds the configured size limit.
class PayloadTooLargeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// The denoiser (local or remote) failed or is unreachable.
class BackendError : public Error {
public:
    using Error::Error;
};

/// Robust estimation could not produce a model.
class EstimationError : public Error {
public:
    using Error::Error;
};

}  // namespace dift
