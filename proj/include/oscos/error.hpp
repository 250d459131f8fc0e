#pragma once

#include <stdexcept>
#include <string>

namespace oscos {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File missing, unreadable, unwritable or malformed on disk.
class IoError : public Error {
public:
    using Error::Error;
};

/// Parameters or inputs violate a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A referenced object, slice or resource does not exist.
class NotFoundError : public Error {
public:
    using Error::Error;
};

} // namespace oscos
