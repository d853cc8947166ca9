#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace msds {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class OutOfBoundsError : public Error {
  public:
    using Error::Error;
};

class EmptyDatasetError : public Error {
  public:
    using Error::Error;
};

class IncompatibleGridError : public Error {
  public:
    using Error::Error;
};

class InvalidParameterError : public Error {
  public:
    using Error::Error;
};

class DuplicateDatasetError : public Error {
  public:
    using Error::Error;
};

class NotFoundError : public Error {
  public:
    using Error::Error;
};

/// Malformed or truncated snapshot / wire bytes.
class FormatError : public Error {
  public:
    using Error::Error;
};

/// A persisted dataset graph does not match the live index.
class StaleGraphError : public Error {
  public:
    using Error::Error;
};

/// Brute-force oracle instance exceeds its hard size guard.
class GuardExceededError : public Error {
  public:
    using Error::Error;
};

/// One or more data sources failed during a fan-out; carries their ids.
class PartialResultError : public Error {
  public:
    PartialResultError(const std::string& what, std::vector<std::string> failed)
        : Error(what), failed_sources(std::move(failed)) {}

    std::vector<std::string> failed_sources;
};

class TransportError : public Error {
  public:
    using Error::Error;
};

} // namespace msds
