#pragma once

#include <stdexcept>
#include <string>

namespace cfmaps {

// Base for every error raised by the library. Subclasses let callers (the CLI
// exit codes and the HTTP status mapping) tell failure modes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector length or feature index does not match the schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A coordinate lies outside the schema's domain box.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A persisted document could not be parsed or lacks a required field.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A persisted document carries a version this build does not understand.
class VersionError : public Error {
 public:
  using Error::Error;
};

// A structurally valid object violates a semantic invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

// The requested target cannot be reached (no regions, or all filtered out).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A query is ill-posed, e.g. the target equals the current prediction.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A size limit was exceeded (exact grid cap).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A referenced file or dataset does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfmaps
