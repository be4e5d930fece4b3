#pragma once

#include <stdexcept>
#include <string>

namespace ace {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration (bad section list, bad thresholds, missing files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Structurally invalid input (malformed delta op, bad vector dims).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Document carries a format version this build does not understand.
class UnsupportedVersionError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Embedding provider failure.
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Chat backend failure after retries were exhausted.
class GatewayError : public Error {
 public:
  using Error::Error;
};

/// Scripted backend received a request with no matching fixture.
class FixtureMissError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// A run directory is missing required artifacts.
class MissingArtifactsError : public Error {
 public:
  using Error::Error;
};

}  // namespace ace
