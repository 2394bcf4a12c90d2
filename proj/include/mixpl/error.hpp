#pragma once

#include <stdexcept>
#include <string>

namespace mixpl {

/// Base error for every failure surfaced by the library. Carries the name of
/// the module that raised it so the CLI can report provenance.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Malformed input document. `location` is a human-readable position
/// (byte offset, JSON pointer, ...).
class ParseError : public Error {
 public:
  ParseError(std::string module, const std::string& what, std::string location)
      : Error(std::move(module), what + " at " + location), location_(std::move(location)) {}

  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

/// Input that parsed but violates a contract (unknown ids, out-of-range values).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The pseudo-label cache was sampled before anything was stored.
class CacheWarmupError : public Error {
 public:
  CacheWarmupError() : Error("pseudo-pipeline", "pseudo-label cache is empty (warm-up)") {}
};

}  // namespace mixpl
