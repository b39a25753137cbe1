#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "tracegraph/cost.hpp"

namespace tracegraph {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An id (operation, variable, session, prompt) was not present.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// An API call was made in the wrong recorder/agent state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: unknown strategy, impossible budget, bad parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A page index or similar positional argument was out of range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A malformed trace document. `offset` is the byte position where parsing
/// stopped, or 0 for schema errors that have no meaningful position.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// An imported document broke a graph invariant. `code()` is the violation
/// code reported by validate(), e.g. "MISSING_ENDPOINT".
class ValidationError : public Error {
 public:
  ValidationError(std::string code, const std::string& what)
      : Error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// A tool invocation the agent got wrong. Always turned into an observation.
class ToolError : public Error {
 public:
  using Error::Error;
};

/// An assistant turn carried a tool directive that could not be decoded.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Transport-level failure talking to a model or embedding service.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// An attribution run aborted; carries the cost spent before the failure.
class RunError : public Error {
 public:
  RunError(const std::string& what, CostMeter partial)
      : Error(what), partial_(partial) {}
  const CostMeter& partial_meter() const noexcept { return partial_; }

 private:
  CostMeter partial_;
};

/// Exhaustive search was asked to enumerate more operations than allowed.
class TooLarge : public Error {
 public:
  using Error::Error;
};

class NotSequential : public Error {
 public:
  using Error::Error;
};

class NoFault : public Error {
 public:
  using Error::Error;
};

}  // namespace tracegraph
