#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ntrr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Index outside its valid range (class targets, token ids).
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered while debug checks are enabled, or a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Text input that does not parse; carries a 1-based line number (0 if unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Damaged or foreign binary file; carries the byte offset where reading failed.
class CorruptionError : public Error {
 public:
  CorruptionError(std::size_t offset, const std::string& what)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// File-system failure with the offending path in the message.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ntrr
