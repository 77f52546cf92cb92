#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tokencom {

/// Invalid configuration value (dimension, range, or cross-field constraint).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed wire message or data file. Carries the byte offset (or line
/// number for line-oriented files) where scanning failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed message that violates the agreement protocol, e.g. a
/// selection naming a tokenizer the user never declared.
class ProtocolViolation : public std::runtime_error {
 public:
  explicit ProtocolViolation(const std::string& what) : std::runtime_error(what) {}
};

/// No tokenizer is acceptable to every party that must share one.
class AgreementImpossible : public std::runtime_error {
 public:
  explicit AgreementImpossible(const std::string& what) : std::runtime_error(what) {}
};

/// step() called on an episode whose final slot has already been consumed.
class EpisodeFinished : public std::runtime_error {
 public:
  explicit EpisodeFinished(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tokencom
