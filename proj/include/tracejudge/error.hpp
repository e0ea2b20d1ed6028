#pragma once

#include <stdexcept>
#include <string>

namespace tracejudge {

/// Input data violates a documented precondition (bad trace, misaligned panel, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration file or flag is invalid.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A judge could not produce a judgment. Carries the raw provider output, if any,
/// so callers can archive it.
class JudgeError : public std::runtime_error {
 public:
  JudgeError(const std::string& what, std::string raw = {})
      : std::runtime_error(what), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

}  // namespace tracejudge
