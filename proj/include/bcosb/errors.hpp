/*
 * Copyright 2026 the bcosb authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bcosb {

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A caller passed a structurally invalid argument (bad index, shape mismatch).
class InvalidArgument : public Error {
  public:
    explicit InvalidArgument(const std::string& what) : Error(what) {}
};

/// A value is outside the mathematical domain of an operation (e.g. log of 0).
class DomainError : public Error {
  public:
    explicit DomainError(const std::string& what) : Error(what) {}
};

/// A scenario / run configuration is inconsistent or references unknown keys.
class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Malformed external input (CSV, config file). Carries a 1-based line number
/// when one is known; line 0 means "not attributable to a single line".
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

/// Numerical breakdown (conditioning, excessive negative rate). Carries the
/// 1-based tone index where the failure happened; 0 when not tone-specific.
class NumericalFailure : public Error {
  public:
    NumericalFailure(const std::string& what, std::size_t tone = 0)
        : Error(tone ? what + " (tone " + std::to_string(tone) + ")" : what), tone_(tone) {}
    std::size_t tone() const { return tone_; }

  private:
    std::size_t tone_;
};

}  // namespace bcosb
