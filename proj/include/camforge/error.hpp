// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace camforge {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class InfeasibleSpec : public Error {
 public:
  using Error::Error;
};

class EmptyScene : public Error {
 public:
  using Error::Error;
};

class DegenerateSensor : public Error {
 public:
  using Error::Error;
};

class ImagesMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyBatch : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class AllClipped : public Error {
 public:
  using Error::Error;
};

class EmptyCatalog : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; carries the 1-based row that failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Evaluation of one genome failed; the optimizer aborts the run.
class EvaluationFailed : public Error {
 public:
  EvaluationFailed(const std::string& what, std::size_t genome_id)
      : Error("genome " + std::to_string(genome_id) + ": " + what),
        genome_id_(genome_id) {}
  std::size_t genome_id() const noexcept { return genome_id_; }

 private:
  std::size_t genome_id_;
};

}  // namespace camforge
