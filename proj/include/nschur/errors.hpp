#pragma once

/// \file
/// Exception types raised by the library. Every error derives from
/// nschur::Error so callers can catch the family at once.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace nschur {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(const std::string& what, std::ptrdiff_t expected, std::ptrdiff_t got)
      : Error(what + ": expected " + std::to_string(expected) + ", got " + std::to_string(got)) {}
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidPermutation : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  malformed_header,
  unsupported_field,
  pattern_only,
  index_out_of_bounds,
  malformed_entry,
};

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

/// Raised by assemble_dbbd when two distinct interior blocks are coupled.
class AssemblyError : public Error {
 public:
  AssemblyError(std::ptrdiff_t i, std::ptrdiff_t j, std::ptrdiff_t block_i, std::ptrdiff_t block_j)
      : Error("separator property violated: entry (" + std::to_string(i) + ", " + std::to_string(j) +
              ") couples block " + std::to_string(block_i) + " and block " + std::to_string(block_j)),
        i(i),
        j(j),
        block_i(block_i),
        block_j(block_j) {}

  std::ptrdiff_t i, j, block_i, block_j;
};

/// Non-positive pivot during Cholesky. `block` is -1 for a standalone factorization.
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(std::ptrdiff_t pivot, std::ptrdiff_t block = -1)
      : Error(block < 0 ? "matrix not positive definite: pivot " + std::to_string(pivot)
                        : "block " + std::to_string(block) + " not positive definite: pivot " +
                              std::to_string(pivot)),
        pivot(pivot),
        block(block) {}

  std::ptrdiff_t pivot;
  std::ptrdiff_t block;
};

class IndefiniteOperator : public Error {
 public:
  using Error::Error;
};

class Stagnation : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// A build path requested something its contract forbids (e.g. R_Gamma under M2).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// Wraps an error from one stage of the full solve pipeline.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage(std::move(stage)) {}

  std::string stage;
};

}  // namespace nschur
