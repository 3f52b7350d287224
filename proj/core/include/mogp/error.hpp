#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace mogp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Raised when a Gram matrix cannot be factorized even at the largest jitter.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, double final_jitter)
      : Error(what), final_jitter_(final_jitter) {}
  double final_jitter() const noexcept { return final_jitter_; }

 private:
  double final_jitter_;
};

// Problems reading or parsing a data file; row is the 1-based data row when known.
class IngestionError : public Error {
 public:
  explicit IngestionError(const std::string& what, std::optional<std::size_t> row = std::nullopt);
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  std::optional<std::size_t> row_;
};

class UnsupportedFamily : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

}  // namespace mogp
