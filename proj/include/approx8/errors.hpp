#pragma once

#include <stdexcept>
#include <string>

namespace approx8 {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// ConfigError -> 2, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (data type spec, perf config, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad input data (non-finite values, malformed buffers).
class InputError : public Error {
 public:
  using Error::Error;
};

/// API misuse: shape mismatch, codebook/tensor mismatch.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Carries the byte offset where parsing failed.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : InputError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Divergence or shape errors inside the training loop.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch, int batch)
      : Error(what + " (epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch) + ")"),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace approx8
