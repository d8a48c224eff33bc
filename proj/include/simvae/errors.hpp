#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace simvae {

/// Operand shapes do not conform for the named operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input lies outside the domain a simulator or transform accepts.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A NaN or Inf showed up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::int64_t step = -1,
                        std::uint64_t batch_seed = 0)
      : std::runtime_error(what), step_(step), batch_seed_(batch_seed) {}

  std::int64_t step() const noexcept { return step_; }
  std::uint64_t batch_seed() const noexcept { return batch_seed_; }

 private:
  std::int64_t step_;
  std::uint64_t batch_seed_;
};

/// Misuse of the gradient tape (double backward, non-scalar loss, ...).
class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed file contents (checkpoint, PGM, config).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace simvae
