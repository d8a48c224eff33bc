#pragma once

#include <cstdint>
#include <vector>

#include "simvae/tape.hpp"

namespace simvae {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// ADAM with bias correction. Moments are kept per parameter, in the order
/// of the ParameterSet they were created for; frozen parameters are skipped.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from the gradients currently held in `params`.
  /// Throws NumericError naming the first parameter with a non-finite gradient.
  void step(ParameterSet& params);

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return t_; }

  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }
  /// Restores state saved from another Adam on an identically shaped set.
  void restore(std::uint64_t t, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  void ensure_state(const ParameterSet& params);

  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace simvae
