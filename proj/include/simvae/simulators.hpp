#pragma once

// Deterministic simulators S: R^K -> R^N with priors over their latent
// domains. Every simulate() is a pure function of z; batch helpers run
// samples in parallel with one RNG substream per sample.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "simvae/raster.hpp"
#include "simvae/rng.hpp"
#include "simvae/tensor.hpp"

namespace simvae::sim {

struct ImageOutput {
  std::size_t height;
  std::size_t width;
};

struct VectorOutput {
  std::size_t length;
};

using OutputModality = std::variant<ImageOutput, VectorOutput>;

enum class PriorKind { Uniform, LogUniform };

/// Marginal prior of one latent. Bounds are in value space (for LogUniform,
/// e.g. 1..1000 Ω); normalization maps them to [-1, 1].
struct LatentPrior {
  PriorKind kind = PriorKind::Uniform;
  double lo = 0.0;
  double hi = 1.0;
};

enum class Invariance { None, Scaling, PointPermutation };

struct SimulatorSpec {
  std::string name;
  std::vector<std::string> latent_names;
  std::vector<LatentPrior> priors;
  /// True when the prior is not a product of the marginals (box plotter).
  bool joint_prior = false;
  OutputModality modality;
  Invariance invariance = Invariance::None;

  std::size_t latent_dim() const noexcept { return latent_names.size(); }
  std::size_t output_dim() const noexcept;
  bool is_image() const noexcept { return std::holds_alternative<ImageOutput>(modality); }
  const ImageOutput& image() const;
};

class Simulator {
 public:
  explicit Simulator(SimulatorSpec spec);
  virtual ~Simulator() = default;

  const SimulatorSpec& spec() const noexcept { return spec_; }
  std::size_t latent_dim() const noexcept { return spec_.latent_dim(); }
  std::size_t output_dim() const noexcept { return spec_.output_dim(); }

  /// Throws DomainError when z is outside the simulator's domain.
  virtual void simulate(std::span<const double> z, std::span<double> out) const = 0;
  std::vector<double> simulate(std::span<const double> z) const;

  /// One draw from the prior. Default: independent marginals.
  virtual void sample_prior(Rng& rng, std::span<double> z) const;
  /// z -> z̄ under a random element of the invariance group. Default: identity.
  virtual void apply_invariance(std::span<double> z, Rng& rng) const;
  /// Nearest point of the domain; used before simulating decoded latents.
  virtual void project_to_domain(std::span<double> z) const;

  /// Affine map of each latent (log10 for LogUniform) from its prior range
  /// onto [-1, 1].
  void normalize(std::span<const double> z, std::span<double> z_net) const;
  void denormalize(std::span<const double> z_net, std::span<double> z) const;

 protected:
  void check_latent_size(std::span<const double> z) const;
  void check_output_size(std::span<const double> out) const;

 private:
  SimulatorSpec spec_;
};

// ------------------------------------------------------------------ box

/// Rectangle outline (intensity 1) with its two diagonals (intensity 0.5).
/// z = (x, y, w, h): lower-left corner and size in unit-square units.
class BoxSimulator final : public Simulator {
 public:
  static constexpr double kMinSize = 0.1;

  BoxSimulator(std::size_t height = 32, std::size_t width = 32);

  using Simulator::simulate;
  void simulate(std::span<const double> z, std::span<double> out) const override;
  void sample_prior(Rng& rng, std::span<double> z) const override;
  void project_to_domain(std::span<double> z) const override;
};

// ------------------------------------------------------------------ polygon

enum class PermutationGroup {
  Dihedral,   // 4 cyclic shifts × optional reversal; preserves the edge set
  Symmetric,  // all 24 orderings
};

/// Closed 4-point polygon, even-odd filled. z = (x1, y1, ..., x4, y4).
class PolygonSimulator final : public Simulator {
 public:
  PolygonSimulator(std::size_t height = 32, std::size_t width = 32,
                   PermutationGroup group = PermutationGroup::Dihedral);

  using Simulator::simulate;
  void simulate(std::span<const double> z, std::span<double> out) const override;
  void apply_invariance(std::span<double> z, Rng& rng) const override;
  void project_to_domain(std::span<double> z) const override;

  PermutationGroup group() const noexcept { return group_; }

 private:
  PermutationGroup group_;
};

using PointOrder = std::array<std::size_t, 4>;
std::vector<PointOrder> dihedral_orders();
std::vector<PointOrder> symmetric_orders();
/// Point i of the result is point order[i] of z.
void reorder_points(std::span<double> z, const PointOrder& order);

// ------------------------------------------------------------------ fourier

/// f(t) = c0 + sum_k a_k cos(kt) + b_k sin(kt), k = 1..5, t in [0, 2π).
/// z = (c0, a1..a5, b1..b5). Plot mode draws the curve sampled at one t per
/// column over the fixed range [-y_max, y_max]; sample mode returns f at N
/// equally spaced t.
class FourierSimulator final : public Simulator {
 public:
  static constexpr std::size_t kHarmonics = 5;
  static constexpr double kCoefficientRange = 0.5;
  static constexpr double kYMax = 3.0;

  static FourierSimulator plot(std::size_t height = 32, std::size_t width = 32);
  static FourierSimulator samples(std::size_t count = 64);

  using Simulator::simulate;
  void simulate(std::span<const double> z, std::span<double> out) const override;

  static double evaluate(std::span<const double> z, double t);
  /// Row a value is drawn on in plot mode (clipped to the canvas).
  long value_row(double f) const;

 private:
  explicit FourierSimulator(OutputModality modality);
};

// ------------------------------------------------------------------ rlc

struct PhysicalParams {
  double f0;  // Hz
  double q;
};

/// f0 = 1/(2π√(LC)), Q = (1/R)√(L/C). Throws DomainError unless R, L, C > 0.
PhysicalParams physical_params(double r, double l, double c);

/// Series RLC measured across the resistor: H(jω) = R / (R + jωL + 1/(jωC)).
/// Output = [gain_dB / g_norm at each frequency, phase / (π/2) at each
/// frequency]; frequencies are log-spaced over [f_lo, f_hi].
class RlcSimulator final : public Simulator {
 public:
  static constexpr double kGainNorm = 60.0;

  explicit RlcSimulator(std::size_t frequencies = 100, double f_lo = 10.0, double f_hi = 1e5,
                        double scale_min = 1e-2, double scale_max = 1e2);

  using Simulator::simulate;
  void simulate(std::span<const double> z, std::span<double> out) const override;
  /// (R, L, C) -> (R/x, L/x, Cx), x log-uniform on [scale_min, scale_max]
  /// restricted to values that keep z̄ inside the prior box.
  void apply_invariance(std::span<double> z, Rng& rng) const override;
  void project_to_domain(std::span<double> z) const override;

  const std::vector<double>& frequencies() const noexcept { return freqs_; }
  /// Applies a specific scale factor.
  static void rescale(std::span<double> z, double x);

 private:
  std::vector<double> freqs_;
  double log_scale_min_;
  double log_scale_max_;
};

// ------------------------------------------------------------------ identity

/// out = z on [-1, 1]^K. Used to test plumbing with exactly invertible models.
class IdentitySimulator final : public Simulator {
 public:
  explicit IdentitySimulator(std::size_t dim = 4);
  using Simulator::simulate;
  void simulate(std::span<const double> z, std::span<double> out) const override;
};

// ------------------------------------------------------------------ registry

struct SimulatorOptions {
  std::string name = "box";
  std::size_t height = 32;
  std::size_t width = 32;
  std::string fourier_mode = "plot";  // plot | sample
  std::size_t fourier_samples = 64;
  PermutationGroup permutation_group = PermutationGroup::Dihedral;
  std::size_t identity_dim = 4;
};

const std::vector<std::string>& simulator_names();
/// Throws std::invalid_argument listing the valid names for unknown ones.
std::unique_ptr<Simulator> make_simulator(const SimulatorOptions& options);

// ------------------------------------------------------------------ batches

/// `count` prior samples, row i drawn from substream (seed, stream, first + i).
Tensor sample_prior_batch(const Simulator& sim, std::size_t count, std::uint64_t seed,
                          std::string_view stream, std::uint64_t first = 0);
/// Row-wise simulate; rows are independent so this runs in parallel.
Tensor simulate_batch(const Simulator& sim, const Tensor& z);
Tensor normalize_batch(const Simulator& sim, const Tensor& z);
Tensor denormalize_batch(const Simulator& sim, const Tensor& z_net);
/// Row-wise apply_invariance with one substream per row.
Tensor apply_invariance_batch(const Simulator& sim, const Tensor& z, std::uint64_t seed,
                              std::string_view stream);

}  // namespace simvae::sim
