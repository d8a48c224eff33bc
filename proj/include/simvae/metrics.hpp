#pragma once

// Histogram mutual information between latents and factors, the MI matrix
// (MIM), the MI gap (MIG), invariance-aware ground truth, and the RLC
// f0/Q correlation analysis.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "simvae/raster.hpp"
#include "simvae/simulators.hpp"
#include "simvae/tensor.hpp"

namespace simvae::metrics {

enum class BinStrategy { EqualMass, EqualWidth };

std::string_view strategy_name(BinStrategy s) noexcept;
BinStrategy parse_strategy(std::string_view name);

struct BinningConfig {
  std::size_t bins = 20;
  BinStrategy strategy = BinStrategy::EqualMass;
  std::size_t samples = 50000;

  /// Throws std::invalid_argument unless 2 <= bins <= 65535 and samples >= 1.
  void validate() const;
  /// True when samples < 100·bins; estimates are then biased upward.
  bool undersampled() const noexcept { return samples < 100 * bins; }
};

/// Collects non-fatal notes (constant variables, small samples).
using Warnings = std::vector<std::string>;

/// Bin index per sample. Equal-mass cuts sit at the j/B sample quantiles
/// (linear interpolation between order statistics); a value equal to a cut
/// goes to the upper bin, so equal values always share a bin.
std::vector<std::uint16_t> discretize(std::span<const double> values, const BinningConfig& cfg);

/// Shannon entropy (nats) of a binned variable.
double entropy(std::span<const std::uint16_t> bins, std::size_t bin_count);
/// Mutual information (nats) of two binned variables.
double mutual_information(std::span<const std::uint16_t> a, std::span<const std::uint16_t> b,
                          std::size_t bin_count);

/// MI(a, b) / H(b). A constant b gives 0 and a warning.
double normalized_mi(std::span<const double> a, std::span<const double> b, const BinningConfig& cfg,
                     Warnings* warnings = nullptr);

struct MIMatrix {
  std::vector<std::string> row_labels;  // latents (Z or V̄)
  std::vector<std::string> col_labels;  // factors V
  Tensor values;                        // rows × cols

  double at(std::size_t r, std::size_t c) const { return values(r, c); }
  /// Mean of the entries with r == c, and of the rest (square matrices).
  double diagonal_mean() const;
  double off_diagonal_mean() const;
};

/// Entry (j, k) = normalized_mi(Z[:, j], V[:, k]).
MIMatrix mim(const Tensor& z, const Tensor& v, const BinningConfig& cfg, std::vector<std::string> z_labels = {},
             std::vector<std::string> v_labels = {}, Warnings* warnings = nullptr);

struct MigResult {
  double mig = 0.0;
  std::vector<double> gaps;  // per factor: top-1 minus top-2 over latents
};

/// Needs at least two latent rows.
MigResult mig(const MIMatrix& m);

struct GroundTruth {
  MIMatrix matrix;
  MigResult gap;
};

/// Samples V from the prior, V̄ = apply_invariance(V), returns MIM(V̄, V) and
/// its MIG. Without an invariance this is MIM(V, V).
GroundTruth ground_truth_mim_mig(const sim::Simulator& sim, const BinningConfig& cfg, std::uint64_t seed,
                                 Warnings* warnings = nullptr);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares y = intercept + slope·x; r2 = 1 - SS_res/SS_tot.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct RlcCorrelation {
  LinearFit f0;  // f0(μ) against f0(z), kHz
  LinearFit q;
  std::size_t rows = 0;  // after filtering
};

struct RlcFilter {
  double max_f0 = 1e4;  // Hz
  double max_q = 4.0;
};

/// Rows of z (true R, L, C) and mu (decoded R, L, C) are filtered on the true
/// f0 and Q; throws std::invalid_argument if fewer than 10 remain.
RlcCorrelation rlc_correlation(const Tensor& z, const Tensor& mu, const RlcFilter& filter = {});

// ------------------------------------------------------------------ export

/// "latent,<factor labels>" header, one row per latent.
std::string mim_csv(const MIMatrix& m);
/// One cell_size × cell_size square per entry, gray = clamp(value, 0, 1).
Canvas mim_heatmap(const MIMatrix& m, std::size_t cell_size = 16);
nlohmann::json mig_summary(const MIMatrix& m, const MigResult& g, const BinningConfig& cfg);

}  // namespace simvae::metrics
