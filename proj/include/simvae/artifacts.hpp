#pragma once

// Figure artifacts built from trained models: reconstruction grids, latent
// traversals and the RLC curve/correlation tables. Pure functions of their
// inputs; the CLI only decides file names.

#include <string>
#include <vector>

#include "simvae/metrics.hpp"
#include "simvae/models.hpp"
#include "simvae/raster.hpp"
#include "simvae/simulators.hpp"
#include "simvae/trainer.hpp"

namespace simvae {

/// Row labels of the reconstruction quartet, top to bottom.
inline constexpr const char* kQuartetRows[4] = {"x", "g", "s_mu", "g_mu"};

/// (4·H) × (count·W) mosaic; rows S(z), G(z), S(μ), G(μ), one column per sample.
Canvas grid_mosaic(const EvalTable& table, const sim::ImageOutput& image);
/// Quartet row `row` (0..3) of sample `i` as an H × W canvas.
Canvas quartet_image(const EvalTable& table, std::size_t i, std::size_t row, const sim::ImageOutput& image);

/// Vector simulators. For RLC: sample,freq,gain_X,gain_Xbar,gain_X_zbar,
/// gain_Xbar_zbar,phase_X,... with gain in dB and phase in radians. Other
/// vector outputs: sample,index,X,Xbar,X_zbar,Xbar_zbar.
std::string quartet_csv(const sim::Simulator& sim, const EvalTable& table);

/// `steps` evenly spaced points on [-1, 1]; a single step gives {0}.
std::vector<double> traversal_points(std::size_t steps);
/// Decoder outputs [steps, N] with latent `latent` swept and the rest at 0.
/// Throws std::out_of_range for a bad latent index.
Tensor traversal_outputs(Decoder& decoder, std::size_t latent, std::size_t steps);
/// One frame per row of `outputs`, left to right: H × (steps·W).
Canvas traversal_strip(const Tensor& outputs, const sim::ImageOutput& image);
/// Vector outputs: one row per frame, step,value,out_0..out_{N-1}.
std::string traversal_csv(const Tensor& outputs, const std::vector<double>& points);

/// Encoder means for S(z), simulated and encoded `chunk` rows at a time so
/// large metric samples of images stay small in memory.
Tensor encode_simulated(const sim::Simulator& sim, Encoder& encoder, const Tensor& z, std::size_t chunk = 1024);
/// MIM(μ, V) with rows labelled mu_<latent> and columns the latent names.
metrics::MIMatrix model_mim(const sim::Simulator& sim, const Tensor& z, const Tensor& mu_net,
                            const metrics::BinningConfig& cfg, metrics::Warnings* warnings = nullptr);

/// Per filtered row: f0_true_khz,f0_mu_khz,q_true,q_mu.
std::string rlc_correlation_csv(const Tensor& z, const Tensor& mu, const metrics::RlcFilter& filter);
nlohmann::json rlc_correlation_json(const metrics::RlcCorrelation& c);

}  // namespace simvae
