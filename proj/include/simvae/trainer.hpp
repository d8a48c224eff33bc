#pragma once

// Two-stage training: distil the simulator into a decoder, then train an
// encoder through the frozen decoder. A supervised baseline regresses z
// directly. Every batch is fresh prior samples keyed by (seed, step), so runs
// are reproducible and resumable at any step.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "simvae/adam.hpp"
#include "simvae/checkpoint.hpp"
#include "simvae/models.hpp"
#include "simvae/simulators.hpp"

namespace simvae {

enum class Stage { Decoder, Encoder, Baseline };

std::string_view stage_name(Stage s) noexcept;
/// "decoder" | "encoder" | "baseline"; throws std::invalid_argument otherwise.
Stage parse_stage(std::string_view name);

struct StageConfig {
  Stage stage = Stage::Decoder;
  std::size_t steps = 20000;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1000;
  /// Size of the held-out set used for eval_loss.
  std::size_t eval_count = 1000;
  double kl_weight = 0.0;
  /// Encoder stage: decode μ + σ⊙ε (true) or μ alone (false).
  bool sampled_z = true;

  /// Throws std::invalid_argument unless steps, batch_size >= 1 (steps may be
  /// 0), lr > 0 and eval_every >= 1.
  void validate() const;
};

struct EvalPoint {
  std::size_t step = 0;
  double train_loss = 0.0;  // mean batch loss since the previous point
  double eval_loss = 0.0;   // held-out loss at this step
  double seconds = 0.0;     // wall clock since the start of the run, if recorded
};

struct RunRecord {
  std::vector<EvalPoint> points;
  /// Loss of every training batch, in step order.
  std::vector<double> batch_losses;

  /// Throws std::invalid_argument unless steps strictly increase.
  void add(const EvalPoint& p);
  /// step,train_loss,eval_loss,seconds
  std::string csv() const;

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

/// Mean of the first and last `window` entries (fewer if the series is short).
std::pair<double, double> loss_trend(const std::vector<double>& losses, std::size_t window = 100);

struct TrainOptions {
  /// Continue from a checkpoint written by the same stage and config.
  const Checkpoint* resume = nullptr;
  /// Called with the current checkpoint at every eval point (and the end).
  std::function<void(const Checkpoint&)> on_checkpoint;
  /// Called after every eval point, e.g. for progress output.
  std::function<void(const EvalPoint&)> on_eval;
  /// Record wall-clock seconds; off keeps the CSV byte-identical across runs.
  bool record_time = false;
};

struct TrainResult {
  Checkpoint checkpoint;
  RunRecord record;
};

/// Root seed of batch `step`; also what NumericError reports.
std::uint64_t batch_seed(std::uint64_t seed, std::size_t step) noexcept;
/// Prior samples of training batch `step`.
Tensor training_batch(const sim::Simulator& sim, std::uint64_t seed, std::size_t step, std::size_t batch_size);
/// First `count` held-out prior samples; disjoint stream from training data.
Tensor heldout_latents(const sim::Simulator& sim, std::uint64_t seed, std::size_t count);

TrainResult train_decoder(const sim::Simulator& sim, Decoder& decoder, const StageConfig& config,
                          const TrainOptions& options = {});

/// Freezes the decoder for the duration of the stage; its parameters are
/// never written.
TrainResult train_encoder(const sim::Simulator& sim, Decoder& decoder, Encoder& encoder,
                          const StageConfig& config, const TrainOptions& options = {});

TrainResult train_supervised_baseline(const sim::Simulator& sim, Encoder& encoder, const StageConfig& config,
                                      const TrainOptions& options = {});

/// Held-out reconstructions: S(z), G(z), S(μ), G(μ) per sample, plus the
/// latents. μ is denormalized and projected to the simulator's domain before
/// simulating.
struct EvalTable {
  Tensor z;       // true latents
  Tensor z_net;   // normalized
  Tensor mu_net;  // encoder mean
  Tensor mu;      // denormalized, projected
  Tensor x;       // S(z)
  Tensor g;       // G(z_net)
  Tensor s_mu;    // S(mu)
  Tensor g_mu;    // G(mu_net)

  std::size_t rows() const noexcept { return z.rows(); }
};

EvalTable evaluate(const sim::Simulator& sim, Decoder& decoder, Encoder& encoder, std::size_t count,
                   std::uint64_t seed);

/// Restores a model from a stage checkpoint (parameters only).
void load_model(ParameterSet& params, const Checkpoint& ckpt);

}  // namespace simvae
