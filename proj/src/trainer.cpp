#include "simvae/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "simvae/errors.hpp"
#include "simvae/io.hpp"

namespace simvae {

std::string_view stage_name(Stage s) noexcept {
  switch (s) {
    case Stage::Decoder: return "decoder";
    case Stage::Encoder: return "encoder";
    case Stage::Baseline: return "baseline";
  }
  return "decoder";
}

Stage parse_stage(std::string_view name) {
  for (auto s : {Stage::Decoder, Stage::Encoder, Stage::Baseline})
    if (stage_name(s) == name) return s;
  throw std::invalid_argument("unknown stage '" + std::string(name) + "' (valid: decoder, encoder, baseline)");
}

void StageConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("stage config: batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("stage config: lr must be positive");
  if (eval_every < 1) throw std::invalid_argument("stage config: eval_every must be >= 1");
  if (eval_count < 1) throw std::invalid_argument("stage config: eval_count must be >= 1");
  if (!(kl_weight >= 0.0)) throw std::invalid_argument("stage config: kl_weight must be >= 0");
}

// ------------------------------------------------------------------ record

void RunRecord::add(const EvalPoint& p) {
  if (!points.empty() && p.step <= points.back().step)
    throw std::invalid_argument("run record: step " + std::to_string(p.step) + " does not follow step " +
                                std::to_string(points.back().step));
  points.push_back(p);
}

std::string RunRecord::csv() const {
  CsvWriter out({"step", "train_loss", "eval_loss", "seconds"});
  for (const auto& p : points)
    out.add_row(std::vector<std::string>{std::to_string(p.step), format_double(p.train_loss),
                                         format_double(p.eval_loss), format_double(p.seconds)});
  return out.str();
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) pts.push_back({p.step, p.train_loss, p.eval_loss, p.seconds});
  return {{"points", pts}, {"batch_losses", batch_losses}};
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    for (const auto& p : j.at("points"))
      r.add({p.at(0).get<std::size_t>(), p.at(1).get<double>(), p.at(2).get<double>(), p.at(3).get<double>()});
    r.batch_losses = j.at("batch_losses").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("run record: ") + e.what());
  }
  return r;
}

std::pair<double, double> loss_trend(const std::vector<double>& losses, std::size_t window) {
  if (losses.empty()) return {0.0, 0.0};
  const std::size_t w = std::min(window, losses.size());
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    head += losses[i];
    tail += losses[losses.size() - w + i];
  }
  return {head / static_cast<double>(w), tail / static_cast<double>(w)};
}

// ------------------------------------------------------------------ data

std::uint64_t batch_seed(std::uint64_t seed, std::size_t step) noexcept {
  return stream_seed(seed, "data", {static_cast<std::uint64_t>(step)});
}

Tensor training_batch(const sim::Simulator& sim, std::uint64_t seed, std::size_t step, std::size_t batch_size) {
  return sim::sample_prior_batch(sim, batch_size, batch_seed(seed, step), "sample");
}

Tensor heldout_latents(const sim::Simulator& sim, std::uint64_t seed, std::size_t count) {
  return sim::sample_prior_batch(sim, count, stream_seed(seed, "heldout"), "sample");
}

namespace {

Tensor noise(std::uint64_t seed, std::size_t step, std::size_t rows, std::size_t cols) {
  Rng rng = stream(seed, "noise", {static_cast<std::uint64_t>(step)});
  Tensor eps({rows, cols});
  for (double& v : eps.data()) v = rng.normal();
  return eps;
}

using BatchLoss = std::function<Var(Tape&, std::size_t step, const Tensor& z)>;
using HeldoutLoss = std::function<double()>;

Checkpoint make_checkpoint(const ParameterSet& params, const Adam& adam, const StageConfig& cfg, std::size_t step,
                           const RunRecord& record) {
  Checkpoint ckpt;
  export_parameters(params, ckpt);
  export_adam(adam, params, ckpt);
  ckpt.metadata["stage"] = stage_name(cfg.stage);
  ckpt.metadata["step"] = step;
  ckpt.metadata["seed"] = cfg.seed;
  ckpt.metadata["batch_size"] = cfg.batch_size;
  ckpt.metadata["lr"] = cfg.lr;
  ckpt.metadata["record"] = record.to_json();
  return ckpt;
}

TrainResult run_stage(const sim::Simulator& sim, ParameterSet& params, const StageConfig& cfg,
                      const TrainOptions& opt, const BatchLoss& batch_loss, const HeldoutLoss& heldout_loss) {
  cfg.validate();
  Adam adam(AdamConfig{.lr = cfg.lr});
  RunRecord record;
  std::size_t start = 0;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return opt.record_time ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() : 0.0;
  };

  if (opt.resume != nullptr) {
    const auto& meta = opt.resume->metadata;
    try {
      if (meta.at("stage").get<std::string>() != stage_name(cfg.stage) || meta.at("seed").get<std::uint64_t>() != cfg.seed ||
          meta.at("batch_size").get<std::size_t>() != cfg.batch_size)
        throw std::invalid_argument("resume: checkpoint was written by a different stage, seed or batch size");
      start = meta.at("step").get<std::size_t>();
      record = RunRecord::from_json(meta.at("record"));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("resume: incomplete checkpoint metadata: ") + e.what());
    }
    if (start > cfg.steps) throw std::invalid_argument("resume: checkpoint is past the configured step count");
    import_parameters(params, *opt.resume);
    import_adam(adam, params, *opt.resume);
  }

  auto eval_point = [&](std::size_t step, double train_loss) {
    EvalPoint p{step, train_loss, heldout_loss(), elapsed()};
    record.add(p);
    if (opt.on_eval) opt.on_eval(p);
    if (opt.on_checkpoint) opt.on_checkpoint(make_checkpoint(params, adam, cfg, step, record));
  };

  auto guarded = [&](std::size_t step, auto&& body) {
    try {
      body();
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (step " + std::to_string(step) + ", batch seed " +
                             std::to_string(batch_seed(cfg.seed, step)) + ")",
                         static_cast<std::int64_t>(step), batch_seed(cfg.seed, step));
    }
  };

  if (start == 0) {
    // Step 0 reports the untrained loss on the first batch.
    double initial = 0.0;
    guarded(0, [&] {
      Tape tape;
      initial = batch_loss(tape, 0, training_batch(sim, cfg.seed, 0, cfg.batch_size)).value().item();
    });
    eval_point(0, initial);
  }

  for (std::size_t step = start; step < cfg.steps; ++step) {
    guarded(step, [&] {
      Tape tape;
      const Var loss = batch_loss(tape, step, training_batch(sim, cfg.seed, step, cfg.batch_size));
      const double value = loss.value().item();
      if (!std::isfinite(value)) throw NumericError("non-finite training loss");
      tape.backward(loss);
      adam.step(params);
      record.batch_losses.push_back(value);
    });
    const std::size_t done = step + 1;
    if (done % cfg.eval_every == 0 || done == cfg.steps) {
      const std::size_t since = record.points.empty() ? 0 : record.points.back().step;
      double sum = 0.0;
      for (std::size_t i = since; i < done; ++i) sum += record.batch_losses[i];
      eval_point(done, sum / static_cast<double>(done - since));
    }
  }
  return {make_checkpoint(params, adam, cfg, cfg.steps, record), std::move(record)};
}

// Freezes a parameter set and restores the previous flags on scope exit.
class FreezeGuard {
 public:
  explicit FreezeGuard(ParameterSet& params) : params_(params) {
    for (const auto& p : params_) flags_.push_back(p.trainable);
    params_.set_trainable(false);
  }
  ~FreezeGuard() {
    for (std::size_t i = 0; i < flags_.size(); ++i) params_[i].trainable = flags_[i];
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ParameterSet& params_;
  std::vector<bool> flags_;
};

void check_dims(const sim::Simulator& sim, std::size_t latent, std::size_t output, const char* what) {
  if (latent != sim.latent_dim() || output != sim.output_dim())
    throw ShapeError(std::string(what) + " dimensions do not match simulator '" + sim.spec().name + "'");
}

}  // namespace

TrainResult train_decoder(const sim::Simulator& sim, Decoder& decoder, const StageConfig& config,
                          const TrainOptions& options) {
  check_dims(sim, decoder.latent_dim(), decoder.output_dim(), "decoder");
  const Discrepancy d = discrepancy_for(sim.spec());
  const Tensor z_h = heldout_latents(sim, config.seed, config.eval_count);
  const Tensor zn_h = sim::normalize_batch(sim, z_h);
  const Tensor x_h = sim::simulate_batch(sim, z_h);
  return run_stage(
      sim, decoder.parameters(), config, options,
      [&](Tape& tape, std::size_t, const Tensor& z) {
        return decoder_loss(tape, decoder, sim::normalize_batch(sim, z), sim::simulate_batch(sim, z), d);
      },
      [&] {
        Tape tape;
        return decoder_loss(tape, decoder, zn_h, x_h, d).value().item();
      });
}

TrainResult train_encoder(const sim::Simulator& sim, Decoder& decoder, Encoder& encoder, const StageConfig& config,
                          const TrainOptions& options) {
  check_dims(sim, decoder.latent_dim(), decoder.output_dim(), "decoder");
  check_dims(sim, encoder.latent_dim(), encoder.input_dim(), "encoder");
  FreezeGuard frozen(decoder.parameters());
  const Discrepancy d = discrepancy_for(sim.spec());
  const Tensor x_h = sim::simulate_batch(sim, heldout_latents(sim, config.seed, config.eval_count));
  EncoderLossOptions train_opts{config.kl_weight, !config.sampled_z};
  EncoderLossOptions eval_opts{config.kl_weight, true};
  const Tensor no_noise({1, 1});
  return run_stage(
      sim, encoder.parameters(), config, options,
      [&](Tape& tape, std::size_t step, const Tensor& z) {
        const Tensor x = sim::simulate_batch(sim, z);
        const Tensor eps = config.sampled_z ? noise(config.seed, step, z.rows(), sim.latent_dim()) : no_noise;
        return encoder_loss(tape, encoder, decoder, x, eps, d, train_opts);
      },
      [&] {
        Tape tape;
        return encoder_loss(tape, encoder, decoder, x_h, no_noise, d, eval_opts).value().item();
      });
}

TrainResult train_supervised_baseline(const sim::Simulator& sim, Encoder& encoder, const StageConfig& config,
                                      const TrainOptions& options) {
  check_dims(sim, encoder.latent_dim(), encoder.input_dim(), "encoder");
  const Tensor z_h = heldout_latents(sim, config.seed, config.eval_count);
  const Tensor zn_h = sim::normalize_batch(sim, z_h);
  const Tensor x_h = sim::simulate_batch(sim, z_h);
  return run_stage(
      sim, encoder.parameters(), config, options,
      [&](Tape& tape, std::size_t, const Tensor& z) {
        return supervised_baseline_loss(tape, encoder, sim::simulate_batch(sim, z), sim::normalize_batch(sim, z));
      },
      [&] {
        Tape tape;
        return supervised_baseline_loss(tape, encoder, x_h, zn_h).value().item();
      });
}

EvalTable evaluate(const sim::Simulator& sim, Decoder& decoder, Encoder& encoder, std::size_t count,
                   std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("evaluate: count must be >= 1");
  check_dims(sim, decoder.latent_dim(), decoder.output_dim(), "decoder");
  check_dims(sim, encoder.latent_dim(), encoder.input_dim(), "encoder");
  EvalTable t;
  t.z = heldout_latents(sim, seed, count);
  t.z_net = sim::normalize_batch(sim, t.z);
  t.x = sim::simulate_batch(sim, t.z);
  t.g = decoder.decode(t.z_net);
  t.mu_net = encoder.infer_mu(t.x);
  t.mu = sim::denormalize_batch(sim, t.mu_net);
  for (std::size_t i = 0; i < t.mu.rows(); ++i) sim.project_to_domain(t.mu.row(i));
  t.s_mu = sim::simulate_batch(sim, t.mu);
  t.g_mu = decoder.decode(t.mu_net);
  return t;
}

void load_model(ParameterSet& params, const Checkpoint& ckpt) { import_parameters(params, ckpt); }

}  // namespace simvae
