#pragma once

// Generator (decoder) and encoder networks, the Gaussian posterior and the
// three training objectives. Networks work in normalized latent units
// (z_net in [-1, 1]^K); see Simulator::normalize.

#include <cstdint>
#include <string>
#include <vector>

#include "simvae/simulators.hpp"
#include "simvae/tape.hpp"

namespace simvae {

enum class Activation { Identity, Relu, LeakyRelu, Tanh, Sigmoid };

std::string_view activation_name(Activation a) noexcept;
/// Throws std::invalid_argument on unknown names.
Activation parse_activation(std::string_view name);
Var activate(Activation a, Var x);

struct MlpConfig {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<std::size_t> hidden;
  Activation hidden_activation = Activation::Relu;
  Activation output_activation = Activation::Identity;

  /// Throws std::invalid_argument on zero dimensions.
  void validate() const;
};

/// Fully connected stack. Parameters live in an external ParameterSet under
/// "<prefix>.l<i>.W" ([in, out]) and "<prefix>.l<i>.b"; all are initialised
/// uniform on ±1/sqrt(fan_in). The layer keeps indices, not pointers, so the
/// owning model stays movable; pass the same set to forward().
class Mlp {
 public:
  Mlp(MlpConfig config, ParameterSet& params, const std::string& prefix, Rng& init);

  /// Output before the output activation.
  Var forward_raw(Tape& tape, ParameterSet& params, Var x) const;
  Var forward(Tape& tape, ParameterSet& params, Var x) const;
  const MlpConfig& config() const noexcept { return config_; }

 private:
  MlpConfig config_;
  std::vector<std::size_t> weights_;  // indices into the parameter set
  std::vector<std::size_t> biases_;
};

/// How a decoder's raw output is read. Probability outputs are logits that
/// become pixel intensities through a sigmoid.
enum class OutputKind { Probability, Value };

/// Reconstruction discrepancy D.
enum class Discrepancy { Bce, Mse };

Discrepancy discrepancy_for(const sim::SimulatorSpec& spec) noexcept;

class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual OutputKind output_kind() const = 0;
  /// Logits for Probability outputs, values otherwise.
  virtual Var forward_raw(Tape& tape, Var z_net) = 0;
  virtual ParameterSet& parameters() = 0;

  /// Output in data units (sigmoid applied for Probability outputs).
  Var forward(Tape& tape, Var z_net);
  /// Tape-free evaluation on a batch [B, K].
  Tensor decode(const Tensor& z_net);
};

struct Posterior {
  Var mu;
  Var sigma;
};

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t latent_dim() const = 0;
  virtual Posterior forward(Tape& tape, Var x) = 0;
  virtual ParameterSet& parameters() = 0;

  /// μ for a batch [B, N], without recording gradients.
  Tensor infer_mu(const Tensor& x);
};

/// K -> hidden -> N generator.
class MlpDecoder final : public Decoder {
 public:
  MlpDecoder(std::size_t latent_dim, std::size_t output_dim, OutputKind kind,
             std::vector<std::size_t> hidden, std::uint64_t seed);

  std::size_t latent_dim() const override { return mlp_.config().input_dim; }
  std::size_t output_dim() const override { return mlp_.config().output_dim; }
  OutputKind output_kind() const override { return kind_; }
  Var forward_raw(Tape& tape, Var z_net) override;
  ParameterSet& parameters() override { return params_; }

 private:
  MlpDecoder(std::size_t latent_dim, std::size_t output_dim, OutputKind kind,
             std::vector<std::size_t> hidden, Rng init);

  ParameterSet params_;
  OutputKind kind_;
  Mlp mlp_;
};

/// N -> hidden trunk -> (μ head, σ head); σ = softplus(raw σ).
class MlpEncoder final : public Encoder {
 public:
  MlpEncoder(std::size_t input_dim, std::size_t latent_dim, std::vector<std::size_t> hidden,
             std::uint64_t seed);

  std::size_t input_dim() const override { return trunk_.config().input_dim; }
  std::size_t latent_dim() const override { return mu_head_.config().output_dim; }
  Posterior forward(Tape& tape, Var x) override;
  ParameterSet& parameters() override { return params_; }

 private:
  MlpEncoder(std::size_t input_dim, std::size_t latent_dim, const std::vector<std::size_t>& hidden, Rng init);

  ParameterSet params_;
  Mlp trunk_;
  Mlp mu_head_;
  Mlp sigma_head_;
};

struct ModelConfig {
  std::vector<std::size_t> generator_hidden{256, 512};
  std::vector<std::size_t> encoder_hidden{512, 256};
};

MlpDecoder make_decoder(const sim::Simulator& sim, const ModelConfig& config, std::uint64_t seed);
MlpEncoder make_encoder(const sim::Simulator& sim, const ModelConfig& config, std::uint64_t seed);

/// Number of entries outside [-1, 1]; decoders are only trained on the box.
std::size_t count_outside_unit_box(const Tensor& z_net) noexcept;

// ------------------------------------------------------------------ losses

/// z = μ + σ⊙ε, with ε a constant (no gradient).
Var reparameterize(const Posterior& p, Var eps);

/// Mean over the batch of KL[N(μ, σ²) || N(0, I)], summed over latents.
Var gaussian_kl(const Posterior& p);

/// Batch mean of D[x, G(z_net)]. Throws std::invalid_argument when the
/// discrepancy does not fit the decoder's output kind.
Var decoder_loss(Tape& tape, Decoder& decoder, const Tensor& z_net, const Tensor& x, Discrepancy d);

struct EncoderLossOptions {
  double kl_weight = 0.0;
  /// Feed μ itself to the decoder instead of μ + σ⊙ε.
  bool mu_only = false;
};

/// Batch mean of D[x, G(μ + σ⊙ε)] + kl_weight·KL. The decoder must be fully
/// frozen (std::logic_error otherwise). `eps` is ignored in mu_only mode.
Var encoder_loss(Tape& tape, Encoder& encoder, Decoder& decoder, const Tensor& x, const Tensor& eps,
                 Discrepancy d, const EncoderLossOptions& options = {});

/// mse(μ(x), z_net).
Var supervised_baseline_loss(Tape& tape, Encoder& encoder, const Tensor& x, const Tensor& z_net);

}  // namespace simvae
