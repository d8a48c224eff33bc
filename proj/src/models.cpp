#include "simvae/models.hpp"

#include <cmath>
#include <stdexcept>

#include "simvae/errors.hpp"

namespace simvae {

std::string_view activation_name(Activation a) noexcept {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::Identity, Activation::Relu, Activation::LeakyRelu, Activation::Tanh,
                 Activation::Sigmoid})
    if (activation_name(a) == name) return a;
  throw std::invalid_argument("unknown activation '" + std::string(name) +
                              "' (valid: identity, relu, leaky_relu, tanh, sigmoid)");
}

Var activate(Activation a, Var x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return ops::relu(x);
    case Activation::LeakyRelu: return ops::leaky_relu(x);
    case Activation::Tanh: return ops::tanh(x);
    case Activation::Sigmoid: return ops::sigmoid(x);
  }
  return x;
}

void MlpConfig::validate() const {
  if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("mlp: input and output dims must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw std::invalid_argument("mlp: hidden layer sizes must be positive");
}

// ------------------------------------------------------------------ mlp

Mlp::Mlp(MlpConfig config, ParameterSet& params, const std::string& prefix, Rng& init)
    : config_(std::move(config)) {
  config_.validate();
  std::vector<std::size_t> dims{config_.input_dim};
  dims.insert(dims.end(), config_.hidden.begin(), config_.hidden.end());
  dims.push_back(config_.output_dim);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    Tensor w({dims[i], dims[i + 1]});
    Tensor b({dims[i + 1]});
    for (double& v : w.data()) v = init.uniform(-bound, bound);
    for (double& v : b.data()) v = init.uniform(-bound, bound);
    const std::string layer = prefix + ".l" + std::to_string(i);
    weights_.push_back(params.size());
    params.add(layer + ".W", std::move(w));
    biases_.push_back(params.size());
    params.add(layer + ".b", std::move(b));
  }
}

Var Mlp::forward_raw(Tape& tape, ParameterSet& params, Var x) const {
  if (x.shape().size() != 2 || x.shape()[1] != config_.input_dim)
    throw ShapeError("mlp: expected input [batch," + std::to_string(config_.input_dim) + "], got " +
                     shape_string(x.shape()));
  Var h = x;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    h = ops::affine(h, tape.param(params[weights_[i]]), tape.param(params[biases_[i]]));
    if (i + 1 < weights_.size()) h = activate(config_.hidden_activation, h);
  }
  return h;
}

Var Mlp::forward(Tape& tape, ParameterSet& params, Var x) const {
  return activate(config_.output_activation, forward_raw(tape, params, x));
}

// ------------------------------------------------------------------ models

Discrepancy discrepancy_for(const sim::SimulatorSpec& spec) noexcept {
  return spec.is_image() ? Discrepancy::Bce : Discrepancy::Mse;
}

Var Decoder::forward(Tape& tape, Var z_net) {
  const Var raw = forward_raw(tape, z_net);
  return output_kind() == OutputKind::Probability ? ops::sigmoid(raw) : raw;
}

Tensor Decoder::decode(const Tensor& z_net) {
  Tape tape;
  return forward(tape, tape.constant(z_net)).value();
}

Tensor Encoder::infer_mu(const Tensor& x) {
  Tape tape;
  return forward(tape, tape.constant(x)).mu.value();
}

MlpDecoder::MlpDecoder(std::size_t latent_dim, std::size_t output_dim, OutputKind kind,
                       std::vector<std::size_t> hidden, std::uint64_t seed)
    : MlpDecoder(latent_dim, output_dim, kind, std::move(hidden), stream(seed, "init.generator")) {}

MlpDecoder::MlpDecoder(std::size_t latent_dim, std::size_t output_dim, OutputKind kind,
                       std::vector<std::size_t> hidden, Rng init)
    : kind_(kind), mlp_(MlpConfig{latent_dim, output_dim, std::move(hidden)}, params_, "generator", init) {}

Var MlpDecoder::forward_raw(Tape& tape, Var z_net) { return mlp_.forward_raw(tape, params_, z_net); }

namespace {

MlpConfig head_config(std::size_t in, std::size_t out) {
  MlpConfig c;
  c.input_dim = in;
  c.output_dim = out;
  return c;
}

MlpConfig trunk_config(std::size_t input_dim, std::vector<std::size_t> hidden) {
  if (hidden.empty()) throw std::invalid_argument("encoder: needs at least one hidden layer");
  MlpConfig c;
  c.input_dim = input_dim;
  c.output_dim = hidden.back();
  hidden.pop_back();
  c.hidden = std::move(hidden);
  c.output_activation = Activation::Relu;
  return c;
}

}  // namespace

MlpEncoder::MlpEncoder(std::size_t input_dim, std::size_t latent_dim, std::vector<std::size_t> hidden,
                       std::uint64_t seed)
    : MlpEncoder(input_dim, latent_dim, hidden, stream(seed, "init.encoder")) {}

MlpEncoder::MlpEncoder(std::size_t input_dim, std::size_t latent_dim, const std::vector<std::size_t>& hidden,
                       Rng init)
    : trunk_(trunk_config(input_dim, hidden), params_, "encoder.trunk", init),
      mu_head_(head_config(hidden.empty() ? 1 : hidden.back(), latent_dim), params_, "encoder.mu", init),
      sigma_head_(head_config(hidden.empty() ? 1 : hidden.back(), latent_dim), params_, "encoder.sigma", init) {}

Posterior MlpEncoder::forward(Tape& tape, Var x) {
  const Var h = trunk_.forward(tape, params_, x);
  return {mu_head_.forward(tape, params_, h), ops::softplus(sigma_head_.forward(tape, params_, h))};
}

MlpDecoder make_decoder(const sim::Simulator& sim, const ModelConfig& config, std::uint64_t seed) {
  return MlpDecoder(sim.latent_dim(), sim.output_dim(),
                    sim.spec().is_image() ? OutputKind::Probability : OutputKind::Value, config.generator_hidden,
                    seed);
}

MlpEncoder make_encoder(const sim::Simulator& sim, const ModelConfig& config, std::uint64_t seed) {
  return MlpEncoder(sim.output_dim(), sim.latent_dim(), config.encoder_hidden, seed);
}

std::size_t count_outside_unit_box(const Tensor& z_net) noexcept {
  std::size_t n = 0;
  for (double v : z_net.data())
    if (!(v >= -1.0 && v <= 1.0)) ++n;
  return n;
}

// ------------------------------------------------------------------ losses

Var reparameterize(const Posterior& p, Var eps) { return ops::add(p.mu, ops::mul(p.sigma, eps)); }

Var gaussian_kl(const Posterior& p) {
  Tape& tape = *p.mu.tape;
  const Var var = ops::mul(p.sigma, p.sigma);
  const Var mu2 = ops::mul(p.mu, p.mu);
  const Var ones = tape.constant(Tensor(p.mu.shape(), 1.0));
  // ½ Σ (σ² + μ² − 1 − ln σ²), averaged over rows.
  const Var terms = ops::sub(ops::sub(ops::add(var, mu2), ones), ops::log(var));
  const double rows = static_cast<double>(p.mu.shape()[0]);
  return ops::scale(ops::sum(terms), 0.5 / rows);
}

namespace {

void check_discrepancy(const Decoder& decoder, Discrepancy d) {
  const bool probability = decoder.output_kind() == OutputKind::Probability;
  if (probability != (d == Discrepancy::Bce))
    throw std::invalid_argument(std::string("loss mismatch: ") + (d == Discrepancy::Bce ? "bce" : "mse") +
                                " needs a decoder with " + (d == Discrepancy::Bce ? "probability" : "value") +
                                " outputs");
}

Var reconstruction(Tape& tape, Decoder& decoder, Var z_net, const Tensor& x, Discrepancy d) {
  const Var raw = decoder.forward_raw(tape, z_net);
  if (raw.shape() != x.shape())
    throw ShapeError("reconstruction: decoder output " + shape_string(raw.shape()) + " vs data " +
                     shape_string(x.shape()));
  const Var target = tape.constant(x);
  return d == Discrepancy::Bce ? ops::bce_logits_loss(raw, target) : ops::mse_loss(raw, target);
}

}  // namespace

Var decoder_loss(Tape& tape, Decoder& decoder, const Tensor& z_net, const Tensor& x, Discrepancy d) {
  check_discrepancy(decoder, d);
  return reconstruction(tape, decoder, tape.constant(z_net), x, d);
}

Var encoder_loss(Tape& tape, Encoder& encoder, Decoder& decoder, const Tensor& x, const Tensor& eps,
                 Discrepancy d, const EncoderLossOptions& options) {
  check_discrepancy(decoder, d);
  if (!decoder.parameters().all_frozen())
    throw std::logic_error("encoder_loss: decoder parameters must be frozen during encoder training");
  const Posterior post = encoder.forward(tape, tape.constant(x));
  Var z = post.mu;
  if (!options.mu_only) {
    if (eps.shape() != post.mu.shape())
      throw ShapeError("encoder_loss: eps " + shape_string(eps.shape()) + " vs posterior " +
                       shape_string(post.mu.shape()));
    z = reparameterize(post, tape.constant(eps));
  }
  Var loss = reconstruction(tape, decoder, z, x, d);
  if (options.kl_weight != 0.0) loss = ops::add(loss, ops::scale(gaussian_kl(post), options.kl_weight));
  return loss;
}

Var supervised_baseline_loss(Tape& tape, Encoder& encoder, const Tensor& x, const Tensor& z_net) {
  const Posterior post = encoder.forward(tape, tape.constant(x));
  return ops::mse_loss(post.mu, tape.constant(z_net));
}

}  // namespace simvae
