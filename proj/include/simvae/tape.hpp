#pragma once

// Reverse-mode automatic differentiation over Tensor values.
//
// A Tape records every forward operation as a node holding its result and
// whatever the backward pass needs. Nodes are appended in execution order,
// so the node list is already topologically sorted. backward() may be called
// once per tape; build a fresh tape for every forward pass.

#include <cstddef>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "simvae/tensor.hpp"

namespace simvae {

class Tape;

/// Trainable (or frozen) named array with its gradient slot.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

/// Ordered collection of parameters. References stay valid as it grows.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value, bool trainable = true);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void set_trainable(bool trainable);
  /// True only if every parameter is frozen.
  bool all_frozen() const noexcept;

 private:
  std::deque<Parameter> params_;
};

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

enum class OpKind {
  Constant,
  Input,
  Param,
  Add,
  Sub,
  Mul,
  Scale,
  MatMul,
  Affine,
  Relu,
  LeakyRelu,
  Tanh,
  Sigmoid,
  Softplus,
  Log,
  Concat,
  Slice,
  Mean,
  Sum,
  MseLoss,
  BceLoss,
  BceLogitsLoss,
};

std::string_view op_name(OpKind op) noexcept;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (see grad()).
  Var input(Tensor value);
  /// Leaf bound to a parameter; differentiated iff the parameter is trainable.
  Var param(Parameter& p);

  /// Populates gradients of every differentiable leaf. Parameter gradients
  /// are overwritten (frozen parameters receive zeros).
  void backward(Var loss);

  /// Gradient of an input leaf after backward().
  const Tensor& grad(Var v) const;

  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_.at(v.id).op; }
  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.param != nullptr ? n.param->value : n.value;
  }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  struct Node {
    OpKind op = OpKind::Constant;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    double attr = 0.0;          // slope, scale factor
    std::size_t axis = 0;       // concat / slice axis
    std::size_t begin = 0;      // slice start
    Parameter* param = nullptr; // for OpKind::Param
  };

  /// Appends a node computed by an op. Rejects non-finite results.
  Var record(Node node);
  const Node& node(std::size_t id) const { return nodes_.at(id); }

 private:
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool consumed_ = false;
};

/// Forward operations. Inputs must come from the same tape. Batches are
/// rank-2 [batch, features]; losses and reductions return shape {1}.
namespace ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var matmul(Var a, Var b);
/// x·W + b with x [m,k], W [k,n], b [n].
Var affine(Var x, Var w, Var b);
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.2);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
/// Natural log; inputs below 1e-300 are clamped there.
Var log(Var a);
Var concat(const std::vector<Var>& parts, std::size_t axis = 1);
/// Half-open range [begin, end) along `axis` of a rank-2 tensor.
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var mean(Var a);
Var sum(Var a);
/// Mean of squared differences over all elements.
Var mse_loss(Var prediction, Var target);
/// Mean binary cross-entropy over all elements; prediction in [0,1].
Var bce_loss(Var prediction, Var target);
/// bce_loss(sigmoid(logits), target) computed as mean(softplus(l) - t·l),
/// which keeps its gradient when the sigmoid saturates.
Var bce_logits_loss(Var logits, Var target);

}  // namespace ops
}  // namespace simvae
