#include "simvae/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "simvae/errors.hpp"
#include "simvae/kernels.hpp"

namespace simvae {

namespace {

constexpr double kLogFloor = 1e-300;
constexpr double kBceClamp = 1e-12;
constexpr std::size_t kParallelElems = std::size_t{1} << 15;

template <typename F>
void for_each_index(std::size_t n, F&& f) {
#pragma omp parallel for simd schedule(static) if (n >= kParallelElems)
  for (std::size_t i = 0; i < n; ++i) f(i);
}

std::string two_shapes(std::string_view op, const Shape& a, const Shape& b) {
  return std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b);
}

Tape& common_tape(Var a, Var b, std::string_view op) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw TapeError(std::string(op) + ": operands belong to different tapes");
  return *a.tape;
}

void require_same_shape(std::string_view op, Var a, Var b) {
  if (a.shape() != b.shape()) throw ShapeError(two_shapes(op, a.shape(), b.shape()));
}

void require_rank2(std::string_view op, const Tensor& t) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + shape_string(t.shape()));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  // exp underflows into the subnormal range below about -708; those values
  // make every later multiply slow, and zero is within rounding of them anyway.
  if (x < -708.0) return 0.0;
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

Tape::Node unary(OpKind op, Var a, Tensor value) {
  Tape::Node n;
  n.op = op;
  n.inputs = {a.id};
  n.value = std::move(value);
  return n;
}

template <typename F>
Tensor map(const Tensor& a, F&& f) {
  Tensor out(a.shape());
  const double* src = a.data().data();
  double* dst = out.data().data();
  for_each_index(a.size(), [&](std::size_t i) { dst[i] = f(src[i]); });
  return out;
}

}  // namespace

// ---------------------------------------------------------------- parameters

Parameter& ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
  Parameter& p = params_.emplace_back();
  p.name = std::move(name);
  p.grad = Tensor(value.shape());
  p.value = std::move(value);
  p.trainable = trainable;
  return p;
}

Parameter* ParameterSet::find(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

void ParameterSet::set_trainable(bool trainable) {
  for (auto& p : params_) p.trainable = trainable;
}

bool ParameterSet::all_frozen() const noexcept {
  return std::none_of(params_.begin(), params_.end(),
                      [](const Parameter& p) { return p.trainable; });
}

// ---------------------------------------------------------------- tape

const Tensor& Var::value() const {
  if (tape == nullptr) throw TapeError("Var is not bound to a tape");
  return tape->value(id);
}

std::string_view op_name(OpKind op) noexcept {
  switch (op) {
    case OpKind::Constant: return "constant";
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "subtract";
    case OpKind::Mul: return "multiply";
    case OpKind::Scale: return "scale";
    case OpKind::MatMul: return "matmul";
    case OpKind::Affine: return "affine";
    case OpKind::Relu: return "relu";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softplus: return "softplus";
    case OpKind::Log: return "log";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::MseLoss: return "mse_loss";
    case OpKind::BceLoss: return "bce_loss";
    case OpKind::BceLogitsLoss: return "bce_logits_loss";
  }
  return "unknown";
}

Var Tape::record(Node node) {
  if (consumed_) throw TapeError("tape already consumed by backward(); record on a new tape");
  if (node.op != OpKind::Param && !node.value.all_finite())
    throw NumericError(std::string(op_name(node.op)) + ": produced a non-finite value");
  if (node.op != OpKind::Param && node.op != OpKind::Input) {
    node.requires_grad = std::any_of(node.inputs.begin(), node.inputs.end(),
                                     [&](std::size_t i) { return nodes_[i].requires_grad; });
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = OpKind::Constant;
  n.value = std::move(value);
  return record(std::move(n));
}

Var Tape::input(Tensor value) {
  Node n;
  n.op = OpKind::Input;
  n.value = std::move(value);
  n.requires_grad = true;
  return record(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (!p.value.all_finite()) throw NumericError("param: '" + p.name + "' holds a non-finite value");
  Node n;
  n.op = OpKind::Param;
  n.requires_grad = p.trainable;
  n.param = &p;
  return record(std::move(n));
}

const Tensor& Tape::grad(Var v) const {
  if (!consumed_) throw TapeError("grad: backward() has not run on this tape");
  const Tensor& g = grads_.at(v.id);
  if (g.empty()) throw TapeError("grad: node " + std::to_string(v.id) + " received no gradient");
  return g;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw TapeError("backward: loss belongs to a different tape");
  if (consumed_) throw TapeError("backward: tape already consumed");
  if (nodes_.empty()) throw TapeError("backward: empty tape");
  if (loss.value().size() != 1)
    throw TapeError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
  consumed_ = true;

  grads_.assign(nodes_.size(), Tensor());
  auto acc = [&](std::size_t id) -> Tensor& {
    Tensor& g = grads_[id];
    if (g.empty()) g = Tensor(value(id).shape());
    return g;
  };
  auto wants = [&](std::size_t id) { return nodes_[id].requires_grad; };

  for (auto& n : nodes_)
    if (n.op == OpKind::Param) n.param->grad = Tensor(n.param->value.shape());

  acc(loss.id)[0] = 1.0;

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || grads_[id].empty()) continue;
    const Tensor& g = grads_[id];
    const double* gd = g.data().data();
    const std::size_t size = g.size();

    switch (n.op) {
      case OpKind::Constant:
      case OpKind::Input:
        break;
      case OpKind::Param: {
        auto& pg = n.param->grad.storage();
        for (std::size_t i = 0; i < size; ++i) pg[i] += gd[i];
        break;
      }
      case OpKind::Add:
      case OpKind::Sub: {
        const double sign = n.op == OpKind::Add ? 1.0 : -1.0;
        if (wants(n.inputs[0])) {
          double* ga = acc(n.inputs[0]).data().data();
          for_each_index(size, [&](std::size_t i) { ga[i] += gd[i]; });
        }
        if (wants(n.inputs[1])) {
          double* gb = acc(n.inputs[1]).data().data();
          for_each_index(size, [&](std::size_t i) { gb[i] += sign * gd[i]; });
        }
        break;
      }
      case OpKind::Mul: {
        const double* a = value(n.inputs[0]).data().data();
        const double* b = value(n.inputs[1]).data().data();
        if (wants(n.inputs[0])) {
          double* ga = acc(n.inputs[0]).data().data();
          for_each_index(size, [&](std::size_t i) { ga[i] += gd[i] * b[i]; });
        }
        if (wants(n.inputs[1])) {
          double* gb = acc(n.inputs[1]).data().data();
          for_each_index(size, [&](std::size_t i) { gb[i] += gd[i] * a[i]; });
        }
        break;
      }
      case OpKind::Scale: {
        double* ga = acc(n.inputs[0]).data().data();
        const double c = n.attr;
        for_each_index(size, [&](std::size_t i) { ga[i] += c * gd[i]; });
        break;
      }
      case OpKind::MatMul:
      case OpKind::Affine: {
        const Tensor& a = value(n.inputs[0]);
        const Tensor& b = value(n.inputs[1]);
        const std::size_t m = a.rows(), k = a.cols(), cols = b.cols();
        if (wants(n.inputs[0]))
          kernels::gemm(kernels::Layout::NT, m, k, cols, g.data(), b.data(),
                        acc(n.inputs[0]).data(), true);
        if (wants(n.inputs[1]))
          kernels::gemm(kernels::Layout::TN, k, cols, m, a.data(), g.data(),
                        acc(n.inputs[1]).data(), true);
        if (n.op == OpKind::Affine && wants(n.inputs[2]))
          kernels::column_sum(m, cols, g.data(), acc(n.inputs[2]).data(), true);
        break;
      }
      case OpKind::Relu:
      case OpKind::LeakyRelu: {
        const double* x = value(n.inputs[0]).data().data();
        double* ga = acc(n.inputs[0]).data().data();
        const double slope = n.op == OpKind::Relu ? 0.0 : n.attr;
        for_each_index(size, [&](std::size_t i) { ga[i] += x[i] > 0 ? gd[i] : slope * gd[i]; });
        break;
      }
      case OpKind::Tanh: {
        const double* y = value(id).data().data();
        double* ga = acc(n.inputs[0]).data().data();
        for_each_index(size, [&](std::size_t i) { ga[i] += gd[i] * (1.0 - y[i] * y[i]); });
        break;
      }
      case OpKind::Sigmoid: {
        const double* y = value(id).data().data();
        double* ga = acc(n.inputs[0]).data().data();
        for_each_index(size, [&](std::size_t i) { ga[i] += gd[i] * y[i] * (1.0 - y[i]); });
        break;
      }
      case OpKind::Softplus: {
        const double* x = value(n.inputs[0]).data().data();
        double* ga = acc(n.inputs[0]).data().data();
        for_each_index(size, [&](std::size_t i) { ga[i] += gd[i] * stable_sigmoid(x[i]); });
        break;
      }
      case OpKind::Log: {
        const double* x = value(n.inputs[0]).data().data();
        double* ga = acc(n.inputs[0]).data().data();
        for_each_index(size, [&](std::size_t i) { ga[i] += gd[i] / std::max(x[i], kLogFloor); });
        break;
      }
      case OpKind::Concat: {
        const std::size_t rows = value(id).rows(), cols = value(id).cols();
        std::size_t offset = 0;
        for (std::size_t in : n.inputs) {
          const Tensor& part = value(in);
          const std::size_t extent = n.axis == 0 ? part.rows() : part.cols();
          if (wants(in)) {
            Tensor& gp = acc(in);
            if (n.axis == 0) {
              for (std::size_t i = 0; i < part.size(); ++i) gp[i] += gd[offset * cols + i];
            } else {
              for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < extent; ++c) gp(r, c) += g(r, offset + c);
            }
          }
          offset += extent;
        }
        break;
      }
      case OpKind::Slice: {
        Tensor& ga = acc(n.inputs[0]);
        const std::size_t rows = value(id).rows(), cols = value(id).cols();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            if (n.axis == 0)
              ga(n.begin + r, c) += g(r, c);
            else
              ga(r, n.begin + c) += g(r, c);
          }
        break;
      }
      case OpKind::Mean:
      case OpKind::Sum: {
        Tensor& ga = acc(n.inputs[0]);
        const double v = n.op == OpKind::Mean ? gd[0] / static_cast<double>(ga.size()) : gd[0];
        double* p = ga.data().data();
        for_each_index(ga.size(), [&](std::size_t i) { p[i] += v; });
        break;
      }
      case OpKind::MseLoss: {
        const Tensor& p = value(n.inputs[0]);
        const Tensor& t = value(n.inputs[1]);
        const double c = 2.0 * gd[0] / static_cast<double>(p.size());
        const double* pd = p.data().data();
        const double* td = t.data().data();
        if (wants(n.inputs[0])) {
          double* gp = acc(n.inputs[0]).data().data();
          for_each_index(p.size(), [&](std::size_t i) { gp[i] += c * (pd[i] - td[i]); });
        }
        if (wants(n.inputs[1])) {
          double* gt = acc(n.inputs[1]).data().data();
          for_each_index(p.size(), [&](std::size_t i) { gt[i] -= c * (pd[i] - td[i]); });
        }
        break;
      }
      case OpKind::BceLoss: {
        const Tensor& p = value(n.inputs[0]);
        const Tensor& t = value(n.inputs[1]);
        const double c = gd[0] / static_cast<double>(p.size());
        const double* pd = p.data().data();
        const double* td = t.data().data();
        if (wants(n.inputs[0])) {
          double* gp = acc(n.inputs[0]).data().data();
          for_each_index(p.size(), [&](std::size_t i) {
            const double q = std::clamp(pd[i], kBceClamp, 1.0 - kBceClamp);
            gp[i] += c * (q - td[i]) / (q * (1.0 - q));
          });
        }
        if (wants(n.inputs[1])) {
          double* gt = acc(n.inputs[1]).data().data();
          for_each_index(p.size(), [&](std::size_t i) {
            const double q = std::clamp(pd[i], kBceClamp, 1.0 - kBceClamp);
            gt[i] += c * (std::log(1.0 - q) - std::log(q));
          });
        }
        break;
      }
      case OpKind::BceLogitsLoss: {
        const Tensor& l = value(n.inputs[0]);
        const Tensor& t = value(n.inputs[1]);
        const double c = gd[0] / static_cast<double>(l.size());
        const double* ld = l.data().data();
        const double* td = t.data().data();
        if (wants(n.inputs[0])) {
          double* gl = acc(n.inputs[0]).data().data();
          for_each_index(l.size(), [&](std::size_t i) { gl[i] += c * (stable_sigmoid(ld[i]) - td[i]); });
        }
        if (wants(n.inputs[1])) {
          double* gt = acc(n.inputs[1]).data().data();
          for_each_index(l.size(), [&](std::size_t i) { gt[i] -= c * ld[i]; });
        }
        break;
      }
    }
  }
}

// ---------------------------------------------------------------- ops

namespace ops {

namespace {

Var binary_elementwise(OpKind op, Var a, Var b) {
  Tape& tape = common_tape(a, b, op_name(op));
  require_same_shape(op_name(op), a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  const double* xd = x.data().data();
  const double* yd = y.data().data();
  double* o = out.data().data();
  switch (op) {
    case OpKind::Add: for_each_index(x.size(), [&](std::size_t i) { o[i] = xd[i] + yd[i]; }); break;
    case OpKind::Sub: for_each_index(x.size(), [&](std::size_t i) { o[i] = xd[i] - yd[i]; }); break;
    default: for_each_index(x.size(), [&](std::size_t i) { o[i] = xd[i] * yd[i]; }); break;
  }
  Tape::Node n;
  n.op = op;
  n.inputs = {a.id, b.id};
  n.value = std::move(out);
  return tape.record(std::move(n));
}

}  // namespace

Var add(Var a, Var b) { return binary_elementwise(OpKind::Add, a, b); }
Var sub(Var a, Var b) { return binary_elementwise(OpKind::Sub, a, b); }
Var mul(Var a, Var b) { return binary_elementwise(OpKind::Mul, a, b); }

Var scale(Var a, double factor) {
  auto n = unary(OpKind::Scale, a, map(a.value(), [factor](double v) { return factor * v; }));
  n.attr = factor;
  return a.tape->record(std::move(n));
}

Var matmul(Var a, Var b) {
  Tape& tape = common_tape(a, b, "matmul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows())
    throw ShapeError(two_shapes("matmul", x.shape(), y.shape()));
  Tensor out({x.rows(), y.cols()});
  kernels::gemm(kernels::Layout::NN, x.rows(), y.cols(), x.cols(), x.data(), y.data(), out.data());
  Tape::Node n;
  n.op = OpKind::MatMul;
  n.inputs = {a.id, b.id};
  n.value = std::move(out);
  return tape.record(std::move(n));
}

Var affine(Var x, Var w, Var b) {
  Tape& tape = common_tape(x, w, "affine");
  common_tape(x, b, "affine");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.cols() != wv.rows())
    throw ShapeError(two_shapes("affine", xv.shape(), wv.shape()));
  if (bv.rank() != 1 || bv.size() != wv.cols())
    throw ShapeError(two_shapes("affine (bias)", wv.shape(), bv.shape()));
  const std::size_t m = xv.rows(), cols = wv.cols();
  Tensor out({m, cols});
  for (std::size_t r = 0; r < m; ++r) std::copy(bv.data().begin(), bv.data().end(), out.row(r).begin());
  kernels::gemm(kernels::Layout::NN, m, cols, xv.cols(), xv.data(), wv.data(), out.data(), true);
  Tape::Node n;
  n.op = OpKind::Affine;
  n.inputs = {x.id, w.id, b.id};
  n.value = std::move(out);
  return tape.record(std::move(n));
}

Var relu(Var a) {
  return a.tape->record(unary(OpKind::Relu, a, map(a.value(), [](double v) { return v > 0 ? v : 0.0; })));
}

Var leaky_relu(Var a, double slope) {
  auto n = unary(OpKind::LeakyRelu, a, map(a.value(), [slope](double v) { return v > 0 ? v : slope * v; }));
  n.attr = slope;
  return a.tape->record(std::move(n));
}

Var tanh(Var a) {
  return a.tape->record(unary(OpKind::Tanh, a, map(a.value(), [](double v) { return std::tanh(v); })));
}

Var sigmoid(Var a) {
  return a.tape->record(unary(OpKind::Sigmoid, a, map(a.value(), stable_sigmoid)));
}

Var softplus(Var a) {
  return a.tape->record(unary(OpKind::Softplus, a, map(a.value(), stable_softplus)));
}

Var log(Var a) {
  return a.tape->record(
      unary(OpKind::Log, a, map(a.value(), [](double v) { return std::log(std::max(v, kLogFloor)); })));
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
  Tape& tape = *parts.front().tape;
  const Tensor& first = parts.front().value();
  require_rank2("concat", first);
  std::size_t extent = 0;
  for (const Var& p : parts) {
    common_tape(parts.front(), p, "concat");
    const Tensor& t = p.value();
    require_rank2("concat", t);
    const bool ok = axis == 0 ? t.cols() == first.cols() : t.rows() == first.rows();
    if (!ok) throw ShapeError(two_shapes("concat", first.shape(), t.shape()));
    extent += axis == 0 ? t.rows() : t.cols();
  }
  Tensor out(axis == 0 ? Shape{extent, first.cols()} : Shape{first.rows(), extent});
  std::size_t offset = 0;
  Tape::Node n;
  n.op = OpKind::Concat;
  n.axis = axis;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    if (axis == 0) {
      std::copy(t.data().begin(), t.data().end(), out.data().begin() + offset * first.cols());
      offset += t.rows();
    } else {
      for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) out(r, offset + c) = t(r, c);
      offset += t.cols();
    }
    n.inputs.push_back(p.id);
  }
  n.value = std::move(out);
  return tape.record(std::move(n));
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& t = a.value();
  require_rank2("slice", t);
  if (axis > 1) throw ShapeError("slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? t.rows() : t.cols();
  if (begin >= end || end > extent)
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + shape_string(t.shape()));
  const std::size_t len = end - begin;
  Tensor out(axis == 0 ? Shape{len, t.cols()} : Shape{t.rows(), len});
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      out(r, c) = axis == 0 ? t(begin + r, c) : t(r, begin + c);
  auto n = unary(OpKind::Slice, a, std::move(out));
  n.axis = axis;
  n.begin = begin;
  return a.tape->record(std::move(n));
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape->record(unary(OpKind::Sum, a, Tensor::scalar(s)));
}

Var mean(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape->record(unary(OpKind::Mean, a, Tensor::scalar(s / static_cast<double>(a.value().size()))));
}

Var mse_loss(Var prediction, Var target) {
  Tape& tape = common_tape(prediction, target, "mse_loss");
  require_same_shape("mse_loss", prediction, target);
  const auto p = prediction.value().data();
  const auto t = target.value().data();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  Tape::Node n;
  n.op = OpKind::MseLoss;
  n.inputs = {prediction.id, target.id};
  n.value = Tensor::scalar(s / static_cast<double>(p.size()));
  return tape.record(std::move(n));
}

Var bce_loss(Var prediction, Var target) {
  Tape& tape = common_tape(prediction, target, "bce_loss");
  require_same_shape("bce_loss", prediction, target);
  const auto p = prediction.value().data();
  const auto t = target.value().data();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || p[i] > 1.0 || t[i] < 0.0 || t[i] > 1.0)
      throw DomainError("bce_loss: prediction and target must lie in [0,1]");
    const double q = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    // 0·log 0 := 0, so exact agreement on {0,1} targets costs nothing.
    if (t[i] > 0.0 && p[i] != 1.0) s -= t[i] * std::log(q);
    if (t[i] < 1.0 && p[i] != 0.0) s -= (1.0 - t[i]) * std::log(1.0 - q);
  }
  Tape::Node n;
  n.op = OpKind::BceLoss;
  n.inputs = {prediction.id, target.id};
  n.value = Tensor::scalar(s / static_cast<double>(p.size()));
  return tape.record(std::move(n));
}

Var bce_logits_loss(Var logits, Var target) {
  Tape& tape = common_tape(logits, target, "bce_logits_loss");
  require_same_shape("bce_logits_loss", logits, target);
  const auto l = logits.value().data();
  const auto t = target.value().data();
  double s = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (t[i] < 0.0 || t[i] > 1.0) throw DomainError("bce_logits_loss: target must lie in [0,1]");
    s += stable_softplus(l[i]) - t[i] * l[i];
  }
  Tape::Node n;
  n.op = OpKind::BceLogitsLoss;
  n.inputs = {logits.id, target.id};
  n.value = Tensor::scalar(s / static_cast<double>(l.size()));
  return tape.record(std::move(n));
}

}  // namespace ops
}  // namespace simvae
