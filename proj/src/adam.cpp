#include "simvae/adam.hpp"

#include <cfloat>
#include <cmath>

#include "simvae/errors.hpp"

namespace simvae {

namespace {
const double kSqrtDblMin = std::sqrt(DBL_MIN);
}  // namespace

void Adam::ensure_state(const ParameterSet& params) {
  if (m_.size() == params.size()) {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (m_[i].shape() != params[i].value.shape())
        throw ShapeError("adam: moment shape " + shape_string(m_[i].shape()) +
                         " does not match parameter '" + params[i].name + "' " +
                         shape_string(params[i].value.shape()));
    return;
  }
  if (!m_.empty()) throw ShapeError("adam: state was created for a different parameter set");
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

void Adam::step(ParameterSet& params) {
  ensure_state(params);
  for (const auto& p : params) {
    if (!p.trainable) continue;
    if (p.grad.shape() != p.value.shape())
      throw ShapeError("adam: gradient of '" + p.name + "' has shape " + shape_string(p.grad.shape()));
    if (!p.grad.all_finite()) throw NumericError("adam: non-finite gradient in parameter '" + p.name + "'");
  }

  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable) continue;
    double* w = p.value.data().data();
    const double* g = p.grad.data().data();
    double* m = m_[i].data().data();
    double* v = v_[i].data().data();
    const std::size_t n = p.value.size();
#pragma omp parallel for simd schedule(static) if (n >= (1u << 15))
    for (std::size_t j = 0; j < n; ++j) {
      // Moments of parameters whose gradient stays zero (dead ReLU units)
      // decay geometrically into the subnormal range, where every later
      // multiply is very slow. Below DBL_MIN they are flushed to zero, and
      // so is the square of a gradient smaller than sqrt(DBL_MIN).
      const double mj = b1 * m[j] + (1.0 - b1) * g[j];
      const double gg = std::abs(g[j]) < kSqrtDblMin ? 0.0 : g[j] * g[j];
      const double vj = b2 * v[j] + (1.0 - b2) * gg;
      m[j] = std::abs(mj) < DBL_MIN ? 0.0 : mj;
      v[j] = vj < DBL_MIN ? 0.0 : vj;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

void Adam::restore(std::uint64_t t, std::vector<Tensor> m, std::vector<Tensor> v) {
  if (m.size() != v.size()) throw ShapeError("adam: moment lists differ in length");
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i].shape() != v[i].shape()) throw ShapeError("adam: moment shapes differ");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace simvae
