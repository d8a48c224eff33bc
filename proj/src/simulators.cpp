#include "simvae/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <stdexcept>

#include "simvae/errors.hpp"

namespace simvae::sim {

namespace {

// Runs f(i) for i in [0, n) in parallel and rethrows the first exception.
template <typename F>
void parallel_rows(std::size_t n, F&& f) {
  std::exception_ptr error;
#pragma omp parallel for schedule(static) if (n > 1)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (...) {
#pragma omp critical(simvae_parallel_rows)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

bool in_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

std::string fmt(double v) { return std::to_string(v); }

}  // namespace

// ------------------------------------------------------------------ spec

std::size_t SimulatorSpec::output_dim() const noexcept {
  if (const auto* img = std::get_if<ImageOutput>(&modality)) return img->height * img->width;
  return std::get<VectorOutput>(modality).length;
}

const ImageOutput& SimulatorSpec::image() const {
  if (const auto* img = std::get_if<ImageOutput>(&modality)) return *img;
  throw std::invalid_argument("simulator '" + name + "' does not produce images");
}

Simulator::Simulator(SimulatorSpec spec) : spec_(std::move(spec)) {
  if (spec_.priors.size() != spec_.latent_names.size())
    throw std::invalid_argument("simulator spec: one prior per latent required");
}

std::vector<double> Simulator::simulate(std::span<const double> z) const {
  std::vector<double> out(output_dim());
  simulate(z, out);
  return out;
}

void Simulator::check_latent_size(std::span<const double> z) const {
  if (z.size() != latent_dim())
    throw ShapeError(spec_.name + ": expected " + std::to_string(latent_dim()) + " latents, got " +
                     std::to_string(z.size()));
}

void Simulator::check_output_size(std::span<const double> out) const {
  if (out.size() != output_dim())
    throw ShapeError(spec_.name + ": output buffer holds " + std::to_string(out.size()) +
                     " values, expected " + std::to_string(output_dim()));
}

void Simulator::sample_prior(Rng& rng, std::span<double> z) const {
  check_latent_size(z);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto& p = spec_.priors[i];
    if (p.kind == PriorKind::Uniform)
      z[i] = rng.uniform(p.lo, p.hi);
    else
      z[i] = std::pow(10.0, rng.uniform(std::log10(p.lo), std::log10(p.hi)));
  }
}

void Simulator::apply_invariance(std::span<double> z, Rng&) const { check_latent_size(z); }

void Simulator::project_to_domain(std::span<double> z) const { check_latent_size(z); }

void Simulator::normalize(std::span<const double> z, std::span<double> z_net) const {
  check_latent_size(z);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto& p = spec_.priors[i];
    if (p.kind == PriorKind::Uniform) {
      z_net[i] = (p.lo == -1.0 && p.hi == 1.0) ? z[i] : 2.0 * (z[i] - p.lo) / (p.hi - p.lo) - 1.0;
    } else {
      const double lo = std::log10(p.lo), hi = std::log10(p.hi);
      z_net[i] = 2.0 * (std::log10(z[i]) - lo) / (hi - lo) - 1.0;
    }
  }
}

void Simulator::denormalize(std::span<const double> z_net, std::span<double> z) const {
  check_latent_size(z_net);
  for (std::size_t i = 0; i < z_net.size(); ++i) {
    const auto& p = spec_.priors[i];
    if (p.kind == PriorKind::Uniform) {
      z[i] = (p.lo == -1.0 && p.hi == 1.0) ? z_net[i] : p.lo + (z_net[i] + 1.0) * 0.5 * (p.hi - p.lo);
    } else {
      const double lo = std::log10(p.lo), hi = std::log10(p.hi);
      z[i] = std::pow(10.0, lo + (z_net[i] + 1.0) * 0.5 * (hi - lo));
    }
  }
}

// ------------------------------------------------------------------ box

BoxSimulator::BoxSimulator(std::size_t height, std::size_t width)
    : Simulator(SimulatorSpec{
          .name = "box",
          .latent_names = {"x", "y", "w", "h"},
          .priors = {{PriorKind::Uniform, 0.0, 1.0 - kMinSize},
                     {PriorKind::Uniform, 0.0, 1.0 - kMinSize},
                     {PriorKind::Uniform, kMinSize, 1.0},
                     {PriorKind::Uniform, kMinSize, 1.0}},
          .joint_prior = true,
          .modality = ImageOutput{height, width},
          .invariance = Invariance::None,
      }) {}

void BoxSimulator::simulate(std::span<const double> z, std::span<double> out) const {
  check_latent_size(z);
  check_output_size(out);
  const double x = z[0], y = z[1], w = z[2], h = z[3];
  if (!in_unit(x) || !in_unit(y) || !in_unit(w) || !in_unit(h) || x + w > 1.0 || y + h > 1.0 ||
      w < kMinSize || h < kMinSize)
    throw DomainError("box: z = (" + fmt(x) + ", " + fmt(y) + ", " + fmt(w) + ", " + fmt(h) +
                      ") is outside the domain");

  const auto& img = spec().image();
  Canvas canvas(img.height, img.width);
  const PixelPoint ll = unit_to_pixel(x, y, canvas);
  const PixelPoint ur = unit_to_pixel(x + w, y + h, canvas);
  const PixelPoint lr{ur.col, ll.row};
  const PixelPoint ul{ll.col, ur.row};
  draw_line(canvas, ll, ur, 0.5);
  draw_line(canvas, ul, lr, 0.5);
  draw_line(canvas, ll, lr, 1.0);
  draw_line(canvas, lr, ur, 1.0);
  draw_line(canvas, ur, ul, 1.0);
  draw_line(canvas, ul, ll, 1.0);
  std::copy(canvas.pixels.begin(), canvas.pixels.end(), out.begin());
}

namespace {
// Largest offset o <= 1 - size such that o + size <= 1 holds exactly.
double fit_offset(double o, double size) {
  while (o > 0.0 && o + size > 1.0) o = std::nextafter(o, 0.0);
  return o;
}
}  // namespace

void BoxSimulator::sample_prior(Rng& rng, std::span<double> z) const {
  check_latent_size(z);
  const double w = rng.uniform(kMinSize, 1.0);
  const double h = rng.uniform(kMinSize, 1.0);
  z[0] = fit_offset(rng.uniform() * (1.0 - w), w);
  z[1] = fit_offset(rng.uniform() * (1.0 - h), h);
  z[2] = w;
  z[3] = h;
}

void BoxSimulator::project_to_domain(std::span<double> z) const {
  check_latent_size(z);
  for (std::size_t i = 2; i < 4; ++i) z[i] = std::clamp(z[i], kMinSize, 1.0);
  for (std::size_t i = 0; i < 2; ++i) z[i] = fit_offset(std::clamp(z[i], 0.0, 1.0 - z[i + 2]), z[i + 2]);
}

// ------------------------------------------------------------------ polygon

PolygonSimulator::PolygonSimulator(std::size_t height, std::size_t width, PermutationGroup group)
    : Simulator(SimulatorSpec{
          .name = "polygon",
          .latent_names = {"x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4"},
          .priors = std::vector<LatentPrior>(8, {PriorKind::Uniform, 0.0, 1.0}),
          .joint_prior = false,
          .modality = ImageOutput{height, width},
          .invariance = Invariance::PointPermutation,
      }),
      group_(group) {}

void PolygonSimulator::simulate(std::span<const double> z, std::span<double> out) const {
  check_latent_size(z);
  check_output_size(out);
  std::array<UnitPoint, 4> pts;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!in_unit(z[2 * i]) || !in_unit(z[2 * i + 1]))
      throw DomainError("polygon: point " + std::to_string(i + 1) + " lies outside the unit square");
    pts[i] = {z[2 * i], z[2 * i + 1]};
  }
  const auto& img = spec().image();
  Canvas canvas(img.height, img.width);
  fill_polygon_even_odd(canvas, pts, 1.0);
  std::copy(canvas.pixels.begin(), canvas.pixels.end(), out.begin());
}

std::vector<PointOrder> dihedral_orders() {
  std::vector<PointOrder> out;
  for (std::size_t shift = 0; shift < 4; ++shift) {
    PointOrder fwd, rev;
    for (std::size_t i = 0; i < 4; ++i) {
      fwd[i] = (shift + i) % 4;
      rev[i] = (shift + 4 - i) % 4;
    }
    out.push_back(fwd);
    out.push_back(rev);
  }
  return out;
}

std::vector<PointOrder> symmetric_orders() {
  std::vector<PointOrder> out;
  PointOrder p{0, 1, 2, 3};
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

void reorder_points(std::span<double> z, const PointOrder& order) {
  if (z.size() != 8) throw ShapeError("reorder_points: expected 8 coordinates");
  std::array<double, 8> src;
  std::copy(z.begin(), z.end(), src.begin());
  for (std::size_t i = 0; i < 4; ++i) {
    z[2 * i] = src[2 * order[i]];
    z[2 * i + 1] = src[2 * order[i] + 1];
  }
}

void PolygonSimulator::apply_invariance(std::span<double> z, Rng& rng) const {
  check_latent_size(z);
  static const auto dihedral = dihedral_orders();
  static const auto symmetric = symmetric_orders();
  const auto& orders = group_ == PermutationGroup::Dihedral ? dihedral : symmetric;
  reorder_points(z, orders[rng.below(orders.size())]);
}

void PolygonSimulator::project_to_domain(std::span<double> z) const {
  check_latent_size(z);
  for (auto& v : z) v = std::clamp(v, 0.0, 1.0);
}

// ------------------------------------------------------------------ fourier

namespace {

SimulatorSpec fourier_spec(OutputModality modality) {
  SimulatorSpec spec;
  spec.name = "fourier";
  spec.latent_names.push_back("c0");
  for (std::size_t k = 1; k <= FourierSimulator::kHarmonics; ++k) spec.latent_names.push_back("a" + std::to_string(k));
  for (std::size_t k = 1; k <= FourierSimulator::kHarmonics; ++k) spec.latent_names.push_back("b" + std::to_string(k));
  spec.priors.assign(spec.latent_names.size(),
                     {PriorKind::Uniform, -FourierSimulator::kCoefficientRange, FourierSimulator::kCoefficientRange});
  spec.modality = modality;
  return spec;
}

}  // namespace

FourierSimulator::FourierSimulator(OutputModality modality) : Simulator(fourier_spec(modality)) {}

FourierSimulator FourierSimulator::plot(std::size_t height, std::size_t width) {
  return FourierSimulator(ImageOutput{height, width});
}

FourierSimulator FourierSimulator::samples(std::size_t count) {
  return FourierSimulator(VectorOutput{count});
}

double FourierSimulator::evaluate(std::span<const double> z, double t) {
  double f = z[0];
  for (std::size_t k = 1; k <= kHarmonics; ++k) {
    const double kt = static_cast<double>(k) * t;
    f += z[k] * std::cos(kt) + z[kHarmonics + k] * std::sin(kt);
  }
  return f;
}

long FourierSimulator::value_row(double f) const {
  const auto& img = spec().image();
  const double clipped = std::clamp(f, -kYMax, kYMax);
  return unit_to_row((clipped + kYMax) / (2.0 * kYMax), img.height);
}

void FourierSimulator::simulate(std::span<const double> z, std::span<double> out) const {
  check_latent_size(z);
  check_output_size(out);
  for (double v : z)
    if (!std::isfinite(v)) throw DomainError("fourier: non-finite coefficient");
  constexpr double two_pi = 2.0 * std::numbers::pi;

  if (const auto* vec = std::get_if<VectorOutput>(&spec().modality)) {
    for (std::size_t j = 0; j < vec->length; ++j)
      out[j] = evaluate(z, two_pi * static_cast<double>(j) / static_cast<double>(vec->length));
    return;
  }
  const auto& img = spec().image();
  Canvas canvas(img.height, img.width);
  PixelPoint prev{};
  for (std::size_t c = 0; c < img.width; ++c) {
    const double t = two_pi * static_cast<double>(c) / static_cast<double>(img.width);
    const PixelPoint p{static_cast<long>(c), value_row(evaluate(z, t))};
    draw_line(canvas, c == 0 ? p : prev, p, 1.0);
    prev = p;
  }
  std::copy(canvas.pixels.begin(), canvas.pixels.end(), out.begin());
}

// ------------------------------------------------------------------ rlc

PhysicalParams physical_params(double r, double l, double c) {
  if (!(r > 0.0) || !(l > 0.0) || !(c > 0.0) || !std::isfinite(r) || !std::isfinite(l) || !std::isfinite(c))
    throw DomainError("rlc: R, L and C must be positive and finite");
  return {1.0 / (2.0 * std::numbers::pi * std::sqrt(l * c)), std::sqrt(l / c) / r};
}

RlcSimulator::RlcSimulator(std::size_t frequencies, double f_lo, double f_hi, double scale_min,
                           double scale_max)
    : Simulator(SimulatorSpec{
          .name = "rlc",
          .latent_names = {"R", "L", "C"},
          .priors = {{PriorKind::LogUniform, 1.0, 1e3},
                     {PriorKind::LogUniform, 1e-3, 1e-1},
                     {PriorKind::LogUniform, 1e-7, 1e-5}},
          .joint_prior = false,
          .modality = VectorOutput{2 * frequencies},
          .invariance = Invariance::Scaling,
      }),
      log_scale_min_(std::log10(scale_min)),
      log_scale_max_(std::log10(scale_max)) {
  if (frequencies < 2 || !(f_lo > 0.0) || !(f_hi > f_lo))
    throw std::invalid_argument("rlc: need at least 2 frequencies over a positive band");
  if (!(scale_min > 0.0) || !(scale_max >= scale_min))
    throw std::invalid_argument("rlc: bad invariance scale range");
  const double a = std::log10(f_lo), b = std::log10(f_hi);
  for (std::size_t i = 0; i < frequencies; ++i)
    freqs_.push_back(std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(frequencies - 1)));
}

void RlcSimulator::simulate(std::span<const double> z, std::span<double> out) const {
  check_latent_size(z);
  check_output_size(out);
  const double r = z[0], l = z[1], c = z[2];
  physical_params(r, l, c);  // domain check
  const std::size_t n = freqs_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 2.0 * std::numbers::pi * freqs_[i];
    // Reactance over resistance; H = 1 / (1 + j·u).
    const double u = w * (l / r) - 1.0 / (w * (c * r));
    out[i] = -10.0 * std::log10(1.0 + u * u) / kGainNorm;
    out[n + i] = -std::atan(u) / (std::numbers::pi / 2.0);
  }
}

void RlcSimulator::rescale(std::span<double> z, double x) {
  z[0] /= x;
  z[1] /= x;
  z[2] *= x;
}

void RlcSimulator::apply_invariance(std::span<double> z, Rng& rng) const {
  check_latent_size(z);
  const auto& p = spec().priors;
  const double lr = std::log10(z[0]), ll = std::log10(z[1]), lc = std::log10(z[2]);
  double lo = log_scale_min_, hi = log_scale_max_;
  // log10 of the scale factor s must keep every latent inside its prior box:
  // R and L shrink by s, C grows by s.
  lo = std::max({lo, lr - std::log10(p[0].hi), ll - std::log10(p[1].hi), std::log10(p[2].lo) - lc});
  hi = std::min({hi, lr - std::log10(p[0].lo), ll - std::log10(p[1].lo), std::log10(p[2].hi) - lc});
  const double u = rng.uniform();
  if (!(lo <= hi)) return;  // z already outside the box: leave it alone
  rescale(z, std::pow(10.0, lo + (hi - lo) * u));
}

void RlcSimulator::project_to_domain(std::span<double> z) const {
  check_latent_size(z);
  for (auto& v : z)
    if (!(v > 0.0) || !std::isfinite(v)) v = std::numeric_limits<double>::min();
}

// ------------------------------------------------------------------ identity

IdentitySimulator::IdentitySimulator(std::size_t dim)
    : Simulator([dim] {
        SimulatorSpec spec;
        spec.name = "identity";
        for (std::size_t i = 0; i < dim; ++i) spec.latent_names.push_back("v" + std::to_string(i));
        spec.priors.assign(dim, {PriorKind::Uniform, -1.0, 1.0});
        spec.modality = VectorOutput{dim};
        return spec;
      }()) {}

void IdentitySimulator::simulate(std::span<const double> z, std::span<double> out) const {
  check_latent_size(z);
  check_output_size(out);
  std::copy(z.begin(), z.end(), out.begin());
}

// ------------------------------------------------------------------ registry

const std::vector<std::string>& simulator_names() {
  static const std::vector<std::string> names = {"box", "polygon", "fourier", "rlc", "identity"};
  return names;
}

std::unique_ptr<Simulator> make_simulator(const SimulatorOptions& o) {
  if (o.name == "box") return std::make_unique<BoxSimulator>(o.height, o.width);
  if (o.name == "polygon") return std::make_unique<PolygonSimulator>(o.height, o.width, o.permutation_group);
  if (o.name == "fourier") {
    if (o.fourier_mode == "plot") return std::make_unique<FourierSimulator>(FourierSimulator::plot(o.height, o.width));
    if (o.fourier_mode == "sample") return std::make_unique<FourierSimulator>(FourierSimulator::samples(o.fourier_samples));
    throw std::invalid_argument("unknown fourier mode '" + o.fourier_mode + "' (valid: plot, sample)");
  }
  if (o.name == "rlc") return std::make_unique<RlcSimulator>();
  if (o.name == "identity") return std::make_unique<IdentitySimulator>(o.identity_dim);
  std::string valid;
  for (const auto& n : simulator_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown simulator '" + o.name + "' (valid: " + valid + ")");
}

// ------------------------------------------------------------------ batches

Tensor sample_prior_batch(const Simulator& sim, std::size_t count, std::uint64_t seed,
                          std::string_view stream_name, std::uint64_t first) {
  Tensor z({count, sim.latent_dim()});
  parallel_rows(count, [&](std::size_t i) {
    Rng rng = stream(seed, stream_name, {first + i});
    sim.sample_prior(rng, z.row(i));
  });
  return z;
}

Tensor simulate_batch(const Simulator& sim, const Tensor& z) {
  if (z.rank() != 2 || z.cols() != sim.latent_dim())
    throw ShapeError(sim.spec().name + ": latent batch has shape " + shape_string(z.shape()));
  Tensor x({z.rows(), sim.output_dim()});
  parallel_rows(z.rows(), [&](std::size_t i) { sim.simulate(z.row(i), x.row(i)); });
  return x;
}

Tensor normalize_batch(const Simulator& sim, const Tensor& z) {
  Tensor out(z.shape());
  for (std::size_t i = 0; i < z.rows(); ++i) sim.normalize(z.row(i), out.row(i));
  return out;
}

Tensor denormalize_batch(const Simulator& sim, const Tensor& z_net) {
  Tensor out(z_net.shape());
  for (std::size_t i = 0; i < z_net.rows(); ++i) sim.denormalize(z_net.row(i), out.row(i));
  return out;
}

Tensor apply_invariance_batch(const Simulator& sim, const Tensor& z, std::uint64_t seed,
                              std::string_view stream_name) {
  Tensor out = z;
  parallel_rows(z.rows(), [&](std::size_t i) {
    Rng rng = stream(seed, stream_name, {i});
    sim.apply_invariance(out.row(i), rng);
  });
  return out;
}

}  // namespace simvae::sim
