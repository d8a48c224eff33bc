#include "simvae/artifacts.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

#include "simvae/errors.hpp"
#include "simvae/io.hpp"

namespace simvae {

namespace {

const Tensor& quartet_row(const EvalTable& t, std::size_t row) {
  switch (row) {
    case 0: return t.x;
    case 1: return t.g;
    case 2: return t.s_mu;
    case 3: return t.g_mu;
  }
  throw std::out_of_range("quartet row must be 0..3");
}

void check_image(const Tensor& values, const sim::ImageOutput& image) {
  if (values.rank() != 2 || values.cols() != image.height * image.width)
    throw ShapeError("artifact: rows of " + std::to_string(values.rank() == 2 ? values.cols() : 0) +
                     " values do not form " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                     " images");
}

// Copies sample `i` of `values` into `canvas` with its top-left at (r0, c0).
void blit(Canvas& canvas, const Tensor& values, std::size_t i, const sim::ImageOutput& image, std::size_t r0,
          std::size_t c0) {
  for (std::size_t r = 0; r < image.height; ++r)
    for (std::size_t c = 0; c < image.width; ++c)
      canvas.at(r0 + r, c0 + c) = std::clamp(values(i, r * image.width + c), 0.0, 1.0);
}

}  // namespace

Canvas grid_mosaic(const EvalTable& table, const sim::ImageOutput& image) {
  const std::size_t n = table.rows();
  Canvas canvas(4 * image.height, n * image.width);
  for (std::size_t row = 0; row < 4; ++row) {
    const Tensor& values = quartet_row(table, row);
    check_image(values, image);
    for (std::size_t i = 0; i < n; ++i) blit(canvas, values, i, image, row * image.height, i * image.width);
  }
  return canvas;
}

Canvas quartet_image(const EvalTable& table, std::size_t i, std::size_t row, const sim::ImageOutput& image) {
  const Tensor& values = quartet_row(table, row);
  check_image(values, image);
  Canvas canvas(image.height, image.width);
  blit(canvas, values, i, image, 0, 0);
  return canvas;
}

std::string quartet_csv(const sim::Simulator& sim, const EvalTable& table) {
  if (sim.spec().is_image()) throw std::invalid_argument("quartet_csv: " + sim.spec().name + " renders images");
  const Tensor* rows[4] = {&table.x, &table.g, &table.s_mu, &table.g_mu};
  if (const auto* rlc = dynamic_cast<const sim::RlcSimulator*>(&sim)) {
    const auto& freqs = rlc->frequencies();
    const std::size_t nf = freqs.size();
    CsvWriter csv({"sample", "freq", "gain_X", "gain_Xbar", "gain_X_zbar", "gain_Xbar_zbar", "phase_X", "phase_Xbar",
                   "phase_X_zbar", "phase_Xbar_zbar"});
    for (std::size_t i = 0; i < table.rows(); ++i)
      for (std::size_t f = 0; f < nf; ++f) {
        std::vector<double> cells{static_cast<double>(i), freqs[f]};
        for (const Tensor* t : rows) cells.push_back((*t)(i, f) * sim::RlcSimulator::kGainNorm);
        for (const Tensor* t : rows) cells.push_back((*t)(i, nf + f) * std::numbers::pi / 2);
        csv.add_row(cells);
      }
    return csv.str();
  }
  CsvWriter csv({"sample", "index", "X", "Xbar", "X_zbar", "Xbar_zbar"});
  for (std::size_t i = 0; i < table.rows(); ++i)
    for (std::size_t j = 0; j < sim.output_dim(); ++j) {
      std::vector<double> cells{static_cast<double>(i), static_cast<double>(j)};
      for (const Tensor* t : rows) cells.push_back((*t)(i, j));
      csv.add_row(cells);
    }
  return csv.str();
}

std::vector<double> traversal_points(std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("traversal: steps must be >= 1");
  if (steps == 1) return {0.0};
  std::vector<double> v(steps);
  for (std::size_t i = 0; i < steps; ++i) v[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(steps - 1);
  return v;
}

Tensor traversal_outputs(Decoder& decoder, std::size_t latent, std::size_t steps) {
  if (latent >= decoder.latent_dim())
    throw std::out_of_range("latent index " + std::to_string(latent) + " out of range (K = " +
                            std::to_string(decoder.latent_dim()) + ")");
  const auto points = traversal_points(steps);
  Tensor z({steps, decoder.latent_dim()});
  for (std::size_t i = 0; i < steps; ++i) z(i, latent) = points[i];
  return decoder.decode(z);
}

Canvas traversal_strip(const Tensor& outputs, const sim::ImageOutput& image) {
  check_image(outputs, image);
  Canvas canvas(image.height, outputs.rows() * image.width);
  for (std::size_t i = 0; i < outputs.rows(); ++i) blit(canvas, outputs, i, image, 0, i * image.width);
  return canvas;
}

std::string traversal_csv(const Tensor& outputs, const std::vector<double>& points) {
  if (outputs.rank() != 2 || outputs.rows() != points.size())
    throw ShapeError("traversal_csv: one output row per traversal point expected");
  std::vector<std::string> header{"step", "value"};
  for (std::size_t j = 0; j < outputs.cols(); ++j) header.push_back("out_" + std::to_string(j));
  CsvWriter csv(header);
  for (std::size_t i = 0; i < outputs.rows(); ++i) {
    std::vector<double> cells{static_cast<double>(i), points[i]};
    for (std::size_t j = 0; j < outputs.cols(); ++j) cells.push_back(outputs(i, j));
    csv.add_row(cells);
  }
  return csv.str();
}

Tensor encode_simulated(const sim::Simulator& sim, Encoder& encoder, const Tensor& z, std::size_t chunk) {
  if (chunk == 0) throw std::invalid_argument("encode_simulated: chunk must be >= 1");
  const std::size_t n = z.rows(), k = z.cols();
  Tensor mu({n, encoder.latent_dim()});
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t m = std::min(chunk, n - begin);
    Tensor part({m, k});
    std::copy_n(z.data().begin() + begin * k, m * k, part.data().begin());
    const Tensor out = encoder.infer_mu(sim::simulate_batch(sim, part));
    std::copy(out.data().begin(), out.data().end(), mu.data().begin() + begin * mu.cols());
  }
  return mu;
}

metrics::MIMatrix model_mim(const sim::Simulator& sim, const Tensor& z, const Tensor& mu_net,
                            const metrics::BinningConfig& cfg, metrics::Warnings* warnings) {
  std::vector<std::string> rows;
  for (const auto& name : sim.spec().latent_names) rows.push_back("mu_" + name);
  return metrics::mim(mu_net, z, cfg, rows, sim.spec().latent_names, warnings);
}

std::string rlc_correlation_csv(const Tensor& z, const Tensor& mu, const metrics::RlcFilter& filter) {
  CsvWriter csv({"f0_true_khz", "f0_mu_khz", "q_true", "q_mu"});
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto t = sim::physical_params(z(i, 0), z(i, 1), z(i, 2));
    if (!(t.f0 < filter.max_f0 && t.q < filter.max_q)) continue;
    const auto p = sim::physical_params(mu(i, 0), mu(i, 1), mu(i, 2));
    csv.add_row(std::vector<double>{t.f0 / 1e3, p.f0 / 1e3, t.q, p.q});
  }
  return csv.str();
}

nlohmann::json rlc_correlation_json(const metrics::RlcCorrelation& c) {
  const auto fit = [](const metrics::LinearFit& f) {
    return nlohmann::json{{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
  };
  return {{"f0_khz", fit(c.f0)}, {"q", fit(c.q)}, {"rows", c.rows}};
}

}  // namespace simvae
