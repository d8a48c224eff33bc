#include "simvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "simvae/io.hpp"
#include "simvae/kernels.hpp"

namespace simvae::metrics {

std::string_view strategy_name(BinStrategy s) noexcept {
  return s == BinStrategy::EqualMass ? "equal_mass" : "equal_width";
}

BinStrategy parse_strategy(std::string_view name) {
  if (name == "equal_mass") return BinStrategy::EqualMass;
  if (name == "equal_width") return BinStrategy::EqualWidth;
  throw std::invalid_argument("unknown binning strategy '" + std::string(name) +
                              "' (valid: equal_mass, equal_width)");
}

void BinningConfig::validate() const {
  if (bins < 2 || bins > 65535) throw std::invalid_argument("binning: bins must be in [2, 65535]");
  if (samples < 1) throw std::invalid_argument("binning: samples must be >= 1");
}

std::vector<std::uint16_t> discretize(std::span<const double> values, const BinningConfig& cfg) {
  cfg.validate();
  std::vector<std::uint16_t> out(values.size(), 0);
  if (values.empty()) return out;
  const std::size_t b = cfg.bins;
  if (cfg.strategy == BinStrategy::EqualWidth) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double span = *hi - *lo;
    if (!(span > 0.0)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double t = (values[i] - *lo) / span * static_cast<double>(b);
      out[i] = static_cast<std::uint16_t>(std::min<double>(static_cast<double>(b - 1), std::floor(t)));
    }
    return out;
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double last = static_cast<double>(sorted.size() - 1);
  std::vector<double> cuts(b - 1);
  for (std::size_t j = 1; j < b; ++j) {
    const double pos = last * static_cast<double>(j) / static_cast<double>(b);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    cuts[j - 1] = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = static_cast<std::uint16_t>(std::upper_bound(cuts.begin(), cuts.end(), values[i]) - cuts.begin());
  return out;
}

double entropy(std::span<const std::uint16_t> bins, std::size_t bin_count) {
  std::vector<std::uint64_t> counts(bin_count, 0);
  for (auto v : bins) ++counts.at(v);
  const double n = static_cast<double>(bins.size());
  double h = 0.0;
  for (auto c : counts)
    if (c > 0) {
      // Same expression as the MI terms, so MI(a, a) / H(a) is exactly 1.
      h += static_cast<double>(c) / n * std::log(n / static_cast<double>(c));
    }
  return h;
}

double mutual_information(std::span<const std::uint16_t> a, std::span<const std::uint16_t> b, std::size_t bin_count) {
  if (a.size() != b.size()) throw std::invalid_argument("mutual_information: sample counts differ");
  std::vector<std::uint64_t> joint(bin_count * bin_count, 0);
  kernels::joint_histogram(a, b, bin_count, joint);
  std::vector<std::uint64_t> ca(bin_count, 0), cb(bin_count, 0);
  for (std::size_t i = 0; i < bin_count; ++i)
    for (std::size_t j = 0; j < bin_count; ++j) {
      ca[i] += joint[i * bin_count + j];
      cb[j] += joint[i * bin_count + j];
    }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (std::size_t i = 0; i < bin_count; ++i)
    for (std::size_t j = 0; j < bin_count; ++j) {
      const auto c = joint[i * bin_count + j];
      if (c == 0) continue;
      mi += static_cast<double>(c) / n *
            std::log(static_cast<double>(c) * n / (static_cast<double>(ca[i]) * static_cast<double>(cb[j])));
    }
  return std::max(mi, 0.0);
}

namespace {

void warn(Warnings* w, std::string msg) {
  if (w != nullptr) w->push_back(std::move(msg));
}

void check_samples(std::size_t m, const BinningConfig& cfg, Warnings* warnings) {
  if (m < 100 * cfg.bins)
    warn(warnings, std::to_string(m) + " samples for " + std::to_string(cfg.bins) +
                       " bins; expect an upward MI bias (recommend >= " + std::to_string(100 * cfg.bins) + ")");
}

double nmi_binned(std::span<const std::uint16_t> a, std::span<const std::uint16_t> b, double h_b, std::size_t bins) {
  if (h_b <= 0.0) return 0.0;
  return mutual_information(a, b, bins) / h_b;
}

std::vector<std::vector<std::uint16_t>> binned_columns(const Tensor& t, const BinningConfig& cfg) {
  std::vector<std::vector<std::uint16_t>> cols(t.cols());
  std::vector<double> col(t.rows());
  for (std::size_t k = 0; k < t.cols(); ++k) {
    for (std::size_t i = 0; i < t.rows(); ++i) col[i] = t(i, k);
    cols[k] = discretize(col, cfg);
  }
  return cols;
}

std::vector<std::string> default_labels(std::string prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

double normalized_mi(std::span<const double> a, std::span<const double> b, const BinningConfig& cfg,
                     Warnings* warnings) {
  if (a.size() != b.size()) throw std::invalid_argument("normalized_mi: sample counts differ");
  check_samples(a.size(), cfg, warnings);
  const auto ba = discretize(a, cfg);
  const auto bb = discretize(b, cfg);
  const double hb = entropy(bb, cfg.bins);
  if (hb <= 0.0) {
    warn(warnings, "normalized_mi: second variable is constant; MI defined as 0");
    return 0.0;
  }
  return nmi_binned(ba, bb, hb, cfg.bins);
}

double MIMatrix::diagonal_mean() const {
  const std::size_t n = std::min(values.rows(), values.cols());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += values(i, i);
  return s / static_cast<double>(n);
}

double MIMatrix::off_diagonal_mean() const {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < values.rows(); ++r)
    for (std::size_t c = 0; c < values.cols(); ++c)
      if (r != c) {
        s += values(r, c);
        ++n;
      }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

MIMatrix mim(const Tensor& z, const Tensor& v, const BinningConfig& cfg, std::vector<std::string> z_labels,
             std::vector<std::string> v_labels, Warnings* warnings) {
  if (z.rank() != 2 || v.rank() != 2 || z.rows() != v.rows())
    throw std::invalid_argument("mim: Z and V need the same number of rows");
  if (z_labels.empty()) z_labels = default_labels("z", z.cols());
  if (v_labels.empty()) v_labels = default_labels("v", v.cols());
  if (z_labels.size() != z.cols() || v_labels.size() != v.cols())
    throw std::invalid_argument("mim: label count does not match column count");
  check_samples(z.rows(), cfg, warnings);

  const auto zb = binned_columns(z, cfg);
  const auto vb = binned_columns(v, cfg);
  std::vector<double> hv(v.cols());
  for (std::size_t k = 0; k < v.cols(); ++k) {
    hv[k] = entropy(vb[k], cfg.bins);
    if (hv[k] <= 0.0) warn(warnings, "mim: factor '" + v_labels[k] + "' is constant; its column is 0");
  }
  MIMatrix m{std::move(z_labels), std::move(v_labels), Tensor({z.cols(), v.cols()})};
  const std::size_t entries = z.cols() * v.cols();
#pragma omp parallel for schedule(dynamic)
  for (std::size_t e = 0; e < entries; ++e) {
    const std::size_t j = e / v.cols(), k = e % v.cols();
    m.values(j, k) = nmi_binned(zb[j], vb[k], hv[k], cfg.bins);
  }
  return m;
}

MigResult mig(const MIMatrix& m) {
  if (m.values.rows() < 2) throw std::invalid_argument("mig: needs at least two latent variables");
  MigResult r;
  for (std::size_t k = 0; k < m.values.cols(); ++k) {
    double top1 = -1.0, top2 = -1.0;
    for (std::size_t j = 0; j < m.values.rows(); ++j) {
      const double v = m.values(j, k);
      if (v > top1) {
        top2 = top1;
        top1 = v;
      } else if (v > top2) {
        top2 = v;
      }
    }
    r.gaps.push_back(top1 - top2);
  }
  double s = 0.0;
  for (double g : r.gaps) s += g;
  r.mig = s / static_cast<double>(r.gaps.size());
  return r;
}

GroundTruth ground_truth_mim_mig(const sim::Simulator& sim, const BinningConfig& cfg, std::uint64_t seed,
                                 Warnings* warnings) {
  cfg.validate();
  const Tensor v = sim::sample_prior_batch(sim, cfg.samples, stream_seed(seed, "gt.prior"), "sample");
  const Tensor vbar = sim::apply_invariance_batch(sim, v, stream_seed(seed, "gt.invariance"), "sample");
  std::vector<std::string> bar_labels;
  for (const auto& n : sim.spec().latent_names) bar_labels.push_back(n + "_bar");
  MIMatrix m = mim(vbar, v, cfg, bar_labels, sim.spec().latent_names, warnings);
  MigResult g = mig(m);
  return {std::move(m), std::move(g)};
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need two equal-length series");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: x has no spread");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

RlcCorrelation rlc_correlation(const Tensor& z, const Tensor& mu, const RlcFilter& filter) {
  if (z.rank() != 2 || z.cols() != 3 || mu.shape() != z.shape())
    throw std::invalid_argument("rlc_correlation: expected matching [rows, 3] tables of (R, L, C)");
  std::vector<double> f_true, f_pred, q_true, q_pred;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto t = sim::physical_params(z(i, 0), z(i, 1), z(i, 2));
    if (!(t.f0 < filter.max_f0 && t.q < filter.max_q)) continue;
    const auto p = sim::physical_params(mu(i, 0), mu(i, 1), mu(i, 2));
    f_true.push_back(t.f0 / 1e3);
    f_pred.push_back(p.f0 / 1e3);
    q_true.push_back(t.q);
    q_pred.push_back(p.q);
  }
  if (f_true.size() < 10)
    throw std::invalid_argument("rlc_correlation: only " + std::to_string(f_true.size()) +
                                " rows pass the f0/Q filter (need 10)");
  return {fit_line(f_true, f_pred), fit_line(q_true, q_pred), f_true.size()};
}

// ------------------------------------------------------------------ export

std::string mim_csv(const MIMatrix& m) {
  std::vector<std::string> header{"latent"};
  header.insert(header.end(), m.col_labels.begin(), m.col_labels.end());
  CsvWriter csv(header);
  for (std::size_t r = 0; r < m.values.rows(); ++r) {
    std::vector<std::string> cells{m.row_labels[r]};
    for (std::size_t c = 0; c < m.values.cols(); ++c) cells.push_back(format_double(m.values(r, c)));
    csv.add_row(cells);
  }
  return csv.str();
}

Canvas mim_heatmap(const MIMatrix& m, std::size_t cell_size) {
  if (cell_size < 1) throw std::invalid_argument("mim_heatmap: cell_size must be >= 1");
  Canvas canvas(m.values.rows() * cell_size, m.values.cols() * cell_size);
  for (std::size_t r = 0; r < canvas.height; ++r)
    for (std::size_t c = 0; c < canvas.width; ++c)
      canvas.at(r, c) = std::clamp(m.values(r / cell_size, c / cell_size), 0.0, 1.0);
  return canvas;
}

nlohmann::json mig_summary(const MIMatrix& m, const MigResult& g, const BinningConfig& cfg) {
  nlohmann::json gaps = nlohmann::json::object();
  for (std::size_t k = 0; k < g.gaps.size(); ++k) gaps[m.col_labels[k]] = g.gaps[k];
  return {{"mig", g.mig},
          {"gaps", gaps},
          {"bins", cfg.bins},
          {"samples", cfg.samples},
          {"strategy", strategy_name(cfg.strategy)}};
}

}  // namespace simvae::metrics
