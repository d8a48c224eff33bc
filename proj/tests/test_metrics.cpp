#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simvae/metrics.hpp"
#include "simvae/simulators.hpp"

using namespace simvae;
using namespace simvae::metrics;

namespace {

std::vector<double> uniforms(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

Tensor columns(const std::vector<std::vector<double>>& cols) {
  Tensor t({cols[0].size(), cols.size()});
  for (std::size_t k = 0; k < cols.size(); ++k)
    for (std::size_t i = 0; i < cols[k].size(); ++i) t(i, k) = cols[k][i];
  return t;
}

// Direct plug-in estimate from a joint table, written independently of the
// library's count-based form.
double oracle_nmi(const std::vector<std::uint16_t>& a, const std::vector<std::uint16_t>& b, std::size_t bins) {
  std::vector<std::vector<double>> p(bins, std::vector<double>(bins, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) p[a[i]][b[i]] += 1.0 / a.size();
  std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j < bins; ++j) {
      pa[i] += p[i][j];
      pb[j] += p[i][j];
    }
  double mi = 0.0, hb = 0.0;
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j < bins; ++j)
      if (p[i][j] > 0) mi += p[i][j] * std::log(p[i][j] / (pa[i] * pb[j]));
  for (double q : pb)
    if (q > 0) hb -= q * std::log(q);
  return mi / hb;
}

}  // namespace

TEST_CASE("equal-mass bins hold equal counts and equal values share a bin") {
  Rng rng(1);
  const auto v = uniforms(rng, 10000);
  BinningConfig cfg;
  const auto b = discretize(v, cfg);
  std::vector<std::size_t> counts(20, 0);
  for (auto x : b) ++counts[x];
  for (auto c : counts) CHECK(c == 500);
  std::vector<double> ties{1, 1, 1, 2, 2, 3};
  cfg.bins = 3;
  const auto tb = discretize(ties, cfg);
  CHECK(tb[0] == tb[1]);
  CHECK(tb[3] == tb[4]);
}

TEST_CASE("equal-width bins split the observed range") {
  BinningConfig cfg;
  cfg.bins = 4;
  cfg.strategy = BinStrategy::EqualWidth;
  const auto b = discretize(std::vector<double>{0.0, 0.24, 0.26, 0.74, 1.0}, cfg);
  CHECK(b == std::vector<std::uint16_t>{0, 0, 1, 2, 3});
  CHECK(discretize(std::vector<double>{2, 2, 2}, cfg) == std::vector<std::uint16_t>{0, 0, 0});
  CHECK_THROWS_AS(discretize(std::vector<double>{1}, BinningConfig{1}), std::invalid_argument);
}

TEST_CASE("normalized MI of a variable with itself is exactly one") {
  Rng rng(2);
  for (std::size_t n : {1000u, 50000u}) {
    const auto a = uniforms(rng, n);
    CHECK(normalized_mi(a, a, BinningConfig{}) == 1.0);
  }
}

TEST_CASE("independent uniforms have MI below 0.02") {
  Rng rng(3);
  const auto a = uniforms(rng, 50000), b = uniforms(rng, 50000);
  const double nmi = normalized_mi(a, b, BinningConfig{});
  // Plug-in bias for independent variables: (B-1)^2 / (2 M H).
  const double bias = 19.0 * 19.0 / (2.0 * 50000 * std::log(20.0));
  MESSAGE("independent nmi " << nmi << ", bias oracle " << bias);
  CHECK(nmi < 0.02);
  CHECK(nmi == doctest::Approx(bias).epsilon(0.5));
}

TEST_CASE("a monotone bijection preserves MI") {
  Rng rng(4);
  const auto a = uniforms(rng, 50000);
  std::vector<double> b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = 1.0 - a[i];
  CHECK(normalized_mi(a, b, BinningConfig{}) > 0.995);
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = std::exp(3.0 * a[i]);
  CHECK(normalized_mi(a, b, BinningConfig{}) == 1.0);
}

TEST_CASE("library MI matches a plug-in oracle and is symmetric up to normalization") {
  Rng rng(5);
  BinningConfig cfg;
  cfg.bins = 7;
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = uniforms(rng, 3000);
    std::vector<double> b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] * a[i] + 0.3 * rng.uniform();
    const auto ba = discretize(a, cfg), bb = discretize(b, cfg);
    const double ab = normalized_mi(a, b, cfg), ba_ = normalized_mi(b, a, cfg);
    CHECK(ab == doctest::Approx(oracle_nmi(ba, bb, 7)).epsilon(1e-12));
    CHECK(ab >= 0.0);
    CHECK(std::abs(ab * entropy(bb, 7) - ba_ * entropy(ba, 7)) < 1e-12);
  }
}

TEST_CASE("a constant second variable gives 0 and a warning") {
  Rng rng(6);
  const auto a = uniforms(rng, 5000);
  const std::vector<double> c(a.size(), 0.5);
  Warnings w;
  CHECK(normalized_mi(a, c, BinningConfig{}, &w) == 0.0);
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("constant") != std::string::npos);
  w.clear();
  normalized_mi(std::vector<double>(100, 0.0), std::vector<double>(100, 1.0), BinningConfig{}, &w);
  CHECK(w.size() == 2);  // too few samples, constant b
}

TEST_CASE("MIM of independent factors with themselves is the identity") {
  Rng rng(7);
  const Tensor v = columns({uniforms(rng, 50000), uniforms(rng, 50000), uniforms(rng, 50000)});
  const MIMatrix m = mim(v, v, BinningConfig{});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      if (r == c)
        CHECK(m.at(r, c) == 1.0);
      else
        CHECK(m.at(r, c) < 0.02);
    }
  const MigResult g = mig(m);
  CHECK(g.mig > 0.98);
  CHECK(g.mig <= 1.05);
}

TEST_CASE("box prior couples w with x and h with y") {
  sim::BoxSimulator box;
  const Tensor v = sim::sample_prior_batch(box, 50000, 8, "prior");
  const MIMatrix m = mim(v, v, BinningConfig{}, box.spec().latent_names, box.spec().latent_names);
  CHECK(m.at(2, 0) > 0.02);  // w vs x
  CHECK(m.at(3, 1) > 0.02);  // h vs y
  CHECK(m.at(2, 1) < 0.02);  // w vs y: independent
}

TEST_CASE("shuffling a factor removes its MI") {
  Rng rng(9);
  auto a = uniforms(rng, 50000);
  auto b = a;
  for (auto& x : b) x = x * x;
  Tensor z = columns({a, b});
  std::vector<double> shuffled = b;
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.below(i + 1)]);
  const MIMatrix m = mim(z, columns({a, shuffled}), BinningConfig{});
  CHECK(m.at(0, 0) == 1.0);
  CHECK(m.at(0, 1) < 0.02);
  CHECK(m.at(1, 1) < 0.02);
}

TEST_CASE("MIG edge cases") {
  Rng rng(10);
  const auto a = uniforms(rng, 20000), b = uniforms(rng, 20000);
  const Tensor v = columns({a, b});
  Warnings w;
  const MIMatrix constant = mim(columns({std::vector<double>(20000, 1.0), std::vector<double>(20000, 1.0)}), v,
                                BinningConfig{}, {}, {}, &w);
  CHECK(mig(constant).mig == 0.0);
  const MigResult dup = mig(mim(columns({a, a}), v, BinningConfig{}));
  CHECK(dup.gaps[0] == 0.0);
  CHECK_THROWS_AS(mig(mim(columns({a}), v, BinningConfig{})), std::invalid_argument);
}

TEST_CASE("ground truth MIG per simulator") {
  BinningConfig cfg;
  sim::SimulatorOptions opt;
  opt.name = "fourier";
  const auto fourier = ground_truth_mim_mig(*sim::make_simulator(opt), cfg, 1);
  CHECK(fourier.gap.mig == doctest::Approx(1.0).epsilon(0.05));
  sim::BoxSimulator box;
  const auto b = ground_truth_mim_mig(box, cfg, 1);
  MESSAGE("box ground truth MIG " << b.gap.mig);
  CHECK(std::abs(b.gap.mig - 0.82) <= 0.10);
  // Invariance-free: MIM(V, V) has an exact unit diagonal.
  for (std::size_t k = 0; k < 4; ++k) CHECK(b.matrix.at(k, k) == 1.0);
  CHECK(b.matrix.row_labels[0] == "x_bar");
}

TEST_CASE("ground truth is stable when the sample count doubles") {
  sim::RlcSimulator rlc;
  BinningConfig cfg;
  cfg.samples = 25000;
  const double small = ground_truth_mim_mig(rlc, cfg, 2).gap.mig;
  cfg.samples = 50000;
  const double large = ground_truth_mim_mig(rlc, cfg, 2).gap.mig;
  MESSAGE("rlc MIG " << small << " -> " << large);
  CHECK(std::abs(small - large) <= 0.02);
}

TEST_CASE("line fit recovers exact lines") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(2.5 * v - 1);
  const LinearFit f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(fit_line(std::vector<double>{1, 1}, std::vector<double>{0, 1}), std::invalid_argument);
}

TEST_CASE("RLC correlation: perfect and gauge-shifted encoders") {
  sim::RlcSimulator rlc;
  const Tensor z = sim::sample_prior_batch(rlc, 2000, 11, "prior");
  const RlcCorrelation exact = rlc_correlation(z, z);
  CHECK(exact.f0.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact.f0.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact.q.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact.q.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact.rows > 100);
  CHECK(exact.rows < 2000);

  const Tensor gauged = sim::apply_invariance_batch(rlc, z, 12, "gauge");
  CHECK(gauged != z);
  const RlcCorrelation g = rlc_correlation(z, gauged);
  CHECK(g.rows == exact.rows);
  CHECK(std::abs(g.f0.slope - exact.f0.slope) < 1e-9);
  CHECK(std::abs(g.f0.r2 - exact.f0.r2) < 1e-9);
  CHECK(std::abs(g.q.slope - exact.q.slope) < 1e-9);
  CHECK(std::abs(g.q.r2 - exact.q.r2) < 1e-9);

  const Tensor few = sim::sample_prior_batch(rlc, 12, 11, "prior");
  CHECK_THROWS_AS(rlc_correlation(few, few), std::invalid_argument);
}

TEST_CASE("MIM exports") {
  MIMatrix m{{"a", "b"}, {"x", "y", "z"}, Tensor::matrix(2, 3, {1.0, 0.5, 0.0, 0.25, 1.02, 0.0})};
  CHECK(mim_csv(m) == "latent,x,y,z\na,1,0.5,0\nb,0.25,1.02,0\n");
  const Canvas heat = mim_heatmap(m, 4);
  CHECK(heat.height == 8);
  CHECK(heat.width == 12);
  CHECK(heat.at(0, 0) == 1.0);
  CHECK(heat.at(5, 6) == 1.0);  // clamped
  CHECK(heat.at(3, 5) == 0.5);
  const auto j = mig_summary(m, mig(m), BinningConfig{});
  CHECK(j["bins"] == 20);
  CHECK(j["strategy"] == "equal_mass");
  CHECK(j["gaps"]["y"].get<double>() == doctest::Approx(0.52));
}
