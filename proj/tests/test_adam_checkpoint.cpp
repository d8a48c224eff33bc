#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "simvae/adam.hpp"
#include "simvae/checkpoint.hpp"
#include "simvae/errors.hpp"

using namespace simvae;
using namespace simvae::testing;

namespace {

// Quadratic toy problem: minimize ||W x - y||^2 over a fixed random batch.
ParameterSet run_adam(std::uint64_t seed, int steps) {
  Rng rng(seed);
  ParameterSet params;
  Parameter& w = params.add("w", random_tensor(rng, {3, 2}));
  const Tensor x = random_tensor(rng, {8, 3});
  const Tensor y = random_tensor(rng, {8, 2});
  Adam adam;
  for (int s = 0; s < steps; ++s) {
    Tape tape;
    auto loss = ops::mse_loss(ops::matmul(tape.constant(x), tape.param(w)), tape.constant(y));
    tape.backward(loss);
    adam.step(params);
  }
  return params;
}

}  // namespace

TEST_CASE("adam defaults") {
  const AdamConfig c;
  CHECK(c.lr == 0.001);
  CHECK(c.beta1 == 0.9);
  CHECK(c.beta2 == 0.999);
  CHECK(c.eps == 1e-8);
}

TEST_CASE("zero gradient on a fresh state leaves parameters unchanged") {
  ParameterSet params;
  Parameter& p = params.add("p", Tensor::matrix(2, 2, {1, -2, 3, 0.5}));
  const Tensor before = p.value;
  Adam adam;
  adam.step(params);
  CHECK(p.value == before);
  CHECK(adam.steps() == 1);
}

TEST_CASE("first step moves every element by about lr against the gradient sign") {
  ParameterSet params;
  Parameter& p = params.add("p", Tensor({4}, 0.0));
  const double grads[] = {3.0, -0.25, 1e-3, -40.0};
  for (int i = 0; i < 4; ++i) p.grad[i] = grads[i];
  Adam adam;
  adam.step(params);
  for (int i = 0; i < 4; ++i) {
    // m_hat = g, v_hat = g^2 at t = 1, so the step is lr * g / (|g| + eps).
    const double expected = -0.001 * grads[i] / (std::abs(grads[i]) + 1e-8);
    CHECK(p.value[i] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(p.value[i]) == doctest::Approx(0.001).epsilon(1e-4));
  }
}

TEST_CASE("adam is bit-deterministic and skips frozen parameters") {
  const ParameterSet a = run_adam(7, 100);
  const ParameterSet b = run_adam(7, 100);
  CHECK(a[0].value == b[0].value);

  ParameterSet params;
  Parameter& frozen = params.add("frozen", Tensor({2}, 1.0), false);
  frozen.grad = Tensor({2}, 5.0);
  Adam adam;
  adam.step(params);
  CHECK(frozen.value == Tensor({2}, 1.0));
}

TEST_CASE("non-finite gradient is reported with the parameter name") {
  ParameterSet params;
  params.add("encoder.l0.weight", Tensor({2}, 1.0));
  params[0].grad[1] = std::nan("");
  Adam adam;
  try {
    adam.step(params);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("encoder.l0.weight") != std::string::npos);
  }
  CHECK(adam.steps() == 0);
}

TEST_CASE("moments of a silent parameter reach exactly zero, never subnormal") {
  ParameterSet params;
  Parameter& p = params.add("p", Tensor({3}, 0.5));
  p.grad[0] = 1.0;
  p.grad[1] = 1e-200;
  p.grad[2] = -1e-160;
  Adam adam;
  adam.step(params);
  // Squares of 1e-200 and 1e-160 are below DBL_MIN.
  CHECK(adam.second_moments()[0][1] == 0.0);
  CHECK(adam.second_moments()[0][2] == 0.0);
  CHECK(adam.first_moments()[0][1] != 0.0);
  p.grad = Tensor({3});
  for (int s = 0; s < 20000; ++s) {
    adam.step(params);
    for (const auto* moments : {&adam.first_moments(), &adam.second_moments()})
      for (double x : (*moments)[0].data()) REQUIRE(std::fpclassify(x) != FP_SUBNORMAL);
  }
  // beta1^20000 is far below DBL_MIN; the second moment decays much slower.
  for (double x : adam.first_moments()[0].data()) CHECK(x == 0.0);
  CHECK(adam.second_moments()[0][0] > 0.0);
}

TEST_CASE("checkpoint byte layout") {
  Checkpoint ckpt;
  ckpt.put("ab", Tensor::matrix(1, 2, {1.0, -2.0}));
  ckpt.metadata["step"] = 3;
  const std::string bytes = serialize_checkpoint(ckpt);

  std::string expected = "SIMVAE1\n";
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) expected += static_cast<char>((v >> (8 * i)) & 0xff);
  };
  auto f64 = [&](double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) expected += static_cast<char>((bits >> (8 * i)) & 0xff);
  };
  u32(2);
  expected += "ab";
  u32(2);
  u32(1);
  u32(2);
  f64(1.0);
  f64(-2.0);
  u32(0);
  expected += R"({"step":3})";
  CHECK(bytes == expected);
}

TEST_CASE("checkpoint round-trips bit-exactly (random contents)") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Checkpoint ckpt;
    const int n = 1 + static_cast<int>(rng.below(5));
    for (int i = 0; i < n; ++i) {
      Shape shape;
      const auto rank = 1 + rng.below(3);
      for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(1 + rng.below(6));
      Tensor t = random_tensor(rng, shape, -1e10, 1e10);
      t[0] = -0.0;
      ckpt.put("t" + std::to_string(i) + "/μ", std::move(t));
    }
    ckpt.metadata = {{"step", rng.below(1000)}, {"seed", rng.next()}, {"config_hash", "abc"}};
    const Checkpoint back = parse_checkpoint(serialize_checkpoint(ckpt));
    CHECK(back == ckpt);
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(ckpt));
  }
}

TEST_CASE("malformed checkpoints are rejected") {
  CHECK_THROWS_AS(parse_checkpoint("SIMVAE2\n"), FormatError);
  Checkpoint ckpt;
  ckpt.put("w", Tensor({3}, 1.0));
  std::string bytes = serialize_checkpoint(ckpt);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, 20)), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(bytes + "{oops"), FormatError);
}

TEST_CASE("parameters and optimizer state survive a save/load cycle") {
  Rng rng(8);
  ParameterSet params;
  params.add("a", random_tensor(rng, {2, 3}));
  params.add("b", random_tensor(rng, {3}));
  for (auto& p : params)
    for (auto& g : p.grad.data()) g = rng.uniform(-1, 1);
  Adam adam;
  adam.step(params);
  adam.step(params);

  Checkpoint ckpt;
  export_parameters(params, ckpt);
  export_adam(adam, params, ckpt);
  const auto path = std::filesystem::temp_directory_path() / "simvae_test.ckpt";
  save_checkpoint(ckpt, path);
  const Checkpoint loaded = load_checkpoint(path);
  std::filesystem::remove(path);

  ParameterSet restored;
  restored.add("a", Tensor({2, 3}));
  restored.add("b", Tensor({3}));
  import_parameters(restored, loaded);
  Adam adam2;
  import_adam(adam2, restored, loaded);
  CHECK(restored[0].value == params[0].value);
  CHECK(adam2.steps() == 2);
  CHECK(adam2.first_moments() == adam.first_moments());
  CHECK(adam2.second_moments() == adam.second_moments());

  ParameterSet wrong;
  wrong.add("a", Tensor({3, 2}));
  CHECK_THROWS_AS(import_parameters(wrong, loaded), FormatError);
}
