#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evnet/losses.hpp"
#include "evnet/rng.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace evnet;

namespace {

// Independent check of loss_grad by central differences.
double fd_loss_grad(const LossSpec& spec, double f, int label, double h = 1e-7) {
  return (loss_value(spec, f + h, label) - loss_value(spec, f - h, label)) / (2.0 * h);
}

std::vector<LossSpec> test_grid() {
  std::vector<LossSpec> specs;
  specs.emplace_back(LossKind::kExponential);
  specs.emplace_back(LossKind::kLogistic);
  specs.emplace_back(LossKind::kCrossEntropy);
  for (double a : {1.5, 2.0, 3.0}) specs.emplace_back(LossKind::kPolynomial, a);
  for (double a : {1.5, 2.0, 3.0}) specs.emplace_back(LossKind::kAlphaExponential, a);
  for (double a : {1.0, 1.5, 2.0, 3.0}) specs.emplace_back(LossKind::kAlphaLogExponent, a);
  for (double a : {1.0, 1.5, 2.0, 3.0}) specs.emplace_back(LossKind::kLPopExponential, a);
  return specs;
}

double domain_sample(const LossSpec& spec, Rng& rng) {
  switch (spec.kind()) {
    case LossKind::kCrossEntropy:
    case LossKind::kPolynomial:
      return 0.02 + 0.96 * rng.uniform01();
    case LossKind::kAlphaLogExponent:
      return std::exp(4.0 * (rng.uniform01() - 0.5));
    default:
      return 6.0 * (rng.uniform01() - 0.5);
  }
}

}  // namespace

TEST_CASE("lpop transform values") {
  CHECK(lpop(0.0, 2.0) == 0.0);
  CHECK(lpop(3.0, 2.0) == doctest::Approx(12.0));
  CHECK(lpop(-3.0, 2.0) == doctest::Approx(-12.0));
  CHECK(lpop(5.0, 1.0) == doctest::Approx(10.0));
  CHECK_THROWS_AS(lpop(1.0, 0.5), std::invalid_argument);
}

TEST_CASE("lpop is odd and strictly increasing") {
  Rng rng(11);
  double prev = lpop(-50.0, 1.5);
  for (double x = -49.5; x <= 50.0; x += 0.5) {
    double v = lpop(x, 1.5);
    CHECK(v > prev);
    prev = v;
  }
  for (int i = 0; i < 200; ++i) {
    double x = 100.0 * (rng.uniform01() - 0.5);
    for (double a : {1.0, 1.5, 2.0, 3.0}) {
      CHECK(lpop(-x, a) == -lpop(x, a));
    }
  }
}

TEST_CASE("lpop_inverse round trips") {
  CHECK(lpop_inverse(12.0, 2.0) == doctest::Approx(3.0));
  CHECK(lpop_inverse(0.0, 3.0) == 0.0);
  CHECK(lpop_inverse(-12.0, 2.0) == doctest::Approx(-3.0));
  Rng rng(12);
  for (double a : {1.0, 1.5, 2.0, 3.0}) {
    for (int i = 0; i < 200; ++i) {
      double x = 100.0 * (rng.uniform01() - 0.5);
      CHECK(lpop_inverse(lpop(x, a), a) == doctest::Approx(x).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(lpop_inverse(std::numeric_limits<double>::quiet_NaN(), 2.0),
                  std::invalid_argument);
}

TEST_CASE("lpop derivative matches finite differences away from zero") {
  Rng rng(13);
  for (double a : {1.0, 1.5, 2.0, 3.0}) {
    for (int i = 0; i < 50; ++i) {
      double x = 6.0 * (rng.uniform01() - 0.5);
      if (std::abs(x) < 0.05) continue;
      double h = 1e-6;
      double fd = (lpop(x + h, a) - lpop(x - h, a)) / (2.0 * h);
      CHECK(lpop_derivative(x, a) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("loss spec validation") {
  CHECK_THROWS_AS(LossSpec(LossKind::kPolynomial, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(LossSpec(LossKind::kPolynomial, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(LossSpec(LossKind::kLPopExponential, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(LossSpec(LossKind::kAlphaExponential, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(LossSpec(LossKind::kAlphaLogExponent, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(LossSpec(LossKind::kExponential, 2.0, 0.5), std::invalid_argument);
  CHECK_NOTHROW(LossSpec(LossKind::kExponential));
}

TEST_CASE("loss values match the table") {
  CHECK(loss_value(LossSpec(LossKind::kExponential), 0.0, 1) == doctest::Approx(1.0));
  CHECK(loss_value(LossSpec(LossKind::kExponential), 2.0, 0) ==
        doctest::Approx(std::exp(1.0)));
  CHECK(loss_value(LossSpec(LossKind::kLPopExponential, 2.0), 1.0, 1) ==
        doctest::Approx(std::exp(-1.0)));
  CHECK(loss_value(LossSpec(LossKind::kCrossEntropy), 0.5, 1) ==
        doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(loss_value(LossSpec(LossKind::kCrossEntropy), 1.5, 1), std::domain_error);
  CHECK_THROWS_AS(loss_value(LossSpec(LossKind::kAlphaLogExponent, 2.0), -1.0, 0),
                  std::domain_error);
}

TEST_CASE("loss gradients: exact values and finite differences") {
  CHECK(loss_grad(LossSpec(LossKind::kExponential), 0.0, 1) == doctest::Approx(-0.5));
  CHECK(loss_grad(LossSpec(LossKind::kExponential), 0.0, 0) == doctest::Approx(0.5));
  Rng rng(21);
  for (const auto& spec : test_grid()) {
    for (int label : {0, 1}) {
      for (int i = 0; i < 40; ++i) {
        double f = domain_sample(spec, rng);
        double analytic = loss_grad(spec, f, label);
        double fd = fd_loss_grad(spec, f, label);
        CHECK(analytic ==
              doctest::Approx(fd).epsilon(1e-6).scale(std::max(1.0, std::abs(analytic))));
      }
    }
  }
}

TEST_CASE("symmetric-loss label symmetry") {
  Rng rng(22);
  for (int i = 0; i < 100; ++i) {
    double f = 6.0 * (rng.uniform01() - 0.5);
    for (const auto& spec :
         {LossSpec(LossKind::kExponential), LossSpec(LossKind::kLogistic),
          LossSpec(LossKind::kLPopExponential, 2.0), LossSpec(LossKind::kLPopExponential, 3.0)}) {
      CHECK(loss_value(spec, -f, 0) == doctest::Approx(loss_value(spec, f, 1)));
    }
    double p = 0.02 + 0.96 * rng.uniform01();
    for (const auto& spec :
         {LossSpec(LossKind::kCrossEntropy), LossSpec(LossKind::kPolynomial, 2.0),
          LossSpec(LossKind::kPolynomial, 3.0)}) {
      CHECK(loss_value(spec, 1.0 - p, 0) == doctest::Approx(loss_value(spec, p, 1)));
    }
  }
}

TEST_CASE("decoders: pinned examples") {
  CHECK(decode_log_k(LossSpec(LossKind::kExponential), 1.5) == doctest::Approx(1.5));
  CHECK(decode_log_k(LossSpec(LossKind::kLPopExponential, 2.0), 1.0) == doctest::Approx(2.0));
  CHECK(decode_log_k(LossSpec(LossKind::kCrossEntropy), 0.75) ==
        doctest::Approx(std::log(3.0)));
  // Polynomial alpha=3 at odds 4: stationarity (f/(1-f))^2 = 4 gives f = 2/3.
  LossSpec poly3(LossKind::kPolynomial, 3.0);
  double fstar = optimal_f_oracle(poly3, 4.0, 1.0);
  CHECK(fstar == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
  CHECK(decode_log_k(poly3, 2.0 / 3.0) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("decode_posterior") {
  CHECK(decode_posterior(0.0) == doctest::Approx(0.5));
  CHECK(decode_posterior(std::log(3.0)) == doctest::Approx(0.75));
  CHECK(decode_posterior(std::numeric_limits<double>::infinity()) == 1.0);
  CHECK(decode_posterior(-std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(decode_posterior(1000.0) == doctest::Approx(1.0));
  // Prior ratio shifts the midpoint.
  CHECK(decode_posterior(0.0, ModelPriorRatio{std::log(3.0)}) == doctest::Approx(0.75));
}

TEST_CASE("optimal_f_oracle pinned cases") {
  CHECK(optimal_f_oracle(LossSpec(LossKind::kExponential), std::exp(1.0), 1.0) ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(optimal_f_oracle(LossSpec(LossKind::kCrossEntropy), 2.5, 2.5) ==
        doctest::Approx(0.5).epsilon(1e-9));
  CHECK(optimal_f_oracle(LossSpec(LossKind::kPolynomial, 3.0), 4.0, 1.0) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK_THROWS_AS(optimal_f_oracle(LossSpec(LossKind::kExponential), 0.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("decoder-oracle equivalence over a random odds grid") {
  Rng rng(23);
  for (const auto& spec : test_grid()) {
    for (int i = 0; i < 60; ++i) {
      double log_r = 20.0 * (rng.uniform01() - 0.5);
      double p0 = std::exp(-std::abs(log_r) / 2.0);
      double p1 = p0 * std::exp(log_r);
      double fstar = optimal_f_oracle(spec, p1, p0);
      CHECK(std::abs(decode_log_k(spec, fstar) - log_r) < 1e-6);
    }
  }
}

TEST_CASE("decoded posterior is monotone in f") {
  Rng rng(24);
  for (const auto& spec : test_grid()) {
    double prev = -1.0;
    for (double q = 0.02; q < 1.0; q += 0.02) {
      double f;
      switch (spec.kind()) {
        case LossKind::kCrossEntropy:
        case LossKind::kPolynomial:
          f = q * 0.98;
          break;
        case LossKind::kAlphaLogExponent:
          f = q * 5.0 + 1e-3;
          break;
        default:
          // keep decoded log K below sigmoid saturation in double precision
          f = (q - 0.5) * 5.0;
          break;
      }
      double p = decode_posterior(decode_log_k(spec, f));
      CHECK(p > prev);
      prev = p;
    }
  }
}

TEST_CASE("guarded_exp saturates instead of overflowing") {
  bool saturated = false;
  double v = guarded_exp(1e4, &saturated);
  CHECK(saturated);
  CHECK(std::isfinite(v));
  saturated = false;
  CHECK(guarded_exp(0.0, &saturated) == 1.0);
  CHECK_FALSE(saturated);
  CHECK(std::isfinite(loss_value(LossSpec(LossKind::kExponential), -1e6, 1)));
}

TEST_CASE("output maps keep training on the loss domain") {
  Rng rng(25);
  for (const auto& spec : test_grid()) {
    for (int i = 0; i < 30; ++i) {
      double u = 30.0 * (rng.uniform01() - 0.5);
      double f = output_map(spec, u);
      CHECK_NOTHROW(loss_value(spec, f, 0));
      CHECK_NOTHROW(loss_value(spec, f, 1));
      double h = 1e-6 * std::max(1.0, std::abs(u));
      double fd = (output_map(spec, u + h) - output_map(spec, u - h)) / (2.0 * h);
      CHECK(output_map_derivative(spec, u) ==
            doctest::Approx(fd).epsilon(1e-5).scale(std::max(1.0, std::abs(fd))));
    }
  }
}
