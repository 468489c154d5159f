#include "evnet/losses.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace evnet {

namespace {

constexpr double kExpClamp = 700.0;

double stable_sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + e^t) without overflow.
double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

[[noreturn]] void domain_failure(const LossSpec& spec, const char* range) {
  throw std::domain_error("loss " + loss_kind_name(spec.kind()) +
                          ": network output outside valid range " + range);
}

void check_unit_interval(const LossSpec& spec, double f) {
  if (!(f > 0.0 && f < 1.0)) domain_failure(spec, "(0,1)");
}

void check_positive(const LossSpec& spec, double f) {
  if (!(f > 0.0)) domain_failure(spec, "(0,inf)");
}

}  // namespace

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kPolynomial: return "polynomial";
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kExponential: return "exponential";
    case LossKind::kLogistic: return "logistic";
    case LossKind::kAlphaExponential: return "alpha_exponential";
    case LossKind::kAlphaLogExponent: return "alpha_log_exponent";
    case LossKind::kLPopExponential: return "lpop_exponential";
  }
  throw std::logic_error("unknown loss kind");
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "polynomial") return LossKind::kPolynomial;
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "exponential") return LossKind::kExponential;
  if (name == "logistic") return LossKind::kLogistic;
  if (name == "alpha_exponential") return LossKind::kAlphaExponential;
  if (name == "alpha_log_exponent") return LossKind::kAlphaLogExponent;
  if (name == "lpop_exponential") return LossKind::kLPopExponential;
  throw std::invalid_argument("unknown loss kind '" + name + "'");
}

LossSpec::LossSpec(LossKind kind, double alpha, double beta)
    : kind_(kind), alpha_(alpha), beta_(beta) {
  if (!std::isfinite(alpha)) throw std::invalid_argument("loss alpha must be finite");
  if (beta != 1.0) {
    throw std::invalid_argument("l-POP leak coefficient beta is fixed to 1");
  }
  switch (kind) {
    case LossKind::kPolynomial:
      if (!(alpha > 1.0)) {
        throw std::invalid_argument("polynomial loss requires alpha > 1");
      }
      break;
    case LossKind::kLPopExponential:
      if (!(alpha >= 1.0)) {
        throw std::invalid_argument("lpop_exponential loss requires alpha >= 1");
      }
      break;
    case LossKind::kAlphaExponential:
      // The Table-1 exponent is alpha-1; alpha <= 1 makes the objective
      // constant or pushes its infimum to the boundary, so no decoder
      // exists there.
      if (!(alpha > 1.0)) {
        throw std::invalid_argument("alpha_exponential loss requires alpha > 1");
      }
      break;
    case LossKind::kAlphaLogExponent:
      if (!(alpha > 0.0)) {
        throw std::invalid_argument("alpha_log_exponent loss requires alpha > 0");
      }
      break;
    default:
      break;
  }
}

double guarded_exp(double arg, bool* saturated) {
  if (arg > kExpClamp) {
    if (saturated) *saturated = true;
    arg = kExpClamp;
  } else if (arg < -kExpClamp) {
    if (saturated) *saturated = true;
    arg = -kExpClamp;
  }
  return std::exp(arg);
}

double lpop(double x, double alpha) {
  if (!(alpha >= 1.0)) throw std::invalid_argument("lpop requires alpha >= 1");
  // x * |x|^(alpha-1) written without sgn/abs intermediates whose derivative
  // would be undefined at 0; pow(0,0)=1 makes the alpha=1 case exact.
  return x + x * std::pow(std::abs(x), alpha - 1.0);
}

double lpop_derivative(double x, double alpha) {
  if (!(alpha >= 1.0)) throw std::invalid_argument("lpop requires alpha >= 1");
  return 1.0 + alpha * std::pow(std::abs(x), alpha - 1.0);
}

double lpop_inverse(double z, double alpha) {
  if (!(alpha >= 1.0)) throw std::invalid_argument("lpop requires alpha >= 1");
  if (!std::isfinite(z)) throw std::invalid_argument("lpop_inverse requires finite z");
  if (z == 0.0) return 0.0;
  double mag = std::abs(z);
  double sign = z > 0.0 ? 1.0 : -1.0;
  if (alpha == 1.0) return sign * mag / 2.0;
  if (alpha == 2.0) return sign * 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * mag));
  // Monotone on [0, mag]: J(0)=0, J(mag) >= mag. Bisection with a Newton
  // polish keeps it safeguarded for any alpha.
  double lo = 0.0, hi = mag;
  const double tol = 1e-12 * std::max(1.0, mag);
  double y = 0.5 * mag;
  for (int it = 0; it < 200; ++it) {
    double v = lpop(y, alpha) - mag;
    if (std::abs(v) <= tol) break;
    if (v > 0.0) hi = y; else lo = y;
    double d = lpop_derivative(y, alpha);
    double step = y - v / d;
    y = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
  }
  return sign * y;
}

double loss_value(const LossSpec& spec, double f, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  const double m = static_cast<double>(label);
  const double a = spec.alpha();
  switch (spec.kind()) {
    case LossKind::kPolynomial:
      check_unit_interval(spec, f);
      return m * std::pow(1.0 - f, a) + (1.0 - m) * std::pow(f, a);
    case LossKind::kCrossEntropy:
      check_unit_interval(spec, f);
      return label ? -std::log(f) : -std::log1p(-f);
    case LossKind::kExponential:
      return guarded_exp((0.5 - m) * f);
    case LossKind::kLogistic:
      return softplus((1.0 - 2.0 * m) * f);
    case LossKind::kAlphaExponential:
      return guarded_exp((a - 1.0) * softplus((1.0 - 2.0 * m) * f));
    case LossKind::kAlphaLogExponent:
      check_positive(spec, f);
      return guarded_exp((0.5 - m) * a * std::log(f));
    case LossKind::kLPopExponential:
      return guarded_exp((0.5 - m) * lpop(f, a));
  }
  throw std::logic_error("unknown loss kind");
}

double loss_grad(const LossSpec& spec, double f, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  const double m = static_cast<double>(label);
  const double a = spec.alpha();
  switch (spec.kind()) {
    case LossKind::kPolynomial:
      check_unit_interval(spec, f);
      return -a * m * std::pow(1.0 - f, a - 1.0) + a * (1.0 - m) * std::pow(f, a - 1.0);
    case LossKind::kCrossEntropy:
      check_unit_interval(spec, f);
      return label ? -1.0 / f : 1.0 / (1.0 - f);
    case LossKind::kExponential:
      return (0.5 - m) * guarded_exp((0.5 - m) * f);
    case LossKind::kLogistic: {
      double t = (1.0 - 2.0 * m) * f;
      return (1.0 - 2.0 * m) * stable_sigmoid(t);
    }
    case LossKind::kAlphaExponential: {
      double t = (1.0 - 2.0 * m) * f;
      double v = guarded_exp((a - 1.0) * softplus(t));
      return (a - 1.0) * (1.0 - 2.0 * m) * stable_sigmoid(t) * v;
    }
    case LossKind::kAlphaLogExponent: {
      check_positive(spec, f);
      double v = guarded_exp((0.5 - m) * a * std::log(f));
      return (0.5 - m) * a / f * v;
    }
    case LossKind::kLPopExponential: {
      double v = guarded_exp((0.5 - m) * lpop(f, a));
      return (0.5 - m) * lpop_derivative(f, a) * v;
    }
  }
  throw std::logic_error("unknown loss kind");
}

double output_map(const LossSpec& spec, double u) {
  switch (spec.kind()) {
    case LossKind::kCrossEntropy:
    case LossKind::kPolynomial:
      return stable_sigmoid(u);
    case LossKind::kAlphaLogExponent:
      return guarded_exp(u);
    default:
      return u;
  }
}

double output_map_derivative(const LossSpec& spec, double u) {
  switch (spec.kind()) {
    case LossKind::kCrossEntropy:
    case LossKind::kPolynomial: {
      double s = stable_sigmoid(u);
      return s * (1.0 - s);
    }
    case LossKind::kAlphaLogExponent:
      return guarded_exp(u);
    default:
      return 1.0;
  }
}

double decode_log_k(const LossSpec& spec, double f, ModelPriorRatio prior) {
  const double a = spec.alpha();
  const double delta = prior.log_ratio;
  switch (spec.kind()) {
    case LossKind::kExponential:
    case LossKind::kLogistic:
      return f - delta;
    case LossKind::kAlphaExponential:
      return a * f - delta;
    case LossKind::kAlphaLogExponent:
      check_positive(spec, f);
      return a * std::log(f) - delta;
    case LossKind::kLPopExponential:
      return lpop(f, a) - delta;
    case LossKind::kCrossEntropy:
      check_unit_interval(spec, f);
      return std::log(f) - std::log1p(-f) - delta;
    case LossKind::kPolynomial:
      check_unit_interval(spec, f);
      return (a - 1.0) * (std::log(f) - std::log1p(-f)) - delta;
  }
  throw std::logic_error("unknown loss kind");
}

double decode_posterior(double log_k, ModelPriorRatio prior) {
  double t = log_k + prior.log_ratio;
  if (std::isnan(t)) throw std::invalid_argument("decode_posterior: NaN input");
  if (t == std::numeric_limits<double>::infinity()) return 1.0;
  if (t == -std::numeric_limits<double>::infinity()) return 0.0;
  return stable_sigmoid(t);
}

namespace {

enum class Domain { kRealLine, kUnitInterval, kPositive };

Domain loss_domain(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy:
    case LossKind::kPolynomial:
      return Domain::kUnitInterval;
    case LossKind::kAlphaLogExponent:
      return Domain::kPositive;
    default:
      return Domain::kRealLine;
  }
}

}  // namespace

double optimal_f_oracle(const LossSpec& spec, double p1, double p0) {
  if (!(p1 >= 0.0) || !(p0 >= 0.0) || !(p1 + p0 > 0.0)) {
    throw std::invalid_argument("optimal_f_oracle requires p1, p0 >= 0 with p1 + p0 > 0");
  }
  const Domain domain = loss_domain(spec.kind());
  // One-sided densities push the optimum to the domain boundary.
  if (p1 == 0.0 || p0 == 0.0) {
    const double inf = std::numeric_limits<double>::infinity();
    switch (domain) {
      case Domain::kRealLine: return p1 == 0.0 ? -inf : inf;
      case Domain::kUnitInterval: return p1 == 0.0 ? 0.0 : 1.0;
      case Domain::kPositive: return p1 == 0.0 ? 0.0 : inf;
    }
  }

  auto dg = [&](double f) {
    return p1 * loss_grad(spec, f, 1) + p0 * loss_grad(spec, f, 0);
  };

  double lo, hi;
  switch (domain) {
    case Domain::kUnitInterval: {
      lo = 1e-15;
      hi = 1.0 - 1e-15;
      break;
    }
    case Domain::kPositive: {
      lo = 1e-12;
      while (dg(lo) > 0.0 && lo > 1e-290) lo *= 1e-2;
      hi = 1.0;
      while (dg(hi) < 0.0 && hi < 1e290) hi *= 2.0;
      break;
    }
    case Domain::kRealLine: {
      lo = -1.0;
      while (dg(lo) > 0.0 && lo > -1e6) lo *= 2.0;
      hi = 1.0;
      while (dg(hi) < 0.0 && hi < 1e6) hi *= 2.0;
      break;
    }
  }
  if (!(dg(lo) <= 0.0 && dg(hi) >= 0.0)) {
    throw std::runtime_error("optimal_f_oracle: failed to bracket a minimum for loss " +
                             loss_kind_name(spec.kind()));
  }

  // Bisect until the bracket collapses to machine precision; the stated
  // |g'| tolerance is verified afterwards, not used as an early exit.
  const double tol = 1e-10 * (p1 + p0);
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    double g = dg(mid);
    if (g == 0.0) break;
    if (g < 0.0) lo = mid; else hi = mid;
  }
  if (std::abs(dg(mid)) > std::max(tol, 1e6 * std::numeric_limits<double>::epsilon() *
                                            (std::abs(dg(lo)) + std::abs(dg(hi))))) {
    throw std::runtime_error("optimal_f_oracle: bisection failed to converge for loss " +
                             loss_kind_name(spec.kind()));
  }
  return mid;
}

}  // namespace evnet
