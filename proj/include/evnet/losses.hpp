#pragma once
// The designer loss family. Each loss kind has a value, an analytic gradient
// with respect to the network output, a decoder from the optimal output to
// the log Bayes factor, and an output map that keeps training on the loss's
// natural domain. optimal_f_oracle is the independent ground truth used to
// verify every decoder.

#include <string>

namespace evnet {

enum class LossKind {
  kPolynomial,
  kCrossEntropy,
  kExponential,
  kLogistic,
  kAlphaExponential,
  kAlphaLogExponent,
  kLPopExponential,
};

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

// Log prior ratio log(p(M1)/p(M0)); zero for balanced training sets.
struct ModelPriorRatio {
  double log_ratio = 0.0;
};

class LossSpec {
 public:
  // Validates the (kind, alpha) pair; beta is fixed to 1 and any other
  // value is rejected.
  LossSpec(LossKind kind, double alpha = 2.0, double beta = 1.0);

  LossKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  static LossSpec default_recommendation() {
    return LossSpec(LossKind::kLPopExponential, 2.0);
  }

 private:
  LossKind kind_;
  double alpha_;
  double beta_;
};

// Exponential with the argument clamped to |arg| <= 700 so extreme
// mini-batches saturate instead of producing inf. If `saturated` is
// non-null it is set when the clamp engaged.
double guarded_exp(double arg, bool* saturated = nullptr);

// Leaky parity-odd power transform J_alpha(x) = x + x|x|^(alpha-1).
double lpop(double x, double alpha);
// Derivative dJ/dx = 1 + alpha |x|^(alpha-1).
double lpop_derivative(double x, double alpha);
// Unique y with lpop(y, alpha) = z. Closed form for alpha in {1, 2},
// safeguarded monotone root-finding otherwise.
double lpop_inverse(double z, double alpha);

// V(f, m) for m in {0, 1}. Domain checks throw std::domain_error naming the
// loss kind and valid range.
double loss_value(const LossSpec& spec, double f, int label);
// dV/df, analytic.
double loss_grad(const LossSpec& spec, double f, int label);

// Maps the raw network output u onto the loss's domain: identity for the
// ratio-valued kinds, sigmoid for CrossEntropy/Polynomial, exp for
// AlphaLogExponent. Training and decoding both go through this map.
double output_map(const LossSpec& spec, double u);
double output_map_derivative(const LossSpec& spec, double u);

// Inverts the optimal-output map of the kind and removes the log prior
// ratio, yielding log K.
double decode_log_k(const LossSpec& spec, double f, ModelPriorRatio prior = {});

// p(M1 | x) = sigma(log_k + log prior ratio), overflow-safe.
double decode_posterior(double log_k, ModelPriorRatio prior = {});

// Numerically minimizes g(f) = p1 V(f,1) + p0 V(f,0) over the kind's
// domain. Independent of the decoders; used to verify them.
double optimal_f_oracle(const LossSpec& spec, double p1, double p0);

}  // namespace evnet
