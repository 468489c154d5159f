#pragma once
// Generative models with exact evidence oracles: the nested linear-Gaussian
// time-series pair (closed-form log K), the Rastrigin/Gaussian prior pair
// (quadrature log K), a Monte Carlo marginal-likelihood estimator, and a
// Gaussian maximum-likelihood density-ratio baseline.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace evnet {

enum class EvidenceMethod { kClosedForm, kMonteCarlo, kQuadrature, kGaussianMle };

std::string evidence_method_name(EvidenceMethod method);

struct EvidenceValue {
  double log_evidence = 0.0;
  double std_error = 0.0;  // 0 for exact oracles
  EvidenceMethod method = EvidenceMethod::kClosedForm;
};

// ---------------------------------------------------------------------------
// Nested linear-Gaussian time-series pair.
//
// theta_i ~ N(0,1), x = A theta + n, n ~ N(0, Sigma) with diagonal
// heteroscedastic Sigma. M1 carries a linear-growth column A_{j0} = 2 t_j;
// M0 drops it (theta_0 = 0). Both marginals are N(0, Sigma + A A^T).

enum class TimeSeriesVariant { kM1, kM0 };

struct TimeSeriesModelSpec {
  int n = 0;                 // data dimension; M1 parameter dimension
  Eigen::VectorXd t;         // strictly increasing time grid
  TimeSeriesVariant variant = TimeSeriesVariant::kM1;
};

// Default grid t_j = j * step. The paper leaves the grid unspecified; the
// step controls how strongly the growth column separates the models.
Eigen::VectorXd default_time_grid(int n, double step = 1.0);

TimeSeriesModelSpec make_time_series_spec(int n, TimeSeriesVariant variant,
                                          const Eigen::VectorXd& t);
TimeSeriesModelSpec make_time_series_spec(int n, TimeSeriesVariant variant,
                                          double t_step = 1.0);

// N x N for M1 (growth column first, then cosines i = 1..N-1); the growth
// column is deleted for M0.
Eigen::MatrixXd build_design_matrix(const TimeSeriesModelSpec& spec);

// Diagonal of Sigma: sqrt(Sigma_kk) = sqrt(N/100) ((k + 5/2) 8/5)^2.
Eigen::VectorXd noise_covariance(int n);

// count rows of x = A theta + n; theta is discarded.
Eigen::MatrixXd sample_time_series(const TimeSeriesModelSpec& spec, std::uint64_t seed,
                                   int count);

// log N(x; 0, Sigma + A A^T) via Cholesky.
EvidenceValue analytic_log_evidence(const TimeSeriesModelSpec& spec,
                                    const Eigen::VectorXd& x);

// log Z(x|M1) - log Z(x|M0) on a shared grid.
double analytic_log_k(int n, const Eigen::VectorXd& t, const Eigen::VectorXd& x);

// Caches both Cholesky factors for repeated log K evaluation.
class TimeSeriesOracle {
 public:
  TimeSeriesOracle(int n, const Eigen::VectorXd& t);

  double log_evidence_m1(const Eigen::VectorXd& x) const;
  double log_evidence_m0(const Eigen::VectorXd& x) const;
  double log_k(const Eigen::VectorXd& x) const;
  Eigen::VectorXd log_k_batch(const Eigen::MatrixXd& rows) const;

 private:
  int n_;
  Eigen::LLT<Eigen::MatrixXd> llt1_, llt0_;
  double log_norm1_ = 0.0, log_norm0_ = 0.0;  // -(1/2) log det(2 pi C)
};

// log((1/n) sum exp(v_i)) with a delta-method standard error on the log
// scale; the core of the Monte Carlo evidence estimator.
std::pair<double, double> log_mean_exp_stderr(const std::vector<double>& log_values);

// Brute-force marginal likelihood: log-mean-exp of log N(x; A theta, Sigma)
// over prior draws, with a delta-method standard error.
EvidenceValue mc_log_evidence(const TimeSeriesModelSpec& spec, const Eigen::VectorXd& x,
                              std::int64_t n_draws, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Rastrigin / Gaussian prior pair with data model x = theta + noise.

enum class RastriginVariant { kRastrigin, kGaussian };

struct RastriginModelSpec {
  int n = 2;
  double sigma2 = 1.0 / 16.0;
  RastriginVariant variant = RastriginVariant::kRastrigin;
};

RastriginModelSpec make_rastrigin_spec(int n, double sigma2, RastriginVariant variant);

// log of the unnormalized prior density: -theta^2/4 (+ 10(cos(2 pi theta) - 1)
// for the Rastrigin variant).
double rastrigin_log_prior_unnorm(double theta, RastriginVariant variant);

// Exact rejection sampler: propose theta ~ N(0, sqrt(2)), accept with
// probability exp(10(cos(2 pi theta) - 1)); then add N(0, sigma2) noise.
Eigen::MatrixXd sample_rastrigin_data(const RastriginModelSpec& spec, std::uint64_t seed,
                                      int count);

// Per-dimension quadrature Bayes factor; exact because prior and noise
// factorize across dimensions.
class RastriginOracle {
 public:
  explicit RastriginOracle(double sigma2);

  double log_k_1d(double x) const;
  double log_k(const Eigen::VectorXd& x) const;

 private:
  double sigma2_;
  double log_z1_, log_z0_;  // prior normalizers over the quadrature window
};

double rastrigin_log_k_oracle(const Eigen::VectorXd& x, double sigma2);

// ---------------------------------------------------------------------------
// Gaussian maximum-likelihood density-ratio baseline.

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  bool jitter_applied = false;

  double log_density(const Eigen::VectorXd& x) const;

  // Set by fit_gaussian_mle.
  Eigen::MatrixXd chol_lower;
  double log_norm = 0.0;  // -(1/2) log det(2 pi C)
};

// Sample mean and unbiased covariance; escalating diagonal jitter when the
// factorization fails.
GaussianFit fit_gaussian_mle(const Eigen::MatrixXd& samples);

double baseline_log_k(const GaussianFit& fit1, const GaussianFit& fit0,
                      const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// A labelled pair of samplers; label 1 belongs to the first model.

struct GenerativePair {
  int dim = 0;
  std::function<Eigen::MatrixXd(std::uint64_t, int)> sample_m1;
  std::function<Eigen::MatrixXd(std::uint64_t, int)> sample_m0;
};

GenerativePair time_series_pair(int n, const Eigen::VectorXd& t);
GenerativePair rastrigin_pair(int n, double sigma2);

}  // namespace evnet
