#include "evnet/models.hpp"

#include "evnet/quadrature.hpp"
#include "evnet/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace evnet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kQuadWindow = 12.0;   // integrand < 1e-30 of peak beyond |theta| = 12
constexpr double kQuadTol = 1e-10;

void check_time_grid(const Eigen::VectorXd& t) {
  for (Eigen::Index j = 1; j < t.size(); ++j) {
    if (!(t[j] > t[j - 1])) {
      throw std::invalid_argument("time grid must be strictly increasing");
    }
  }
}

Eigen::MatrixXd marginal_covariance(const TimeSeriesModelSpec& spec) {
  Eigen::MatrixXd a = build_design_matrix(spec);
  Eigen::MatrixXd c = a * a.transpose();
  c.diagonal() += noise_covariance(spec.n);
  return c;
}

double log_normal_quadform(const Eigen::LLT<Eigen::MatrixXd>& llt, double log_norm,
                           const Eigen::VectorXd& x) {
  Eigen::VectorXd y = llt.matrixL().solve(x);
  return log_norm - 0.5 * y.squaredNorm();
}

double chol_log_norm(const Eigen::LLT<Eigen::MatrixXd>& llt, int n) {
  double log_det = 0.0;
  for (int i = 0; i < n; ++i) log_det += std::log(llt.matrixL()(i, i));
  log_det *= 2.0;
  return -0.5 * (log_det + n * std::log(kTwoPi));
}

}  // namespace

std::string evidence_method_name(EvidenceMethod method) {
  switch (method) {
    case EvidenceMethod::kClosedForm: return "closed-form";
    case EvidenceMethod::kMonteCarlo: return "monte-carlo";
    case EvidenceMethod::kQuadrature: return "quadrature";
    case EvidenceMethod::kGaussianMle: return "gaussian-mle";
  }
  throw std::logic_error("unknown evidence method");
}

Eigen::VectorXd default_time_grid(int n, double step) {
  if (n < 2) throw std::invalid_argument("time-series dimension must be >= 2");
  if (!(step > 0.0)) throw std::invalid_argument("time step must be > 0");
  Eigen::VectorXd t(n);
  for (int j = 0; j < n; ++j) t[j] = step * j;
  return t;
}

TimeSeriesModelSpec make_time_series_spec(int n, TimeSeriesVariant variant,
                                          const Eigen::VectorXd& t) {
  if (n < 2) throw std::invalid_argument("time-series dimension must be >= 2");
  if (t.size() != n) throw std::invalid_argument("time grid length must equal n");
  check_time_grid(t);
  return TimeSeriesModelSpec{n, t, variant};
}

TimeSeriesModelSpec make_time_series_spec(int n, TimeSeriesVariant variant, double t_step) {
  return make_time_series_spec(n, variant, default_time_grid(n, t_step));
}

Eigen::MatrixXd build_design_matrix(const TimeSeriesModelSpec& spec) {
  const int n = spec.n;
  const int cols = spec.variant == TimeSeriesVariant::kM1 ? n : n - 1;
  Eigen::MatrixXd a(n, cols);
  int col = 0;
  if (spec.variant == TimeSeriesVariant::kM1) {
    for (int j = 0; j < n; ++j) a(j, 0) = 2.0 * spec.t[j];
    col = 1;
  }
  for (int i = 1; i < n; ++i, ++col) {
    for (int j = 0; j < n; ++j) a(j, col) = std::cos((i - 0.5) * spec.t[j]);
  }
  return a;
}

Eigen::VectorXd noise_covariance(int n) {
  if (n < 1) throw std::invalid_argument("noise_covariance: n must be >= 1");
  Eigen::VectorXd diag(n);
  const double scale = std::sqrt(n / 100.0);
  for (int k = 0; k < n; ++k) {
    double sd = scale * std::pow((k + 2.5) * 1.6, 2.0);
    diag[k] = sd * sd;
  }
  return diag;
}

Eigen::MatrixXd sample_time_series(const TimeSeriesModelSpec& spec, std::uint64_t seed,
                                   int count) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  Eigen::MatrixXd a = build_design_matrix(spec);
  Eigen::VectorXd noise_sd = noise_covariance(spec.n).array().sqrt();
  Rng rng = Rng(seed).split(0x74736d706cULL);
  Eigen::MatrixXd out(count, spec.n);
  Eigen::VectorXd theta(a.cols());
  for (int r = 0; r < count; ++r) {
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = rng.normal();
    Eigen::VectorXd x = a * theta;
    for (int j = 0; j < spec.n; ++j) x[j] += noise_sd[j] * rng.normal();
    out.row(r) = x.transpose();
  }
  return out;
}

EvidenceValue analytic_log_evidence(const TimeSeriesModelSpec& spec,
                                    const Eigen::VectorXd& x) {
  if (x.size() != spec.n) throw std::invalid_argument("data vector length must equal n");
  Eigen::MatrixXd c = marginal_covariance(spec);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("analytic_log_evidence: covariance factorization failed");
  }
  double log_norm = chol_log_norm(llt, spec.n);
  return EvidenceValue{log_normal_quadform(llt, log_norm, x), 0.0,
                       EvidenceMethod::kClosedForm};
}

double analytic_log_k(int n, const Eigen::VectorXd& t, const Eigen::VectorXd& x) {
  TimeSeriesOracle oracle(n, t);
  return oracle.log_k(x);
}

TimeSeriesOracle::TimeSeriesOracle(int n, const Eigen::VectorXd& t) : n_(n) {
  auto m1 = make_time_series_spec(n, TimeSeriesVariant::kM1, t);
  auto m0 = make_time_series_spec(n, TimeSeriesVariant::kM0, t);
  llt1_.compute(marginal_covariance(m1));
  llt0_.compute(marginal_covariance(m0));
  if (llt1_.info() != Eigen::Success || llt0_.info() != Eigen::Success) {
    throw std::runtime_error("TimeSeriesOracle: covariance factorization failed");
  }
  log_norm1_ = chol_log_norm(llt1_, n);
  log_norm0_ = chol_log_norm(llt0_, n);
}

double TimeSeriesOracle::log_evidence_m1(const Eigen::VectorXd& x) const {
  if (x.size() != n_) throw std::invalid_argument("data vector length must equal n");
  return log_normal_quadform(llt1_, log_norm1_, x);
}

double TimeSeriesOracle::log_evidence_m0(const Eigen::VectorXd& x) const {
  if (x.size() != n_) throw std::invalid_argument("data vector length must equal n");
  return log_normal_quadform(llt0_, log_norm0_, x);
}

double TimeSeriesOracle::log_k(const Eigen::VectorXd& x) const {
  return log_evidence_m1(x) - log_evidence_m0(x);
}

Eigen::VectorXd TimeSeriesOracle::log_k_batch(const Eigen::MatrixXd& rows) const {
  Eigen::VectorXd out(rows.rows());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) out[r] = log_k(rows.row(r).transpose());
  return out;
}

std::pair<double, double> log_mean_exp_stderr(const std::vector<double>& log_values) {
  if (log_values.empty()) throw std::invalid_argument("log_mean_exp_stderr: empty input");
  double max_ll = -std::numeric_limits<double>::infinity();
  for (double v : log_values) max_ll = std::max(max_ll, v);
  if (!std::isfinite(max_ll)) {
    throw std::runtime_error(
        "log_mean_exp_stderr: all weights underflowed; "
        "increase the number of draws or reduce the dimension");
  }
  double sum = 0.0, sum_sq = 0.0;
  for (double v : log_values) {
    double u = std::exp(v - max_ll);
    sum += u;
    sum_sq += u * u;
  }
  const double nd = static_cast<double>(log_values.size());
  double mean_u = sum / nd;
  double var_u = log_values.size() > 1
                     ? std::max(0.0, (sum_sq - nd * mean_u * mean_u) / (nd - 1.0))
                     : 0.0;
  double stderr_log = std::sqrt(var_u / nd) / mean_u;
  return {max_ll + std::log(mean_u), stderr_log};
}

EvidenceValue mc_log_evidence(const TimeSeriesModelSpec& spec, const Eigen::VectorXd& x,
                              std::int64_t n_draws, std::uint64_t seed) {
  if (n_draws < 1000) throw std::invalid_argument("mc_log_evidence: n_draws must be >= 1000");
  if (x.size() != spec.n) throw std::invalid_argument("data vector length must equal n");
  Eigen::MatrixXd a = build_design_matrix(spec);
  Eigen::VectorXd noise_var = noise_covariance(spec.n);
  const double log_norm =
      -0.5 * (noise_var.array().log().sum() + spec.n * std::log(kTwoPi));
  Rng rng = Rng(seed).split(0x6d636c6fULL);

  std::vector<double> loglik(static_cast<std::size_t>(n_draws));
  Eigen::VectorXd theta(a.cols());
  for (std::int64_t s = 0; s < n_draws; ++s) {
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = rng.normal();
    Eigen::VectorXd resid = x - a * theta;
    double quad = (resid.array().square() / noise_var.array()).sum();
    loglik[static_cast<std::size_t>(s)] = log_norm - 0.5 * quad;
  }
  auto [log_z, stderr_log] = log_mean_exp_stderr(loglik);
  return EvidenceValue{log_z, stderr_log, EvidenceMethod::kMonteCarlo};
}

// ---------------------------------------------------------------------------

RastriginModelSpec make_rastrigin_spec(int n, double sigma2, RastriginVariant variant) {
  if (n < 1) throw std::invalid_argument("rastrigin dimension must be >= 1");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("noise variance must be > 0");
  return RastriginModelSpec{n, sigma2, variant};
}

double rastrigin_log_prior_unnorm(double theta, RastriginVariant variant) {
  if (!std::isfinite(theta)) throw std::invalid_argument("theta must be finite");
  double v = -theta * theta / 4.0;
  if (variant == RastriginVariant::kRastrigin) {
    v += 10.0 * (std::cos(kTwoPi * theta) - 1.0);
  }
  return v;
}

Eigen::MatrixXd sample_rastrigin_data(const RastriginModelSpec& spec, std::uint64_t seed,
                                      int count) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  Rng rng = Rng(seed).split(0x72617374ULL);
  const double noise_sd = std::sqrt(spec.sigma2);
  const double proposal_sd = std::sqrt(2.0);  // envelope matching exp(-theta^2/4)
  Eigen::MatrixXd out(count, spec.n);
  for (int r = 0; r < count; ++r) {
    for (int d = 0; d < spec.n; ++d) {
      double theta;
      if (spec.variant == RastriginVariant::kGaussian) {
        theta = proposal_sd * rng.normal();
      } else {
        for (;;) {
          theta = proposal_sd * rng.normal();
          double accept = std::exp(10.0 * (std::cos(kTwoPi * theta) - 1.0));
          if (rng.uniform01() <= accept) break;
        }
      }
      out(r, d) = theta + noise_sd * rng.normal();
    }
  }
  return out;
}

RastriginOracle::RastriginOracle(double sigma2) : sigma2_(sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("noise variance must be > 0");
  auto prior = [](RastriginVariant v) {
    return [v](double th) { return std::exp(rastrigin_log_prior_unnorm(th, v)); };
  };
  log_z1_ = std::log(adaptive_simpson(prior(RastriginVariant::kRastrigin), -kQuadWindow,
                                      kQuadWindow, kQuadTol));
  log_z0_ = std::log(adaptive_simpson(prior(RastriginVariant::kGaussian), -kQuadWindow,
                                      kQuadWindow, kQuadTol));
}

double RastriginOracle::log_k_1d(double x) const {
  const double norm = 1.0 / std::sqrt(kTwoPi * sigma2_);
  auto integrand = [&](RastriginVariant v) {
    return [this, x, norm, v](double th) {
      double d = x - th;
      return std::exp(rastrigin_log_prior_unnorm(th, v)) * norm *
             std::exp(-d * d / (2.0 * sigma2_));
    };
  };
  double i1 = adaptive_simpson(integrand(RastriginVariant::kRastrigin), -kQuadWindow,
                               kQuadWindow, kQuadTol);
  double i0 = adaptive_simpson(integrand(RastriginVariant::kGaussian), -kQuadWindow,
                               kQuadWindow, kQuadTol);
  return (std::log(i1) - log_z1_) - (std::log(i0) - log_z0_);
}

double RastriginOracle::log_k(const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) total += log_k_1d(x[i]);
  return total;
}

double rastrigin_log_k_oracle(const Eigen::VectorXd& x, double sigma2) {
  return RastriginOracle(sigma2).log_k(x);
}

// ---------------------------------------------------------------------------

double GaussianFit::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) throw std::invalid_argument("dimension mismatch");
  Eigen::VectorXd y =
      chol_lower.triangularView<Eigen::Lower>().solve(x - mean);
  return log_norm - 0.5 * y.squaredNorm();
}

GaussianFit fit_gaussian_mle(const Eigen::MatrixXd& samples) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index dim = samples.cols();
  if (n <= dim + 1) {
    throw std::invalid_argument("fit_gaussian_mle: need more than dim + 1 samples");
  }
  GaussianFit fit;
  fit.mean = samples.colwise().mean();
  Eigen::MatrixXd centered = samples.rowwise() - fit.mean.transpose();
  fit.covariance = centered.transpose() * centered / static_cast<double>(n - 1);

  Eigen::MatrixXd c = fit.covariance;
  double jitter = 1e-9 * fit.covariance.trace() / static_cast<double>(dim);
  if (!(jitter > 0.0)) jitter = 1e-9;
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
    if (attempt >= 40) {
      throw std::runtime_error("fit_gaussian_mle: covariance not factorizable");
    }
    c.diagonal().array() += jitter;
    fit.jitter_applied = true;
    jitter *= 10.0;
    llt.compute(c);
  }
  fit.chol_lower = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) log_det += std::log(fit.chol_lower(i, i));
  fit.log_norm = -(log_det + 0.5 * dim * std::log(kTwoPi));
  return fit;
}

double baseline_log_k(const GaussianFit& fit1, const GaussianFit& fit0,
                      const Eigen::VectorXd& x) {
  if (fit1.mean.size() != fit0.mean.size() || fit1.mean.size() != x.size()) {
    throw std::invalid_argument("baseline_log_k: dimension mismatch");
  }
  return fit1.log_density(x) - fit0.log_density(x);
}

// ---------------------------------------------------------------------------

GenerativePair time_series_pair(int n, const Eigen::VectorXd& t) {
  auto m1 = make_time_series_spec(n, TimeSeriesVariant::kM1, t);
  auto m0 = make_time_series_spec(n, TimeSeriesVariant::kM0, t);
  GenerativePair pair;
  pair.dim = n;
  pair.sample_m1 = [m1](std::uint64_t seed, int count) {
    return sample_time_series(m1, seed, count);
  };
  pair.sample_m0 = [m0](std::uint64_t seed, int count) {
    return sample_time_series(m0, seed, count);
  };
  return pair;
}

GenerativePair rastrigin_pair(int n, double sigma2) {
  auto m1 = make_rastrigin_spec(n, sigma2, RastriginVariant::kRastrigin);
  auto m0 = make_rastrigin_spec(n, sigma2, RastriginVariant::kGaussian);
  GenerativePair pair;
  pair.dim = n;
  pair.sample_m1 = [m1](std::uint64_t seed, int count) {
    return sample_rastrigin_data(m1, seed, count);
  };
  pair.sample_m0 = [m0](std::uint64_t seed, int count) {
    return sample_rastrigin_data(m0, seed, count);
  };
  return pair;
}

}  // namespace evnet
