#include "evnet/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace evnet {

double rmse_log_k(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
  if (predicted.size() != truth.size() || predicted.size() == 0) {
    throw std::invalid_argument("rmse_log_k: vectors must have equal nonzero length");
  }
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(predicted.size()));
}

CoverageReport coverage_test(const Eigen::VectorXd& log_k_estimates,
                             const std::vector<std::uint8_t>& labels, int n_bins,
                             int min_count, ModelPriorRatio prior) {
  if (static_cast<std::size_t>(log_k_estimates.size()) != labels.size()) {
    throw std::invalid_argument("coverage_test: estimate/label length mismatch");
  }
  if (n_bins < 2) throw std::invalid_argument("coverage_test: need at least 2 bins");
  for (auto m : labels) {
    if (m != 0 && m != 1) throw std::invalid_argument("coverage_test: labels must be 0 or 1");
  }

  CoverageReport report;
  report.total_samples = log_k_estimates.size();
  report.bins.resize(static_cast<std::size_t>(n_bins));
  std::vector<double> p_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<std::int64_t> ones(static_cast<std::size_t>(n_bins), 0);
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    report.bins[b].lo = static_cast<double>(b) / n_bins;
    report.bins[b].hi = static_cast<double>(b + 1) / n_bins;
  }

  for (Eigen::Index i = 0; i < log_k_estimates.size(); ++i) {
    double p = decode_posterior(log_k_estimates[i], prior);
    int b = std::min(n_bins - 1, static_cast<int>(p * n_bins));
    auto bi = static_cast<std::size_t>(b);
    report.bins[bi].count += 1;
    p_sum[bi] += p;
    ones[bi] += labels[static_cast<std::size_t>(i)];
  }

  double res_sum = 0.0, res_sq_sum = 0.0;
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    auto& bin = report.bins[b];
    if (bin.count == 0) {
      ++report.excluded_bins;
      continue;
    }
    bin.p_mean = p_sum[b] / static_cast<double>(bin.count);
    bin.fraction = static_cast<double>(ones[b]) / static_cast<double>(bin.count);
    bin.sigma_err = std::sqrt(bin.p_mean * (1.0 - bin.p_mean) /
                              static_cast<double>(bin.count));
    bin.residual = bin.sigma_err > 0.0 ? (bin.fraction - bin.p_mean) / bin.sigma_err : 0.0;
    if (bin.count >= min_count && bin.sigma_err > 0.0) {
      bin.included = true;
      ++report.included_bins;
      res_sum += bin.residual;
      res_sq_sum += bin.residual * bin.residual;
    } else {
      ++report.excluded_bins;
    }
  }
  if (report.included_bins == 0) {
    throw std::runtime_error(
        "coverage_test: every bin is below min_count; the labelled set is too small "
        "to validate calibration");
  }
  const double k = static_cast<double>(report.included_bins);
  report.residual_mean = res_sum / k;
  if (report.included_bins > 1) {
    double var = (res_sq_sum - k * report.residual_mean * report.residual_mean) / (k - 1.0);
    report.residual_std = std::sqrt(std::max(0.0, var));
  }
  return report;
}

bool CoverageReport::passes(double mean_lo, double mean_hi, double std_lo,
                            double std_hi) const {
  return residual_mean >= mean_lo && residual_mean <= mean_hi &&
         residual_std >= std_lo && residual_std <= std_hi;
}

void write_coverage_csv(const CoverageReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "bin_lo,bin_hi,n,p_mean,fraction,sigma_err,residual,included\n";
  out.precision(17);
  for (const auto& bin : report.bins) {
    out << bin.lo << ',' << bin.hi << ',' << bin.count << ',' << bin.p_mean << ','
        << bin.fraction << ',' << bin.sigma_err << ',' << bin.residual << ','
        << (bin.included ? 1 : 0) << '\n';
  }
}

double absolute_log_evidence(double log_k, double log_z_reference) {
  if (!std::isfinite(log_k) || !std::isfinite(log_z_reference)) {
    throw std::invalid_argument("absolute_log_evidence: inputs must be finite");
  }
  return log_k + log_z_reference;
}

double ppt_log_k(double log_k_full, double log_k_subset) {
  if (!std::isfinite(log_k_full) || !std::isfinite(log_k_subset)) {
    throw std::invalid_argument("ppt_log_k: inputs must be finite");
  }
  return log_k_full - log_k_subset;
}

std::vector<LossComparisonRow> loss_comparison_report(
    const std::vector<LossSpec>& specs, const Dataset& train_data,
    const Eigen::MatrixXd& eval_data, const Eigen::VectorXd& eval_truth,
    const TrainConfig& config, const LossComparisonSettings& settings) {
  if (eval_data.rows() != eval_truth.size()) {
    throw std::invalid_argument("loss_comparison_report: eval data/truth mismatch");
  }
  std::vector<LossComparisonRow> rows;
  rows.reserve(specs.size());
  for (const auto& spec : specs) {
    Ensemble single = train_ensemble(1, train_data, spec, config, settings.threads);
    auto [pred, stderr_jk] = ensemble_log_k(single, eval_data);
    (void)stderr_jk;
    LossComparisonRow row;
    row.loss_name = loss_kind_name(spec.kind());
    row.alpha = spec.alpha();
    row.rmse_overall = rmse_log_k(pred, eval_truth);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < eval_truth.size(); ++i) {
      if (std::abs(eval_truth[i]) > settings.high_stratum_threshold) {
        double d = pred[i] - eval_truth[i];
        acc += d * d;
        ++row.n_high;
      }
    }
    row.rmse_high_stratum =
        row.n_high > 0 ? std::sqrt(acc / static_cast<double>(row.n_high)) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_loss_comparison_csv(const std::vector<LossComparisonRow>& rows,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "loss,alpha,rmse_overall,rmse_high_stratum,n_high\n";
  out.precision(17);
  for (const auto& row : rows) {
    out << row.loss_name << ',' << row.alpha << ',' << row.rmse_overall << ','
        << row.rmse_high_stratum << ',' << row.n_high << '\n';
  }
}

}  // namespace evnet
