#pragma once
// Quantitative validation: RMSE against oracle truths, the blind coverage
// test with binomial error bars, absolute-evidence and posterior-predictive
// derived quantities, and the multi-loss comparison harness.

#include "evnet/losses.hpp"
#include "evnet/training.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace evnet {

double rmse_log_k(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth);

struct CoverageBin {
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t count = 0;
  double p_mean = 0.0;     // mean predicted p(M1|x) in the bin
  double fraction = 0.0;   // empirical fraction of label-1 samples
  double sigma_err = 0.0;  // sqrt(p_mean (1 - p_mean) / count)
  double residual = 0.0;   // (fraction - p_mean) / sigma_err
  bool included = false;   // count >= min_count
};

struct CoverageReport {
  std::vector<CoverageBin> bins;
  double residual_mean = 0.0;  // over included bins
  double residual_std = 0.0;   // sample std over included bins
  int included_bins = 0;
  int excluded_bins = 0;
  std::int64_t total_samples = 0;

  bool passes(double mean_lo = -0.1, double mean_hi = 0.1, double std_lo = 0.8,
              double std_hi = 1.2) const;
};

// Converts log K estimates to p(M1|x) and compares per-bin empirical label
// fractions against the predictions. Bins with fewer than min_count samples
// are flagged and excluded from the summary, never dropped from the report.
CoverageReport coverage_test(const Eigen::VectorXd& log_k_estimates,
                             const std::vector<std::uint8_t>& labels, int n_bins,
                             int min_count, ModelPriorRatio prior = {});

void write_coverage_csv(const CoverageReport& report, const std::string& path);

double absolute_log_evidence(double log_k, double log_z_reference);

// log K_PPT = log K(full data) - log K(conditioning subset).
double ppt_log_k(double log_k_full, double log_k_subset);

struct LossComparisonRow {
  std::string loss_name;
  double alpha = 0.0;
  double rmse_overall = 0.0;
  double rmse_high_stratum = 0.0;  // |log K_true| > high_stratum_threshold
  std::int64_t n_high = 0;
};

struct LossComparisonSettings {
  double high_stratum_threshold = 5.0;
  int threads = 1;
};

// Trains one single network per spec with identical seed/config on the
// shared dataset and scores each against the oracle truths.
std::vector<LossComparisonRow> loss_comparison_report(
    const std::vector<LossSpec>& specs, const Dataset& train_data,
    const Eigen::MatrixXd& eval_data, const Eigen::VectorXd& eval_truth,
    const TrainConfig& config, const LossComparisonSettings& settings = {});

void write_loss_comparison_csv(const std::vector<LossComparisonRow>& rows,
                               const std::string& path);

}  // namespace evnet
