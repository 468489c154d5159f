#pragma once
// Labelled dataset container and the "EVDS" binary file format.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace evnet {

struct Dataset {
  Eigen::MatrixXd data;              // n_samples x dim
  std::vector<std::uint8_t> labels;  // values in {0, 1}

  Eigen::Index size() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }
  std::int64_t count_label(int label) const;
  double label_fraction() const;  // fraction with label 1

  // log(n1/n0); the implied prior ratio of an imbalanced set.
  double implied_log_prior_ratio() const;

  void validate() const;  // row/label count agreement, label values
};

// "EVDS": magic, u32 version, u64 n_samples, u32 dim, row-major
// little-endian f64 data, then one label byte per sample.
void save_dataset(const Dataset& ds, std::ostream& out);
Dataset load_dataset(std::istream& in);
void save_dataset_file(const Dataset& ds, const std::string& path);
Dataset load_dataset_file(const std::string& path);

}  // namespace evnet
