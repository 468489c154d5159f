#include "evnet/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace evnet {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'D', 'S'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("dataset: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("dataset: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

std::int64_t Dataset::count_label(int label) const {
  std::int64_t count = 0;
  for (auto m : labels) count += (m == label);
  return count;
}

double Dataset::label_fraction() const {
  if (labels.empty()) return 0.0;
  return static_cast<double>(count_label(1)) / static_cast<double>(labels.size());
}

double Dataset::implied_log_prior_ratio() const {
  std::int64_t n1 = count_label(1);
  std::int64_t n0 = count_label(0);
  if (n1 == 0 || n0 == 0) {
    throw std::runtime_error("dataset has samples of only one label");
  }
  return std::log(static_cast<double>(n1)) - std::log(static_cast<double>(n0));
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(data.rows()) != labels.size()) {
    throw std::invalid_argument("dataset: row count does not match label count");
  }
  for (auto m : labels) {
    if (m != 0 && m != 1) throw std::invalid_argument("dataset: labels must be 0 or 1");
  }
}

void save_dataset(const Dataset& ds, std::ostream& out) {
  ds.validate();
  out.write(kMagic, 4);
  write_u32(out, kFormatVersion);
  write_u64(out, static_cast<std::uint64_t>(ds.data.rows()));
  write_u32(out, static_cast<std::uint32_t>(ds.data.cols()));
  for (Eigen::Index r = 0; r < ds.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.data.cols(); ++c) write_f64(out, ds.data(r, c));
  }
  out.write(reinterpret_cast<const char*>(ds.labels.data()),
            static_cast<std::streamsize>(ds.labels.size()));
  if (!out) throw std::runtime_error("dataset: write failed");
}

Dataset load_dataset(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("dataset: bad magic, not an EVDS file");
  }
  std::uint32_t version = read_u32(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("dataset: unsupported format version " + std::to_string(version));
  }
  std::uint64_t n = read_u64(in);
  std::uint32_t dim = read_u32(in);
  Dataset ds;
  ds.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < ds.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.data.cols(); ++c) ds.data(r, c) = read_f64(in);
  }
  ds.labels.resize(n);
  in.read(reinterpret_cast<char*>(ds.labels.data()), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("dataset: truncated file");
  ds.validate();
  return ds;
}

void save_dataset_file(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  save_dataset(ds, out);
}

Dataset load_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return load_dataset(in);
}

}  // namespace evnet
