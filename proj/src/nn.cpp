#include "evnet/nn.hpp"

#include "evnet/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evnet {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'N', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

int dense_out_width(int layer, int width1) {
  if (layer == 0) return width1;
  if (layer == kNumDense - 1) return 1;
  return kHiddenWidth;
}

int dense_in_width(int layer, int input_dim, int width1) {
  if (layer == 0) return input_dim;
  if (layer == 1) return width1;
  return kHiddenWidth;
}

Eigen::MatrixXd leaky_relu(const Eigen::MatrixXd& z, double slope) {
  return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Eigen::MatrixXd leaky_relu_grad(const Eigen::MatrixXd& z, double slope) {
  return z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

// y = gamma * (x - mu)/sqrt(var + eps) + beta. Training mode uses biased
// batch statistics and folds them into the running averages.
Eigen::MatrixXd batch_norm_forward(const NetworkParameters& net, BatchNormLayer& layer,
                                   const Eigen::MatrixXd& x, ForwardMode mode,
                                   ForwardTrace::BnCache* cache) {
  const auto n = static_cast<double>(x.rows());
  Eigen::VectorXd mean, inv_std;
  if (mode == ForwardMode::kTraining) {
    mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    Eigen::VectorXd var = centered.array().square().colwise().sum() / n;
    inv_std = (var.array() + net.bn_epsilon).rsqrt();
    layer.running_mean = net.bn_momentum * layer.running_mean + (1.0 - net.bn_momentum) * mean;
    layer.running_var = net.bn_momentum * layer.running_var + (1.0 - net.bn_momentum) * var;
    Eigen::MatrixXd normalized = centered.array().rowwise() * inv_std.transpose().array();
    if (cache) {
      cache->normalized = normalized;
      cache->batch_mean = mean;
      cache->inv_std = inv_std;
    }
    return (normalized.array().rowwise() * layer.gamma.transpose().array()).rowwise() +
           layer.beta.transpose().array();
  }
  mean = layer.running_mean;
  inv_std = (layer.running_var.array() + net.bn_epsilon).rsqrt();
  Eigen::MatrixXd normalized =
      (x.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array();
  if (cache) {
    cache->normalized = normalized;
    cache->batch_mean = mean;
    cache->inv_std = inv_std;
  }
  return (normalized.array().rowwise() * layer.gamma.transpose().array()).rowwise() +
         layer.beta.transpose().array();
}

// Gradient through the batch statistics.
Eigen::MatrixXd batch_norm_backward(const BatchNormLayer& layer,
                                    const ForwardTrace::BnCache& cache,
                                    const Eigen::MatrixXd& dy, Eigen::VectorXd& dgamma,
                                    Eigen::VectorXd& dbeta) {
  const auto n = static_cast<double>(dy.rows());
  dgamma = (dy.array() * cache.normalized.array()).colwise().sum();
  dbeta = dy.colwise().sum();
  Eigen::MatrixXd dxhat = dy.array().rowwise() * layer.gamma.transpose().array();
  Eigen::VectorXd sum_dxhat = dxhat.colwise().sum();
  Eigen::VectorXd sum_dxhat_xhat = (dxhat.array() * cache.normalized.array()).colwise().sum();
  Eigen::MatrixXd dx =
      (dxhat.array() - (sum_dxhat.transpose().array() / n).replicate(dy.rows(), 1) -
       cache.normalized.array() *
           (sum_dxhat_xhat.transpose().array() / n).replicate(dy.rows(), 1))
          .rowwise() *
      cache.inv_std.transpose().array();
  return dx;
}

void check_finite(const NetworkGradients& grads) {
  for (int l = 0; l < kNumDense; ++l) {
    if (!grads.dweight[l].allFinite() || !grads.dbias[l].allFinite()) {
      throw std::runtime_error("adam_step: non-finite gradient in dense layer " +
                               std::to_string(l));
    }
  }
  for (int l = 0; l < kNumBatchNorm; ++l) {
    if (!grads.dgamma[l].allFinite() || !grads.dbeta[l].allFinite()) {
      throw std::runtime_error("adam_step: non-finite gradient in batch-norm layer " +
                               std::to_string(l));
    }
  }
}

}  // namespace

std::int64_t NetworkParameters::parameter_count() const {
  std::int64_t count = 0;
  for (const auto& d : dense) count += d.weight.size() + d.bias.size();
  for (const auto& b : bn) count += b.gamma.size() + b.beta.size();
  return count;
}

int first_hidden_width(int input_dim) {
  return static_cast<int>(std::floor(1.1 * input_dim + 20.0 + 0.5));
}

NetworkParameters init_network(int input_dim, std::uint64_t seed) {
  if (input_dim < 1) throw std::invalid_argument("init_network: input_dim must be >= 1");
  NetworkParameters net;
  net.input_dim = input_dim;
  net.width1 = first_hidden_width(input_dim);
  Rng rng = Rng(seed).split(0x6e657477ULL);
  for (int l = 0; l < kNumDense; ++l) {
    const int out = dense_out_width(l, net.width1);
    const int in = dense_in_width(l, input_dim, net.width1);
    // He-style init adjusted for the leaky slope.
    const double stddev = std::sqrt(2.0 / (in * (1.0 + net.leaky_slope * net.leaky_slope)));
    net.dense[l].weight.resize(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) net.dense[l].weight(r, c) = stddev * rng.normal();
    }
    net.dense[l].bias = Eigen::VectorXd::Zero(out);
  }
  const int bn_widths[kNumBatchNorm] = {net.width1, kHiddenWidth, kHiddenWidth, kHiddenWidth};
  for (int l = 0; l < kNumBatchNorm; ++l) {
    net.bn[l].gamma = Eigen::VectorXd::Ones(bn_widths[l]);
    net.bn[l].beta = Eigen::VectorXd::Zero(bn_widths[l]);
    net.bn[l].running_mean = Eigen::VectorXd::Zero(bn_widths[l]);
    net.bn[l].running_var = Eigen::VectorXd::Ones(bn_widths[l]);
  }
  return net;
}

Eigen::VectorXd forward(NetworkParameters& net, const Eigen::MatrixXd& batch,
                        ForwardMode mode, ForwardTrace* trace) {
  if (batch.cols() != net.input_dim) {
    throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                " columns, network expects " + std::to_string(net.input_dim));
  }
  if (mode == ForwardMode::kTraining && batch.rows() < 2) {
    throw std::invalid_argument("forward: training mode needs at least 2 rows");
  }
  if (trace) {
    trace->mode = mode;
    trace->input = batch;
  }
  auto cache = [&](int l) { return trace ? &trace->bn[l] : nullptr; };
  auto dense = [&](int l, const Eigen::MatrixXd& in) -> Eigen::MatrixXd {
    if (trace) trace->dense_in[l] = in;
    Eigen::MatrixXd z =
        (in * net.dense[l].weight.transpose()).rowwise() + net.dense[l].bias.transpose();
    if (trace) trace->pre_act[l] = z;
    return z;
  };
  const double slope = net.leaky_slope;

  Eigen::MatrixXd h = leaky_relu(dense(0, batch), slope);
  h = batch_norm_forward(net, net.bn[0], h, mode, cache(0));
  h = leaky_relu(dense(1, h), slope);
  Eigen::MatrixXd skip = batch_norm_forward(net, net.bn[1], h, mode, cache(1));
  h = leaky_relu(dense(2, skip), slope);
  h = batch_norm_forward(net, net.bn[2], h, mode, cache(2));
  h = leaky_relu(dense(3, h), slope);
  h = batch_norm_forward(net, net.bn[3], h + skip, mode, cache(3));
  h = leaky_relu(dense(4, h), slope);
  Eigen::MatrixXd out = dense(5, h);
  return out.col(0);
}

Eigen::VectorXd forward_inference(const NetworkParameters& net, const Eigen::MatrixXd& batch) {
  // Inference mode never mutates; the const_cast only feeds the shared path.
  return forward(const_cast<NetworkParameters&>(net), batch, ForwardMode::kInference);
}

NetworkGradients backward(const NetworkParameters& net, const ForwardTrace& trace,
                          const Eigen::VectorXd& output_grads) {
  if (trace.mode != ForwardMode::kTraining) {
    throw std::invalid_argument("backward: trace must come from a training-mode forward");
  }
  if (trace.input.cols() != net.input_dim || trace.pre_act[0].cols() != net.width1) {
    throw std::invalid_argument("backward: trace does not match network architecture");
  }
  if (output_grads.size() != trace.input.rows()) {
    throw std::invalid_argument("backward: output_grads length mismatch");
  }
  const double slope = net.leaky_slope;
  NetworkGradients g;

  auto dense_backward = [&](int l, const Eigen::MatrixXd& dz) -> Eigen::MatrixXd {
    g.dweight[l] = dz.transpose() * trace.dense_in[l];
    g.dbias[l] = dz.colwise().sum();
    return dz * net.dense[l].weight;
  };

  Eigen::MatrixXd dz5 = output_grads;
  Eigen::MatrixXd da4 = dense_backward(5, dz5);
  Eigen::MatrixXd dz4 = da4.array() * leaky_relu_grad(trace.pre_act[4], slope).array();
  Eigen::MatrixXd dh3 = dense_backward(4, dz4);
  Eigen::MatrixXd dsum = batch_norm_backward(net.bn[3], trace.bn[3], dh3, g.dgamma[3], g.dbeta[3]);
  // The add fans out: one branch to lrelu3, one to the skip source bn1.
  Eigen::MatrixXd dskip = dsum;
  Eigen::MatrixXd dz3 = dsum.array() * leaky_relu_grad(trace.pre_act[3], slope).array();
  Eigen::MatrixXd dh2 = dense_backward(3, dz3);
  Eigen::MatrixXd da2 = batch_norm_backward(net.bn[2], trace.bn[2], dh2, g.dgamma[2], g.dbeta[2]);
  Eigen::MatrixXd dz2 = da2.array() * leaky_relu_grad(trace.pre_act[2], slope).array();
  dskip += dense_backward(2, dz2);
  Eigen::MatrixXd da1 = batch_norm_backward(net.bn[1], trace.bn[1], dskip, g.dgamma[1], g.dbeta[1]);
  Eigen::MatrixXd dz1 = da1.array() * leaky_relu_grad(trace.pre_act[1], slope).array();
  Eigen::MatrixXd dh0 = dense_backward(1, dz1);
  Eigen::MatrixXd da0 = batch_norm_backward(net.bn[0], trace.bn[0], dh0, g.dgamma[0], g.dbeta[0]);
  Eigen::MatrixXd dz0 = da0.array() * leaky_relu_grad(trace.pre_act[0], slope).array();
  dense_backward(0, dz0);
  return g;
}

double OptimizerState::effective_learning_rate() const {
  return base_learning_rate * std::pow(decay_rate, epoch);
}

OptimizerState init_optimizer(const NetworkParameters& net, double base_lr, double decay_rate) {
  if (!(base_lr > 0.0)) throw std::invalid_argument("base learning rate must be > 0");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) {
    throw std::invalid_argument("decay rate must be in (0, 1]");
  }
  OptimizerState opt;
  opt.base_learning_rate = base_lr;
  opt.decay_rate = decay_rate;
  for (int l = 0; l < kNumDense; ++l) {
    opt.m.dweight[l] = Eigen::MatrixXd::Zero(net.dense[l].weight.rows(), net.dense[l].weight.cols());
    opt.m.dbias[l] = Eigen::VectorXd::Zero(net.dense[l].bias.size());
    opt.v.dweight[l] = opt.m.dweight[l];
    opt.v.dbias[l] = opt.m.dbias[l];
  }
  for (int l = 0; l < kNumBatchNorm; ++l) {
    opt.m.dgamma[l] = Eigen::VectorXd::Zero(net.bn[l].gamma.size());
    opt.m.dbeta[l] = opt.m.dgamma[l];
    opt.v.dgamma[l] = opt.m.dgamma[l];
    opt.v.dbeta[l] = opt.m.dgamma[l];
  }
  return opt;
}

void adam_step(OptimizerState& opt, NetworkParameters& net, const NetworkGradients& grads) {
  check_finite(grads);
  opt.step += 1;
  const double lr = opt.effective_learning_rate();
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));

  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
    v = opt.beta2 * v.array().matrix() + (1.0 - opt.beta2) * grad.array().square().matrix();
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + opt.epsilon);
  };

  for (int l = 0; l < kNumDense; ++l) {
    update(net.dense[l].weight, opt.m.dweight[l], opt.v.dweight[l], grads.dweight[l]);
    update(net.dense[l].bias, opt.m.dbias[l], opt.v.dbias[l], grads.dbias[l]);
  }
  for (int l = 0; l < kNumBatchNorm; ++l) {
    update(net.bn[l].gamma, opt.m.dgamma[l], opt.v.dgamma[l], grads.dgamma[l]);
    update(net.bn[l].beta, opt.m.dbeta[l], opt.v.dbeta[l], grads.dbeta[l]);
  }
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_array(std::ostream& out, const double* data, std::int64_t count) {
  for (std::int64_t i = 0; i < count; ++i) write_f64(out, data[i]);
}

void read_array(std::istream& in, double* data, std::int64_t count) {
  for (std::int64_t i = 0; i < count; ++i) data[i] = read_f64(in);
}

}  // namespace

void save_network(const NetworkParameters& net, std::ostream& out) {
  out.write(kMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(net.input_dim));
  write_u32(out, static_cast<std::uint32_t>(net.width1));
  write_f64(out, net.leaky_slope);
  write_f64(out, net.bn_momentum);
  write_f64(out, net.bn_epsilon);
  for (const auto& d : net.dense) {
    write_u32(out, static_cast<std::uint32_t>(d.weight.rows()));
    write_u32(out, static_cast<std::uint32_t>(d.weight.cols()));
    // Row-major so the on-disk order is independent of Eigen's default.
    for (Eigen::Index r = 0; r < d.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < d.weight.cols(); ++c) write_f64(out, d.weight(r, c));
    }
    write_array(out, d.bias.data(), d.bias.size());
  }
  for (const auto& b : net.bn) {
    write_u32(out, static_cast<std::uint32_t>(b.gamma.size()));
    write_array(out, b.gamma.data(), b.gamma.size());
    write_array(out, b.beta.data(), b.beta.size());
    write_array(out, b.running_mean.data(), b.running_mean.size());
    write_array(out, b.running_var.data(), b.running_var.size());
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

NetworkParameters load_network(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic, not an EVNN file");
  }
  std::uint32_t version = read_u32(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  NetworkParameters net;
  net.input_dim = static_cast<int>(read_u32(in));
  net.width1 = static_cast<int>(read_u32(in));
  net.leaky_slope = read_f64(in);
  net.bn_momentum = read_f64(in);
  net.bn_epsilon = read_f64(in);
  for (auto& d : net.dense) {
    int rows = static_cast<int>(read_u32(in));
    int cols = static_cast<int>(read_u32(in));
    d.weight.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) d.weight(r, c) = read_f64(in);
    }
    d.bias.resize(rows);
    read_array(in, d.bias.data(), rows);
  }
  for (auto& b : net.bn) {
    int width = static_cast<int>(read_u32(in));
    b.gamma.resize(width);
    b.beta.resize(width);
    b.running_mean.resize(width);
    b.running_var.resize(width);
    read_array(in, b.gamma.data(), width);
    read_array(in, b.beta.data(), width);
    read_array(in, b.running_mean.data(), width);
    read_array(in, b.running_var.data(), width);
  }
  return net;
}

void save_network_file(const NetworkParameters& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  save_network(net, out);
}

NetworkParameters load_network_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return load_network(in);
}

}  // namespace evnet
