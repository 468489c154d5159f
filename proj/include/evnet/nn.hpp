#pragma once
// Fixed-topology feed-forward engine for the Evidence Network: six dense
// layers, leaky ReLU, four batch-norm layers and one additive skip
// connection, with exact reverse-mode gradients and an Adam update.
//
// Topology (input dim D, w1 = round(1.1 D + 20)):
//   dense0(D->w1)  lrelu  bn0
//   dense1(w1->16) lrelu  bn1          <- skip source
//   dense2(16->16) lrelu  bn2
//   dense3(16->16) lrelu
//   add(lrelu3, bn1)      bn3
//   dense4(16->16) lrelu
//   dense5(16->1)
//
// Training-mode forward uses batch statistics and updates the running
// statistics; inference mode reads the running statistics and mutates
// nothing. backward() propagates through the batch statistics.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace evnet {

inline constexpr int kNumDense = 6;
inline constexpr int kNumBatchNorm = 4;
inline constexpr int kHiddenWidth = 16;

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct BatchNormLayer {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

struct NetworkParameters {
  int input_dim = 0;
  int width1 = 0;
  double leaky_slope = 0.3;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-3;
  std::array<DenseLayer, kNumDense> dense;
  std::array<BatchNormLayer, kNumBatchNorm> bn;

  std::int64_t parameter_count() const;
};

// round-half-up of 1.1*input_dim + 20
int first_hidden_width(int input_dim);

NetworkParameters init_network(int input_dim, std::uint64_t seed);

enum class ForwardMode { kTraining, kInference };

// Per-batch cache written by forward() and consumed by backward().
struct ForwardTrace {
  ForwardMode mode = ForwardMode::kInference;
  Eigen::MatrixXd input;
  std::array<Eigen::MatrixXd, kNumDense> pre_act;     // z_l
  std::array<Eigen::MatrixXd, kNumDense> dense_in;    // input to dense l
  struct BnCache {
    Eigen::MatrixXd normalized;  // (x - mu) / sqrt(var + eps)
    Eigen::VectorXd batch_mean;
    Eigen::VectorXd inv_std;
  };
  std::array<BnCache, kNumBatchNorm> bn;
};

// Raw scalar outputs f(x) per batch row. Training mode requires n >= 2 and
// updates the running batch-norm statistics in `net`.
Eigen::VectorXd forward(NetworkParameters& net, const Eigen::MatrixXd& batch,
                        ForwardMode mode, ForwardTrace* trace = nullptr);

// Inference-mode forward for const networks.
Eigen::VectorXd forward_inference(const NetworkParameters& net,
                                  const Eigen::MatrixXd& batch);

struct NetworkGradients {
  std::array<Eigen::MatrixXd, kNumDense> dweight;
  std::array<Eigen::VectorXd, kNumDense> dbias;
  std::array<Eigen::VectorXd, kNumBatchNorm> dgamma;
  std::array<Eigen::VectorXd, kNumBatchNorm> dbeta;
};

// Gradients of sum_i output_grads[i] * f(x_i) with respect to every
// trainable parameter. The caller folds any mean-reduction factor into
// output_grads, which makes the result invariant under duplicating rows
// while splitting their weights. Requires a training-mode trace.
NetworkGradients backward(const NetworkParameters& net, const ForwardTrace& trace,
                          const Eigen::VectorXd& output_grads);

struct OptimizerState {
  double base_learning_rate = 1e-4;
  double decay_rate = 0.95;   // applied once per epoch
  double epsilon = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::int64_t step = 0;
  int epoch = 0;              // selects the effective learning rate
  NetworkGradients m;         // first moments, same shapes as the gradients
  NetworkGradients v;         // second moments

  double effective_learning_rate() const;
};

OptimizerState init_optimizer(const NetworkParameters& net, double base_lr = 1e-4,
                              double decay_rate = 0.95);

// Standard Adam with bias correction. Throws on non-finite gradient
// entries, naming the offending layer.
void adam_step(OptimizerState& opt, NetworkParameters& net, const NetworkGradients& grads);

// "EVNN" checkpoint: versioned binary with bit-exact round trip.
void save_network(const NetworkParameters& net, std::ostream& out);
NetworkParameters load_network(std::istream& in);
void save_network_file(const NetworkParameters& net, const std::string& path);
NetworkParameters load_network_file(const std::string& path);

}  // namespace evnet
