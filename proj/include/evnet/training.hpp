#pragma once
// Dataset assembly, sign-flip augmentation, mini-batch training with early
// stopping, and ensembles of independently initialized networks whose
// decoded log K outputs are averaged.

#include "evnet/dataset.hpp"
#include "evnet/losses.hpp"
#include "evnet/models.hpp"
#include "evnet/nn.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace evnet {

struct TrainConfig {
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 10;
  double validation_fraction = 0.1;
  double base_learning_rate = 1e-4;
  double lr_decay = 0.95;
  int lr_decay_epochs = 1;  // decay applied every this many epochs
  bool sign_flip_augmentation = true;
  bool standardize_inputs = true;
  std::uint64_t seed = 0;

  void validate(Eigen::Index n_samples) const;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainingHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

void write_history_csv(const TrainingHistory& history, const std::string& path);

// Per-feature affine standardization fitted on training data. Fixed
// invertible maps of the data leave the Bayes factor unchanged, so this is
// pure conditioning.
struct InputScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_sd;

  bool identity() const { return mean.size() == 0; }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
};

InputScaler fit_input_scaler(const Eigen::MatrixXd& data);

// n_per_model rows from each model of the pair, shuffled; label 1 marks the
// first model.
Dataset generate_training_set(const GenerativePair& pair, int n_per_model,
                              std::uint64_t seed);

// Batch concatenated with its negation; labels duplicated.
std::pair<Eigen::MatrixXd, std::vector<std::uint8_t>> augment_sign_flip(
    const Eigen::MatrixXd& batch, const std::vector<std::uint8_t>& labels);

// Mini-batch Adam on the mean loss with per-epoch learning-rate decay and
// early stopping on validation loss; `net` ends at the best-validation
// epoch. The dataset is consumed as-is (standardize beforehand if wanted;
// see train_ensemble).
TrainingHistory train(NetworkParameters& net, const Dataset& dataset, const LossSpec& loss,
                      const TrainConfig& config);

struct Ensemble {
  std::vector<NetworkParameters> members;
  std::vector<TrainingHistory> histories;
  LossSpec loss = LossSpec::default_recommendation();
  ModelPriorRatio prior;
  InputScaler scaler;
};

// k members with seeds config.seed + 0 .. k-1, identical architecture and
// config; members train concurrently when threads > 1.
Ensemble train_ensemble(int k, const Dataset& dataset, const LossSpec& loss,
                        const TrainConfig& config, int threads = 1);

// Per-row ensemble mean of decoded log K and the leave-one-out jackknife
// standard error over members (0 for a single member). Applies the
// ensemble's input scaler.
std::pair<Eigen::VectorXd, Eigen::VectorXd> ensemble_log_k(const Ensemble& ensemble,
                                                           const Eigen::MatrixXd& batch);

// Single-network helper used by eval paths: scale, forward, map, decode.
Eigen::VectorXd decode_network_log_k(const NetworkParameters& net, const LossSpec& loss,
                                     const InputScaler& scaler, const Eigen::MatrixXd& batch,
                                     ModelPriorRatio prior = {});

}  // namespace evnet
