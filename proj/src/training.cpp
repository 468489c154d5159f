#include "evnet/training.hpp"

#include "evnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace evnet {

void TrainConfig::validate(Eigen::Index n_samples) const {
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience < 1 || patience > max_epochs) {
    throw std::invalid_argument("patience must be in [1, max_epochs]");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must be in (0,1)");
  }
  if (!(base_learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw std::invalid_argument("lr_decay must be in (0,1]");
  }
  if (lr_decay_epochs < 1) throw std::invalid_argument("lr_decay_epochs must be >= 1");
  auto n_val = static_cast<Eigen::Index>(validation_fraction * static_cast<double>(n_samples));
  if (n_val < 2 || n_samples - n_val < 2) {
    throw std::invalid_argument("validation split leaves fewer than 2 samples on a side");
  }
}

void write_history_csv(const TrainingHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "epoch,train_loss,val_loss,lr\n";
  out.precision(17);
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const auto& s = history.epochs[e];
    out << e << ',' << s.train_loss << ',' << s.val_loss << ',' << s.learning_rate << '\n';
  }
}

Eigen::MatrixXd InputScaler::apply(const Eigen::MatrixXd& rows) const {
  if (identity()) return rows;
  if (rows.cols() != mean.size()) {
    throw std::invalid_argument("input scaler dimension mismatch");
  }
  return (rows.rowwise() - mean.transpose()).array().rowwise() *
         inv_sd.transpose().array();
}

InputScaler fit_input_scaler(const Eigen::MatrixXd& data) {
  if (data.rows() < 2) throw std::invalid_argument("need >= 2 rows to fit a scaler");
  InputScaler scaler;
  scaler.mean = data.colwise().mean();
  Eigen::MatrixXd centered = data.rowwise() - scaler.mean.transpose();
  Eigen::VectorXd sd =
      (centered.array().square().colwise().sum() / static_cast<double>(data.rows() - 1))
          .sqrt();
  scaler.inv_sd = sd.unaryExpr([](double s) { return s > 0.0 ? 1.0 / s : 1.0; });
  return scaler;
}

Dataset generate_training_set(const GenerativePair& pair, int n_per_model,
                              std::uint64_t seed) {
  if (n_per_model < 1) throw std::invalid_argument("n_per_model must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd x1 = pair.sample_m1(rng.split(1).next_u64(), n_per_model);
  Eigen::MatrixXd x0 = pair.sample_m0(rng.split(2).next_u64(), n_per_model);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(2 * n_per_model));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  Rng shuffle_rng = rng.split(3);
  shuffle_rng.shuffle(order);

  Dataset ds;
  ds.data.resize(2 * n_per_model, pair.dim);
  ds.labels.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    Eigen::Index src = order[i];
    if (src < n_per_model) {
      ds.data.row(static_cast<Eigen::Index>(i)) = x1.row(src);
      ds.labels[i] = 1;
    } else {
      ds.data.row(static_cast<Eigen::Index>(i)) = x0.row(src - n_per_model);
      ds.labels[i] = 0;
    }
  }
  return ds;
}

std::pair<Eigen::MatrixXd, std::vector<std::uint8_t>> augment_sign_flip(
    const Eigen::MatrixXd& batch, const std::vector<std::uint8_t>& labels) {
  Eigen::MatrixXd out(2 * batch.rows(), batch.cols());
  out.topRows(batch.rows()) = batch;
  out.bottomRows(batch.rows()) = -batch;
  std::vector<std::uint8_t> lab(labels);
  lab.insert(lab.end(), labels.begin(), labels.end());
  return {std::move(out), std::move(lab)};
}

namespace {

double mean_loss_inference(NetworkParameters& net, const LossSpec& loss,
                           const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& labels,
                           const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd batch(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) batch.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  Eigen::VectorXd f = forward(net, batch, ForwardMode::kInference);
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double mapped = output_map(loss, f[static_cast<Eigen::Index>(i)]);
    total += loss_value(loss, mapped, labels[rows[i]]);
  }
  return total / static_cast<double>(rows.size());
}

}  // namespace

TrainingHistory train(NetworkParameters& net, const Dataset& dataset, const LossSpec& loss,
                      const TrainConfig& config) {
  dataset.validate();
  config.validate(dataset.size());
  if (dataset.dim() != net.input_dim) {
    throw std::invalid_argument("train: dataset dimension does not match network input");
  }

  // Stratified train/validation split keeps the label balance on both sides.
  Rng rng(config.seed);
  std::vector<Eigen::Index> by_label[2];
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    by_label[dataset.labels[static_cast<std::size_t>(i)]].push_back(i);
  }
  std::vector<Eigen::Index> train_rows, val_rows;
  Rng split_rng = rng.split(0x73706c69ULL);
  for (auto& rows : by_label) {
    split_rng.shuffle(rows);
    auto n_val = static_cast<std::size_t>(config.validation_fraction *
                                          static_cast<double>(rows.size()));
    val_rows.insert(val_rows.end(), rows.begin(), rows.begin() + n_val);
    train_rows.insert(train_rows.end(), rows.begin() + n_val, rows.end());
  }

  OptimizerState opt = init_optimizer(net, config.base_learning_rate, config.lr_decay);
  TrainingHistory history;
  NetworkParameters best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_without_improvement = 0;

  Rng epoch_rng = rng.split(0x65706f63ULL);
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    opt.epoch = epoch / config.lr_decay_epochs;
    epoch_rng.shuffle(train_rows);

    double loss_sum = 0.0;
    std::int64_t loss_count = 0;
    const auto n_train = static_cast<Eigen::Index>(train_rows.size());
    for (Eigen::Index start = 0; start < n_train; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n_train - start);
      if (b < 2 && !config.sign_flip_augmentation) continue;
      Eigen::MatrixXd batch(b, dataset.dim());
      std::vector<std::uint8_t> labels(static_cast<std::size_t>(b));
      for (Eigen::Index i = 0; i < b; ++i) {
        batch.row(i) = dataset.data.row(train_rows[static_cast<std::size_t>(start + i)]);
        labels[static_cast<std::size_t>(i)] =
            dataset.labels[static_cast<std::size_t>(train_rows[static_cast<std::size_t>(start + i)])];
      }
      if (config.sign_flip_augmentation) {
        auto aug = augment_sign_flip(batch, labels);
        batch = std::move(aug.first);
        labels = std::move(aug.second);
      }

      ForwardTrace trace;
      Eigen::VectorXd f = forward(net, batch, ForwardMode::kTraining, &trace);
      const auto nb = static_cast<double>(batch.rows());
      Eigen::VectorXd output_grads(batch.rows());
      for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        double mapped = output_map(loss, f[i]);
        double v = loss_value(loss, mapped, labels[static_cast<std::size_t>(i)]);
        loss_sum += v;
        ++loss_count;
        output_grads[i] = loss_grad(loss, mapped, labels[static_cast<std::size_t>(i)]) *
                          output_map_derivative(loss, f[i]) / nb;
      }
      if (!std::isfinite(loss_sum)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch offset " + std::to_string(start));
      }
      NetworkGradients grads = backward(net, trace, output_grads);
      adam_step(opt, net, grads);
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(std::max<std::int64_t>(1, loss_count));
    stats.val_loss = mean_loss_inference(net, loss, dataset.data, dataset.labels, val_rows);
    stats.learning_rate = opt.effective_learning_rate();
    history.epochs.push_back(stats);
    if (!std::isfinite(stats.val_loss)) {
      throw std::runtime_error("train: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    }

    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      best = net;
      history.best_epoch = epoch;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= config.patience) break;
    }
  }

  net = best;
  history.best_val_loss = best_val;
  return history;
}

Ensemble train_ensemble(int k, const Dataset& dataset, const LossSpec& loss,
                        const TrainConfig& config, int threads) {
  if (k < 1) throw std::invalid_argument("ensemble size must be >= 1");
  dataset.validate();

  Ensemble ensemble;
  ensemble.loss = loss;
  ensemble.prior = ModelPriorRatio{};
  Dataset working = dataset;
  if (config.standardize_inputs) {
    ensemble.scaler = fit_input_scaler(dataset.data);
    working.data = ensemble.scaler.apply(dataset.data);
  }

  ensemble.members.resize(static_cast<std::size_t>(k));
  ensemble.histories.resize(static_cast<std::size_t>(k));
  std::vector<std::string> failures(static_cast<std::size_t>(k));

  auto train_member = [&](int member) {
    try {
      TrainConfig member_config = config;
      member_config.seed = config.seed + static_cast<std::uint64_t>(member);
      NetworkParameters net =
          init_network(static_cast<int>(working.dim()), member_config.seed);
      ensemble.histories[static_cast<std::size_t>(member)] =
          train(net, working, loss, member_config);
      ensemble.members[static_cast<std::size_t>(member)] = std::move(net);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(member)] =
          "ensemble member " + std::to_string(member) + ": " + e.what();
    }
  };

  const int pool = std::max(1, std::min(threads, k));
  if (pool == 1) {
    for (int member = 0; member < k; ++member) train_member(member);
  } else {
    std::vector<std::thread> workers;
    for (int w = 0; w < pool; ++w) {
      workers.emplace_back([&, w]() {
        for (int member = w; member < k; member += pool) train_member(member);
      });
    }
    for (auto& t : workers) t.join();
  }
  for (const auto& failure : failures) {
    if (!failure.empty()) throw std::runtime_error(failure);
  }
  return ensemble;
}

Eigen::VectorXd decode_network_log_k(const NetworkParameters& net, const LossSpec& loss,
                                     const InputScaler& scaler, const Eigen::MatrixXd& batch,
                                     ModelPriorRatio prior) {
  Eigen::MatrixXd scaled = scaler.apply(batch);
  Eigen::VectorXd f = forward_inference(net, scaled);
  Eigen::VectorXd log_k(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    log_k[i] = decode_log_k(loss, output_map(loss, f[i]), prior);
  }
  return log_k;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> ensemble_log_k(const Ensemble& ensemble,
                                                           const Eigen::MatrixXd& batch) {
  const auto k = static_cast<Eigen::Index>(ensemble.members.size());
  if (k == 0) throw std::invalid_argument("ensemble has no members");
  Eigen::MatrixXd decoded(batch.rows(), k);
  for (Eigen::Index member = 0; member < k; ++member) {
    decoded.col(member) =
        decode_network_log_k(ensemble.members[static_cast<std::size_t>(member)],
                             ensemble.loss, ensemble.scaler, batch, ensemble.prior);
  }
  Eigen::VectorXd mean = decoded.rowwise().mean();
  Eigen::VectorXd stderr_jk = Eigen::VectorXd::Zero(batch.rows());
  if (k > 1) {
    const double kd = static_cast<double>(k);
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
      // Leave-one-out means; their spread gives the jackknife error.
      double total = decoded.row(r).sum();
      double acc = 0.0;
      for (Eigen::Index member = 0; member < k; ++member) {
        double loo = (total - decoded(r, member)) / (kd - 1.0);
        double d = loo - mean[r];
        acc += d * d;
      }
      stderr_jk[r] = std::sqrt((kd - 1.0) / kd * acc);
    }
  }
  return {std::move(mean), std::move(stderr_jk)};
}

}  // namespace evnet
