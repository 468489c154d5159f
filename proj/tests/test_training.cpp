#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evnet/losses.hpp"
#include "evnet/models.hpp"
#include "evnet/rng.hpp"
#include "evnet/training.hpp"

#include <cmath>

using namespace evnet;

namespace {

GenerativePair tiny_pair(int dim) {
  // Two shifted Gaussians; enough structure to fit.
  GenerativePair pair;
  pair.dim = dim;
  auto sampler = [dim](double shift) {
    return [dim, shift](std::uint64_t seed, int count) {
      Rng rng(seed);
      Eigen::MatrixXd x(count, dim);
      for (int i = 0; i < count; ++i) {
        for (int d = 0; d < dim; ++d) x(i, d) = shift + rng.normal();
      }
      return x;
    };
  };
  pair.sample_m1 = sampler(0.8);
  pair.sample_m0 = sampler(-0.8);
  return pair;
}

}  // namespace

TEST_CASE("generate_training_set: counts, balance, determinism") {
  auto pair = time_series_pair(20, default_time_grid(20, 1.0));
  Dataset ds = generate_training_set(pair, 1000, 3);
  CHECK(ds.size() == 2000);
  CHECK(ds.dim() == 20);
  CHECK(ds.count_label(1) == 1000);
  CHECK(ds.count_label(0) == 1000);
  CHECK(ds.implied_log_prior_ratio() == 0.0);

  Dataset again = generate_training_set(pair, 1000, 3);
  CHECK(ds.data == again.data);
  CHECK(ds.labels == again.labels);
  Dataset other = generate_training_set(pair, 1000, 4);
  CHECK(ds.data != other.data);

  auto rpair = rastrigin_pair(2, 1.0 / 16.0);
  Dataset rds = generate_training_set(rpair, 500, 1);
  CHECK(rds.size() == 1000);
  CHECK(rds.dim() == 2);
}

TEST_CASE("sign-flip augmentation") {
  Eigen::MatrixXd batch(2, 3);
  batch << 1, -2, 3, 4, 5, -6;
  std::vector<std::uint8_t> labels = {1, 0};
  auto [aug, aug_labels] = augment_sign_flip(batch, labels);
  REQUIRE(aug.rows() == 4);
  CHECK(aug.topRows(2) == batch);
  CHECK(aug.bottomRows(2) == -batch);
  CHECK(aug_labels == std::vector<std::uint8_t>{1, 0, 1, 0});
}

TEST_CASE("sign flip is label-safe for the time-series pair") {
  // The marginal is zero-mean Gaussian, so log K is even in x.
  const int n = 10;
  Eigen::VectorXd t = default_time_grid(n, 4.0);
  TimeSeriesOracle oracle(n, t);
  auto spec = make_time_series_spec(n, TimeSeriesVariant::kM1, t);
  Eigen::MatrixXd xs = sample_time_series(spec, 8, 50);
  for (int i = 0; i < xs.rows(); ++i) {
    Eigen::VectorXd x = xs.row(i).transpose();
    Eigen::VectorXd neg = -x;
    CHECK(oracle.log_k(x) == doctest::Approx(oracle.log_k(neg)).epsilon(1e-12));
  }
}

TEST_CASE("input scaler standardizes and round-trips dimension checks") {
  Rng rng(5);
  Eigen::MatrixXd data(500, 3);
  for (int i = 0; i < 500; ++i) {
    data(i, 0) = 5.0 + 2.0 * rng.normal();
    data(i, 1) = -1.0 + 0.1 * rng.normal();
    data(i, 2) = 100.0 * rng.normal();
  }
  InputScaler scaler = fit_input_scaler(data);
  Eigen::MatrixXd scaled = scaler.apply(data);
  for (int d = 0; d < 3; ++d) {
    CHECK(std::abs(scaled.col(d).mean()) < 1e-12);
    double var = scaled.col(d).array().square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(0.01));
  }
  CHECK_THROWS_AS(scaler.apply(Eigen::MatrixXd::Zero(2, 5)), std::invalid_argument);
  InputScaler identity;
  CHECK(identity.apply(data) == data);
}

TEST_CASE("train config validation") {
  TrainConfig config;
  config.batch_size = 1;
  CHECK_THROWS_AS(config.validate(100), std::invalid_argument);
  config = TrainConfig{};
  config.patience = 500;
  CHECK_THROWS_AS(config.validate(100), std::invalid_argument);
  config = TrainConfig{};
  config.validation_fraction = 0.001;
  CHECK_THROWS_AS(config.validate(100), std::invalid_argument);
  config = TrainConfig{};
  CHECK_NOTHROW(config.validate(100));
}

TEST_CASE("training overfits a tiny dataset and is deterministic") {
  auto pair = tiny_pair(5);
  Dataset ds = generate_training_set(pair, 16, 7);  // 32 samples
  LossSpec loss(LossKind::kLPopExponential, 2.0);
  TrainConfig config;
  config.batch_size = 8;
  config.max_epochs = 500;
  config.patience = 500;
  config.validation_fraction = 0.25;
  config.base_learning_rate = 1e-3;
  config.lr_decay = 1.0;
  config.sign_flip_augmentation = false;
  config.seed = 11;

  NetworkParameters net = init_network(5, config.seed);
  double initial_loss;
  {
    NetworkParameters probe = net;
    Eigen::VectorXd f = forward(probe, ds.data, ForwardMode::kInference);
    double total = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      total += loss_value(loss, output_map(loss, f[i]), ds.labels[i]);
    }
    initial_loss = total / static_cast<double>(f.size());
  }
  TrainingHistory history = train(net, ds, loss, config);
  CHECK(history.epochs.back().train_loss < 0.5 * initial_loss);
  CHECK(history.best_epoch >= 0);

  // identical seed, identical everything
  NetworkParameters net2 = init_network(5, config.seed);
  TrainingHistory history2 = train(net2, ds, loss, config);
  CHECK(net.dense[0].weight == net2.dense[0].weight);
  CHECK(net.dense[5].bias == net2.dense[5].bias);
  CHECK(history.best_epoch == history2.best_epoch);
}

TEST_CASE("early stopping returns the best-validation parameters") {
  auto pair = tiny_pair(4);
  Dataset ds = generate_training_set(pair, 200, 9);
  LossSpec loss(LossKind::kExponential);
  TrainConfig config;
  config.batch_size = 32;
  config.max_epochs = 40;
  config.patience = 5;
  config.seed = 2;
  config.sign_flip_augmentation = false;

  NetworkParameters net = init_network(4, config.seed);
  TrainingHistory history = train(net, ds, loss, config);
  REQUIRE(history.best_epoch >= 0);
  double best = history.epochs[static_cast<std::size_t>(history.best_epoch)].val_loss;
  for (const auto& e : history.epochs) CHECK(best <= e.val_loss + 1e-15);
  CHECK(history.best_val_loss == doctest::Approx(best));
}

TEST_CASE("constant-feature dataset cannot beat the balanced optimum") {
  // All rows identical: the only achievable predictions are constant, so the
  // best validation loss is the pointwise optimum at p1 = p0.
  const int dim = 3;
  Dataset ds;
  ds.data = Eigen::MatrixXd::Ones(400, dim);
  ds.labels.resize(400);
  for (int i = 0; i < 400; ++i) ds.labels[static_cast<std::size_t>(i)] = i % 2;

  LossSpec loss(LossKind::kLPopExponential, 2.0);
  TrainConfig config;
  config.batch_size = 32;
  config.max_epochs = 60;
  config.patience = 60;
  config.seed = 3;
  config.sign_flip_augmentation = false;
  config.standardize_inputs = false;

  NetworkParameters net = init_network(dim, config.seed);
  TrainingHistory history = train(net, ds, loss, config);

  double fstar = optimal_f_oracle(loss, 0.5, 0.5);
  double floor_loss =
      0.5 * loss_value(loss, fstar, 1) + 0.5 * loss_value(loss, fstar, 0);
  CHECK(history.best_val_loss >= floor_loss * (1.0 - 0.02));
}

TEST_CASE("ensemble: seeds, distinct members, reduction to train") {
  auto pair = tiny_pair(4);
  Dataset ds = generate_training_set(pair, 100, 21);
  LossSpec loss(LossKind::kLPopExponential, 2.0);
  TrainConfig config;
  config.batch_size = 32;
  config.max_epochs = 5;
  config.patience = 5;
  config.seed = 40;
  config.standardize_inputs = false;

  Ensemble ens = train_ensemble(3, ds, loss, config, 3);
  REQUIRE(ens.members.size() == 3);
  CHECK(ens.members[0].dense[0].weight != ens.members[1].dense[0].weight);
  CHECK(ens.members[1].dense[0].weight != ens.members[2].dense[0].weight);

  // k=1 with the same seed reproduces a direct train() call
  Ensemble one = train_ensemble(1, ds, loss, config, 1);
  NetworkParameters direct = init_network(4, config.seed);
  train(direct, ds, loss, config);
  CHECK(one.members[0].dense[5].bias == direct.dense[5].bias);
  CHECK(one.members[0].dense[0].weight == direct.dense[0].weight);

  // parallel and serial training agree bit-for-bit
  Ensemble serial = train_ensemble(3, ds, loss, config, 1);
  for (int m = 0; m < 3; ++m) {
    CHECK(serial.members[static_cast<std::size_t>(m)].dense[0].weight ==
          ens.members[static_cast<std::size_t>(m)].dense[0].weight);
  }
}

TEST_CASE("ensemble_log_k: decoded-domain averaging and jackknife") {
  // Hand-build an ensemble of identical-topology nets, then check the
  // aggregation algebra without touching training.
  LossSpec loss(LossKind::kExponential);
  Ensemble ens;
  ens.loss = loss;
  for (int m = 0; m < 2; ++m) {
    NetworkParameters net = init_network(3, 100 + static_cast<std::uint64_t>(m));
    ens.members.push_back(net);
  }
  Eigen::MatrixXd batch(4, 3);
  batch << 0.1, -0.2, 0.3, 1.0, 0.5, -0.5, -1.0, 0.2, 0.0, 0.4, 0.4, 0.4;

  Eigen::VectorXd d0 = decode_network_log_k(ens.members[0], loss, ens.scaler, batch);
  Eigen::VectorXd d1 = decode_network_log_k(ens.members[1], loss, ens.scaler, batch);
  auto [mean, se] = ensemble_log_k(ens, batch);
  for (int i = 0; i < 4; ++i) {
    CHECK(mean[i] == doctest::Approx(0.5 * (d0[i] + d1[i])).epsilon(1e-14));
    CHECK(se[i] == doctest::Approx(0.5 * std::abs(d0[i] - d1[i])).epsilon(1e-12));
  }

  // identical members: zero stderr, mean equals the decoded value
  Ensemble same;
  same.loss = loss;
  same.members = {ens.members[0], ens.members[0], ens.members[0]};
  auto [mean_same, se_same] = ensemble_log_k(same, batch);
  for (int i = 0; i < 4; ++i) {
    CHECK(se_same[i] == doctest::Approx(0.0));
    CHECK(mean_same[i] == doctest::Approx(d0[i]));
  }

  // permuting members changes nothing
  Ensemble swapped;
  swapped.loss = loss;
  swapped.members = {ens.members[1], ens.members[0]};
  auto [mean_swapped, se_swapped] = ensemble_log_k(swapped, batch);
  for (int i = 0; i < 4; ++i) {
    CHECK(mean_swapped[i] == doctest::Approx(mean[i]));
    CHECK(se_swapped[i] == doctest::Approx(se[i]));
  }

  // single member: stderr identically zero
  Ensemble solo;
  solo.loss = loss;
  solo.members = {ens.members[0]};
  auto [mean_solo, se_solo] = ensemble_log_k(solo, batch);
  CHECK(se_solo.cwiseAbs().maxCoeff() == 0.0);
  CHECK(mean_solo == d0);
}

TEST_CASE("train rejects dimension mismatches") {
  auto pair = tiny_pair(4);
  Dataset ds = generate_training_set(pair, 50, 1);
  NetworkParameters net = init_network(7, 1);
  TrainConfig config;
  config.seed = 1;
  CHECK_THROWS_AS(train(net, ds, LossSpec::default_recommendation(), config),
                  std::invalid_argument);
}
