// Command-line entry point: dataset generation, ensemble training,
// evaluation against oracles, blind coverage testing, the Rastrigin grid
// demonstration, and the Gaussian-MLE baseline comparison.
//
// Exit codes: 0 success (coverage pass), 1 invalid config or shape
// mismatch, 2 missing/unwritable path, 3 non-finite training abort,
// 4 coverage calibration failure.

#include "evnet/config.hpp"
#include "evnet/dataset.hpp"
#include "evnet/evaluation.hpp"
#include "evnet/losses.hpp"
#include "evnet/models.hpp"
#include "evnet/nn.hpp"
#include "evnet/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitTraining = 3;
constexpr int kExitCalibration = 4;

struct CliError : std::runtime_error {
  int code;
  CliError(int code, const std::string& message) : std::runtime_error(message), code(code) {}
};

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "evnet_out";
  int threads = 0;
};

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EVNET_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

evnet::RunConfig load_config(const GlobalOptions& global) {
  evnet::RunConfig config;
  if (!global.config_path.empty()) {
    if (!fs::exists(global.config_path)) {
      throw CliError(kExitIo, "config file not found: " + global.config_path);
    }
    try {
      config = evnet::RunConfig::from_file(global.config_path);
    } catch (const std::exception& e) {
      throw CliError(kExitConfig, e.what());
    }
  }
  if (global.seed) config.set("seed", std::to_string(*global.seed));
  return config;
}

fs::path ensure_out_dir(const GlobalOptions& global) {
  fs::path out(global.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw CliError(kExitIo, "cannot create output directory '" + out.string() + "'");
  }
  return out;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CliError(kExitIo, "cannot write '" + path.string() + "'");
  out << text;
}

void write_resolved_config(const fs::path& out_dir, const evnet::RunConfig& config) {
  write_text_file(out_dir / "config.resolved", config.resolved_text());
}

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct ModelSetup {
  std::string family;
  int n = 0;
  double sigma2 = 0.0;
  double t_step = 1.0;
  evnet::GenerativePair pair;
};

ModelSetup resolve_model(const evnet::RunConfig& config) {
  ModelSetup setup;
  setup.family = config.get_string("model.family");
  if (setup.family == "time-series") {
    setup.n = static_cast<int>(config.get_int("model.n", 20));
    setup.t_step = config.get_double("model.t_step", 1.0);
    setup.pair = evnet::time_series_pair(setup.n, evnet::default_time_grid(setup.n, setup.t_step));
  } else if (setup.family == "rastrigin") {
    setup.n = static_cast<int>(config.get_int("model.n", 2));
    setup.sigma2 = config.get_double("model.sigma2", 1.0 / 16.0);
    setup.pair = evnet::rastrigin_pair(setup.n, setup.sigma2);
  } else {
    throw CliError(kExitConfig, "model.family must be 'time-series' or 'rastrigin', got '" +
                                    setup.family + "'");
  }
  return setup;
}

evnet::LossSpec resolve_loss(const evnet::RunConfig& config) {
  std::string kind = config.get_string("loss.kind", "lpop_exponential");
  double alpha = config.get_double("loss.alpha", 2.0);
  return evnet::LossSpec(evnet::loss_kind_from_name(kind), alpha);
}

evnet::TrainConfig resolve_train_config(const evnet::RunConfig& config) {
  evnet::TrainConfig tc;
  tc.batch_size = static_cast<int>(config.get_int("train.batch_size", tc.batch_size));
  tc.max_epochs = static_cast<int>(config.get_int("train.max_epochs", tc.max_epochs));
  tc.patience = static_cast<int>(config.get_int("train.patience", tc.patience));
  tc.validation_fraction =
      config.get_double("train.validation_fraction", tc.validation_fraction);
  tc.base_learning_rate = config.get_double("train.learning_rate", tc.base_learning_rate);
  tc.lr_decay = config.get_double("train.lr_decay", tc.lr_decay);
  tc.lr_decay_epochs =
      static_cast<int>(config.get_int("train.lr_decay_epochs", tc.lr_decay_epochs));
  tc.sign_flip_augmentation = config.get_bool("train.augment", tc.sign_flip_augmentation);
  tc.standardize_inputs = config.get_bool("train.standardize", tc.standardize_inputs);
  tc.seed = static_cast<std::uint64_t>(config.get_int("seed", 0));
  return tc;
}

evnet::Dataset load_dataset_checked(const std::string& path) {
  if (!fs::exists(path)) throw CliError(kExitIo, "dataset not found: " + path);
  return evnet::load_dataset_file(path);
}

// --- ensemble persistence -------------------------------------------------

void save_ensemble(const fs::path& dir, const evnet::Ensemble& ensemble,
                   std::uint64_t config_hash) {
  json meta;
  meta["loss.kind"] = evnet::loss_kind_name(ensemble.loss.kind());
  meta["loss.alpha"] = ensemble.loss.alpha();
  meta["log_prior_ratio"] = ensemble.prior.log_ratio;
  meta["members"] = ensemble.members.size();
  meta["config_hash"] = config_hash;
  if (!ensemble.scaler.identity()) {
    meta["scaler.mean"] = std::vector<double>(
        ensemble.scaler.mean.data(), ensemble.scaler.mean.data() + ensemble.scaler.mean.size());
    meta["scaler.inv_sd"] = std::vector<double>(
        ensemble.scaler.inv_sd.data(),
        ensemble.scaler.inv_sd.data() + ensemble.scaler.inv_sd.size());
  }
  write_text_file(dir / "ensemble.json", meta.dump(2) + "\n");
  for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
    evnet::save_network_file(ensemble.members[i],
                             (dir / ("member_" + std::to_string(i) + ".evnn")).string());
    evnet::write_history_csv(ensemble.histories[i],
                             (dir / ("history_" + std::to_string(i) + ".csv")).string());
  }
}

evnet::Ensemble load_ensemble(const fs::path& dir) {
  fs::path meta_path = dir / "ensemble.json";
  if (!fs::exists(meta_path)) {
    throw CliError(kExitIo, "checkpoint directory missing ensemble.json: " + dir.string());
  }
  std::ifstream in(meta_path);
  json meta = json::parse(in);
  evnet::Ensemble ensemble;
  ensemble.loss = evnet::LossSpec(
      evnet::loss_kind_from_name(meta.at("loss.kind").get<std::string>()),
      meta.at("loss.alpha").get<double>());
  ensemble.prior.log_ratio = meta.at("log_prior_ratio").get<double>();
  if (meta.contains("scaler.mean")) {
    auto mean = meta["scaler.mean"].get<std::vector<double>>();
    auto inv_sd = meta["scaler.inv_sd"].get<std::vector<double>>();
    ensemble.scaler.mean =
        Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    ensemble.scaler.inv_sd =
        Eigen::Map<Eigen::VectorXd>(inv_sd.data(), static_cast<Eigen::Index>(inv_sd.size()));
  }
  auto count = meta.at("members").get<std::size_t>();
  for (std::size_t i = 0; i < count; ++i) {
    fs::path member = dir / ("member_" + std::to_string(i) + ".evnn");
    if (!fs::exists(member)) throw CliError(kExitIo, "missing checkpoint " + member.string());
    ensemble.members.push_back(evnet::load_network_file(member.string()));
  }
  return ensemble;
}

// Oracle truths for a dataset when the configured family provides one.
std::optional<Eigen::VectorXd> oracle_truths(const ModelSetup& setup,
                                             const Eigen::MatrixXd& rows) {
  if (setup.family == "time-series") {
    evnet::TimeSeriesOracle oracle(setup.n, evnet::default_time_grid(setup.n, setup.t_step));
    return oracle.log_k_batch(rows);
  }
  if (setup.family == "rastrigin") {
    evnet::RastriginOracle oracle(setup.sigma2);
    Eigen::VectorXd out(rows.rows());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      out[r] = oracle.log_k(rows.row(r).transpose());
    }
    return out;
  }
  return std::nullopt;
}

// --- subcommands -----------------------------------------------------------

int cmd_gen_data(const GlobalOptions& global) {
  evnet::RunConfig config = load_config(global);
  fs::path out = ensure_out_dir(global);
  ModelSetup setup;
  evnet::Dataset ds;
  std::uint64_t seed = 0;
  int n_per_model = 0;
  try {
    setup = resolve_model(config);
    seed = static_cast<std::uint64_t>(config.get_int("seed", 0));
    n_per_model = static_cast<int>(config.get_int("model.n_per_model", 1000));
    ds = evnet::generate_training_set(setup.pair, n_per_model, seed);
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    throw CliError(kExitConfig, e.what());
  }
  evnet::save_dataset_file(ds, (out / "dataset.evds").string());
  write_resolved_config(out, config);

  json manifest;
  manifest["created"] = timestamp_utc();
  manifest["seed"] = seed;
  manifest["n_per_model"] = n_per_model;
  manifest["n_samples"] = ds.size();
  manifest["dim"] = ds.dim();
  manifest["label1_count"] = ds.count_label(1);
  manifest["model.family"] = setup.family;
  manifest["model.n"] = setup.n;
  if (setup.family == "rastrigin") manifest["model.sigma2"] = setup.sigma2;
  if (setup.family == "time-series") manifest["model.t_step"] = setup.t_step;
  manifest["config_hash"] = config.hash();
  write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << (out / "dataset.evds").string() << " (" << ds.size() << " rows, dim "
            << ds.dim() << ")\n";
  return kExitOk;
}

int cmd_train(const GlobalOptions& global) {
  evnet::RunConfig config = load_config(global);
  fs::path out = ensure_out_dir(global);
  evnet::Dataset ds = load_dataset_checked(config.get_string("io.dataset"));
  evnet::LossSpec loss = evnet::LossSpec::default_recommendation();
  evnet::TrainConfig tc;
  int k = 0;
  try {
    loss = resolve_loss(config);
    tc = resolve_train_config(config);
    k = static_cast<int>(config.get_int("train.ensemble_size", 4));
    tc.validate(ds.size());
  } catch (const std::exception& e) {
    throw CliError(kExitConfig, e.what());
  }

  evnet::Ensemble ensemble;
  try {
    ensemble = evnet::train_ensemble(k, ds, loss, tc, resolve_threads(global.threads));
    ensemble.prior.log_ratio = ds.implied_log_prior_ratio();
  } catch (const std::exception& e) {
    throw CliError(kExitTraining, std::string("training aborted: ") + e.what());
  }
  save_ensemble(out, ensemble, config.hash());
  write_resolved_config(out, config);

  json manifest;
  manifest["created"] = timestamp_utc();
  manifest["members"] = k;
  manifest["loss.kind"] = evnet::loss_kind_name(loss.kind());
  manifest["loss.alpha"] = loss.alpha();
  manifest["train_samples"] = ds.size();
  manifest["config_hash"] = config.hash();
  for (const auto& history : ensemble.histories) {
    manifest["best_epochs"].push_back(history.best_epoch);
  }
  write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "trained " << k << " member(s); checkpoints in " << out.string() << "\n";
  return kExitOk;
}

Eigen::VectorXd read_observed_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError(kExitIo, "cannot open observed-data file '" + path + "'");
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    if (!token.empty() && token.back() == ',') token.pop_back();
    if (token.empty()) continue;
    values.push_back(std::stod(token));
  }
  if (values.empty()) throw CliError(kExitConfig, "observed-data file is empty");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

int cmd_eval(const GlobalOptions& global, const std::string& observed_path) {
  evnet::RunConfig config = load_config(global);
  fs::path out = ensure_out_dir(global);
  evnet::Ensemble ensemble = load_ensemble(config.get_string("io.checkpoint_dir"));

  if (!observed_path.empty()) {
    Eigen::VectorXd x = read_observed_vector(observed_path);
    if (x.size() != ensemble.members.front().input_dim) {
      throw CliError(kExitConfig, "observed vector length " + std::to_string(x.size()) +
                                      " does not match checkpoint input dim " +
                                      std::to_string(ensemble.members.front().input_dim));
    }
    auto [log_k, stderr_jk] = evnet::ensemble_log_k(ensemble, x.transpose());
    std::cout << "log_k = " << log_k[0] << " +- " << stderr_jk[0] << "\n";
    return kExitOk;
  }

  evnet::Dataset ds = load_dataset_checked(config.get_string("io.dataset"));
  if (ds.dim() != ensemble.members.front().input_dim) {
    throw CliError(kExitConfig, "dataset dim does not match checkpoint input dim");
  }
  auto [log_k, stderr_jk] = evnet::ensemble_log_k(ensemble, ds.data);

  std::optional<Eigen::VectorXd> truth;
  if (config.has("model.family")) {
    ModelSetup setup = resolve_model(config);
    truth = oracle_truths(setup, ds.data);
  }

  std::ofstream csv(out / "predictions.csv");
  if (!csv) throw CliError(kExitIo, "cannot write predictions.csv");
  csv.precision(17);
  csv << "sample_index,log_k,jackknife_err";
  if (truth) csv << ",log_k_true,residual";
  csv << "\n";
  for (Eigen::Index i = 0; i < log_k.size(); ++i) {
    csv << i << ',' << log_k[i] << ',' << stderr_jk[i];
    if (truth) csv << ',' << (*truth)[i] << ',' << (log_k[i] - (*truth)[i]);
    csv << '\n';
  }

  json summary;
  summary["created"] = timestamp_utc();
  summary["n_samples"] = log_k.size();
  summary["config_hash"] = config.hash();
  if (truth) summary["rmse_log_k"] = evnet::rmse_log_k(log_k, *truth);
  write_text_file(out / "summary.json", summary.dump(2) + "\n");
  write_resolved_config(out, config);
  if (truth) std::cout << "rmse_log_k = " << summary["rmse_log_k"].get<double>() << "\n";
  std::cout << "wrote " << (out / "predictions.csv").string() << "\n";
  return kExitOk;
}

int cmd_coverage(const GlobalOptions& global, double scale_logits) {
  evnet::RunConfig config = load_config(global);
  fs::path out = ensure_out_dir(global);
  evnet::Ensemble ensemble = load_ensemble(config.get_string("io.checkpoint_dir"));
  evnet::Dataset ds = load_dataset_checked(config.get_string("io.dataset"));
  if (ds.dim() != ensemble.members.front().input_dim) {
    throw CliError(kExitConfig, "dataset dim does not match checkpoint input dim");
  }
  int n_bins = static_cast<int>(config.get_int("eval.bins", 10));
  int min_count = static_cast<int>(config.get_int("eval.min_count", 20));

  auto [log_k, stderr_jk] = evnet::ensemble_log_k(ensemble, ds.data);
  (void)stderr_jk;
  if (scale_logits != 1.0) log_k *= scale_logits;

  evnet::CoverageReport report;
  try {
    report = evnet::coverage_test(log_k, ds.labels, n_bins, min_count, ensemble.prior);
  } catch (const std::exception& e) {
    throw CliError(kExitConfig, std::string(e.what()) +
                                    " (need roughly min_count * bins = " +
                                    std::to_string(static_cast<std::int64_t>(min_count) * n_bins) +
                                    " labelled samples)");
  }
  evnet::write_coverage_csv(report, (out / "coverage.csv").string());

  bool pass = report.passes();
  json summary;
  summary["created"] = timestamp_utc();
  summary["residual_mean"] = report.residual_mean;
  summary["residual_std"] = report.residual_std;
  summary["included_bins"] = report.included_bins;
  summary["excluded_bins"] = report.excluded_bins;
  summary["n_samples"] = report.total_samples;
  summary["pass"] = pass;
  summary["scale_logits"] = scale_logits;
  summary["config_hash"] = config.hash();
  write_text_file(out / "coverage_summary.json", summary.dump(2) + "\n");
  write_resolved_config(out, config);

  std::cout << "coverage residual mean " << report.residual_mean << ", std "
            << report.residual_std << " over " << report.included_bins << " bins: "
            << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitCalibration;
}

int cmd_rastrigin(const GlobalOptions& global) {
  evnet::RunConfig config = load_config(global);
  fs::path out = ensure_out_dir(global);
  ModelSetup setup;
  try {
    setup = resolve_model(config);
    if (setup.family != "rastrigin" || setup.n != 2) {
      throw CliError(kExitConfig, "rastrigin subcommand requires model.family = rastrigin, model.n = 2");
    }
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    throw CliError(kExitConfig, e.what());
  }

  evnet::Ensemble ensemble;
  if (config.has("io.checkpoint_dir")) {
    ensemble = load_ensemble(config.get_string("io.checkpoint_dir"));
  } else {
    evnet::Dataset ds;
    if (config.has("io.dataset")) {
      ds = load_dataset_checked(config.get_string("io.dataset"));
    } else {
      int n_per_model = static_cast<int>(config.get_int("model.n_per_model", 100000));
      ds = evnet::generate_training_set(setup.pair, n_per_model,
                                        static_cast<std::uint64_t>(config.get_int("seed", 0)));
    }
    try {
      evnet::LossSpec loss = resolve_loss(config);
      evnet::TrainConfig tc = resolve_train_config(config);
      int k = static_cast<int>(config.get_int("train.ensemble_size", 4));
      tc.validate(ds.size());
      ensemble = evnet::train_ensemble(k, ds, loss, tc, resolve_threads(global.threads));
      ensemble.prior.log_ratio = ds.implied_log_prior_ratio();
      save_ensemble(out, ensemble, config.hash());
    } catch (const std::exception& e) {
      throw CliError(kExitTraining, std::string("training aborted: ") + e.what());
    }
  }

  int grid_points = static_cast<int>(config.get_int("eval.grid_points", 41));
  double extent = config.get_double("eval.grid_extent", 2.0);
  evnet::RastriginOracle oracle(setup.sigma2);

  Eigen::MatrixXd grid(grid_points * grid_points, 2);
  int row = 0;
  for (int i = 0; i < grid_points; ++i) {
    for (int j = 0; j < grid_points; ++j, ++row) {
      grid(row, 0) = -extent + 2.0 * extent * i / (grid_points - 1);
      grid(row, 1) = -extent + 2.0 * extent * j / (grid_points - 1);
    }
  }
  auto [net_log_k, stderr_jk] = evnet::ensemble_log_k(ensemble, grid);
  (void)stderr_jk;
  Eigen::VectorXd oracle_log_k(grid.rows());
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    oracle_log_k[r] = oracle.log_k(grid.row(r).transpose());
  }

  std::ofstream csv(out / "rastrigin_grid.csv");
  if (!csv) throw CliError(kExitIo, "cannot write rastrigin_grid.csv");
  csv.precision(17);
  csv << "x1,x2,log_k_network,log_k_oracle\n";
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    csv << grid(r, 0) << ',' << grid(r, 1) << ',' << net_log_k[r] << ',' << oracle_log_k[r]
        << '\n';
  }

  json summary;
  summary["created"] = timestamp_utc();
  summary["rmse_vs_oracle"] = evnet::rmse_log_k(net_log_k, oracle_log_k);
  summary["oracle_max_abs_log_k"] = oracle_log_k.cwiseAbs().maxCoeff();
  summary["grid_points"] = grid_points;
  summary["config_hash"] = config.hash();
  write_text_file(out / "rastrigin_summary.json", summary.dump(2) + "\n");
  write_resolved_config(out, config);
  std::cout << "grid rmse vs oracle = " << summary["rmse_vs_oracle"].get<double>() << "\n";
  return kExitOk;
}

int cmd_baseline(const GlobalOptions& global) {
  evnet::RunConfig config = load_config(global);
  fs::path out = ensure_out_dir(global);
  ModelSetup setup;
  try {
    setup = resolve_model(config);
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    throw CliError(kExitConfig, e.what());
  }
  evnet::Dataset ds = load_dataset_checked(config.get_string("io.dataset"));
  auto truth = oracle_truths(setup, ds.data);
  if (!truth) throw CliError(kExitConfig, "baseline requires an oracle-equipped model family");

  std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("seed", 0));
  int fit_samples = static_cast<int>(config.get_int("eval.fit_samples", 100000));
  evnet::GaussianFit fit1 = evnet::fit_gaussian_mle(setup.pair.sample_m1(seed + 101, fit_samples));
  evnet::GaussianFit fit0 = evnet::fit_gaussian_mle(setup.pair.sample_m0(seed + 202, fit_samples));

  Eigen::VectorXd baseline(ds.size());
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    baseline[i] = evnet::baseline_log_k(fit1, fit0, ds.data.row(i).transpose());
  }

  std::optional<Eigen::VectorXd> network;
  if (config.has("io.checkpoint_dir")) {
    evnet::Ensemble ensemble = load_ensemble(config.get_string("io.checkpoint_dir"));
    if (ds.dim() != ensemble.members.front().input_dim) {
      throw CliError(kExitConfig, "dataset dim does not match checkpoint input dim");
    }
    network = evnet::ensemble_log_k(ensemble, ds.data).first;
  }

  std::ofstream csv(out / "baseline_residuals.csv");
  if (!csv) throw CliError(kExitIo, "cannot write baseline_residuals.csv");
  csv.precision(17);
  csv << "sample_index,method,log_k,log_k_true,residual\n";
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    csv << i << ",gaussian-mle," << baseline[i] << ',' << (*truth)[i] << ','
        << (baseline[i] - (*truth)[i]) << '\n';
  }
  if (network) {
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      csv << i << ",ensemble," << (*network)[i] << ',' << (*truth)[i] << ','
          << ((*network)[i] - (*truth)[i]) << '\n';
    }
  }

  json summary;
  summary["created"] = timestamp_utc();
  summary["fit_samples"] = fit_samples;
  summary["rmse_baseline"] = evnet::rmse_log_k(baseline, *truth);
  if (network) summary["rmse_ensemble"] = evnet::rmse_log_k(*network, *truth);
  summary["config_hash"] = config.hash();
  write_text_file(out / "baseline_summary.json", summary.dump(2) + "\n");
  write_resolved_config(out, config);
  std::cout << "baseline rmse = " << summary["rmse_baseline"].get<double>() << "\n";
  return kExitOk;
}

int cmd_oracle(const GlobalOptions& global) {
  evnet::RunConfig config = load_config(global);
  fs::path out = ensure_out_dir(global);
  ModelSetup setup;
  try {
    setup = resolve_model(config);
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    throw CliError(kExitConfig, e.what());
  }
  evnet::Dataset ds = load_dataset_checked(config.get_string("io.dataset"));
  auto truth = oracle_truths(setup, ds.data);
  if (!truth) throw CliError(kExitConfig, "no oracle available for this model family");
  const char* method = setup.family == "time-series" ? "closed-form" : "quadrature";

  std::ofstream csv(out / "oracle.csv");
  if (!csv) throw CliError(kExitIo, "cannot write oracle.csv");
  csv.precision(17);
  csv << "sample_index,log_k_true,method,stderr\n";
  for (Eigen::Index i = 0; i < truth->size(); ++i) {
    csv << i << ',' << (*truth)[i] << ',' << method << ",0\n";
  }
  write_resolved_config(out, config);
  std::cout << "wrote " << (out / "oracle.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence Network trainer and validation harness"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "run configuration file");
  app.add_option("--seed", global.seed, "override the config seed");
  app.add_option("--out", global.out_dir, "output directory");
  app.add_option("--threads", global.threads,
                 "worker threads (default: EVNET_THREADS or hardware)");

  auto* gen = app.add_subcommand("gen-data", "generate a labelled dataset");
  auto* train = app.add_subcommand("train", "train an ensemble on a dataset");
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints, with oracle truth when available");
  std::string observed_path;
  eval->add_option("--observed", observed_path, "single observed data vector (text file)");
  auto* coverage = app.add_subcommand("coverage", "blind coverage test");
  double scale_logits = 1.0;
  coverage->add_option("--debug-scale-logits", scale_logits,
                       "multiply decoded log K by this factor (corruption check)");
  auto* rastrigin = app.add_subcommand("rastrigin", "Rastrigin grid demonstration");
  auto* baseline = app.add_subcommand("baseline", "Gaussian-MLE density-ratio baseline");
  auto* oracle = app.add_subcommand("oracle", "dump oracle truths for a dataset");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(global);
    if (train->parsed()) return cmd_train(global);
    if (eval->parsed()) return cmd_eval(global, observed_path);
    if (coverage->parsed()) return cmd_coverage(global, scale_logits);
    if (rastrigin->parsed()) return cmd_rastrigin(global);
    if (baseline->parsed()) return cmd_baseline(global);
    if (oracle->parsed()) return cmd_oracle(global);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
