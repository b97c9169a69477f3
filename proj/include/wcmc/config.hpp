#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wcmc/channel.hpp"
#include "wcmc/dataset.hpp"

namespace wcmc {

enum class Scenario { GaussianToy, ProbitSynthetic, ProbitCsv };

Scenario parse_scenario(const std::string& name);
std::string to_string(Scenario s);

inline const std::vector<std::string>& known_schemes() {
  static const std::vector<std::string> names{"gcmc",       "wgcmc-oma", "wgcmc-noma", "wvcmc-oma",
                                              "wvcmc-noma", "sgld",      "best-single"};
  return names;
}

struct WvcmcConfig {
  double eta = 1e-3;
  /// When set, eta = eta_per_worker / K (overrides eta).
  std::optional<double> eta_per_worker;
  int t_m = 30;
  std::size_t batch_size = 0;  // 0: full batch
  bool entropy = true;

  double resolved_eta(int workers) const {
    return eta_per_worker ? *eta_per_worker / workers : eta;
  }
};

struct SgldConfig {
  double alpha = 0.01;
  double beta = 1.0;
  double gamma = 0.7;
  std::size_t burn_in = 10000;
  std::size_t batch_size = 500;
  /// Total iterations; unset means matched to the WVCMC-OMA gradient budget.
  std::optional<std::size_t> iterations;
  bool prior_init = true;
};

struct GaussianConfig {
  int d = 5;
  bool heterogeneous = true;
};

struct CsvConfig {
  std::string path;
  std::string label = "label";
  std::optional<int> pca_dim;
  double test_fraction = 0.15;
};

struct ProbitConfig {
  std::size_t n = 8500;
  std::vector<double> theta_star;  // empty: default 5-d parameter
  double sigma2 = 1.0;
  std::size_t test_points = 1000;
  std::size_t reference_samples = 20000;
  std::size_t burn_in = 100;
  CsvConfig csv;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::GaussianToy;
  int workers = 10;
  std::size_t blocks = 2000;            // T
  std::optional<std::size_t> samples;   // S override for both access modes
  double snr_db = 5.0;
  std::optional<double> power;          // P; scenario default when unset
  std::optional<ChannelKind> channel;   // scenario default when unset
  std::optional<int> repetitions;       // l; scenario default when unset
  std::vector<std::string> schemes;
  PartitionRule partition;
  int trials = 1;
  std::uint64_t seed = 1;
  int parallel = 1;
  bool timing = true;
  std::optional<bool> recenter;         // default: on for probit scenarios
  std::string output = "results.csv";
  GaussianConfig gaussian;
  ProbitConfig probit;
  WvcmcConfig wvcmc_oma;
  WvcmcConfig wvcmc_noma;
  SgldConfig sgld;

  void validate() const;

  // Resolved values.
  int dim() const;
  int resolved_repetitions() const;
  double resolved_power() const;
  ChannelKind resolved_channel() const;
  bool resolved_recenter() const;
  std::size_t samples_oma() const;
  std::size_t samples_noma() const;
  bool wants(const std::string& scheme) const;
};

/// Scenario defaults (paper constants) for the named scenario.
ExperimentConfig default_config(Scenario scenario);

/// Strict parse: unknown keys raise std::invalid_argument naming the key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& c);

}  // namespace wcmc
