#include "wcmc/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "wcmc/baselines.hpp"

namespace wcmc {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) {
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = j.at(key).get<T>();
  }
}

void read_wvcmc(const json& j, WvcmcConfig& c, const std::string& where) {
  check_keys(j, {"eta", "eta_per_worker", "t_m", "batch_size", "entropy"}, where);
  read(j, "eta", c.eta);
  read_opt(j, "eta_per_worker", c.eta_per_worker);
  read(j, "t_m", c.t_m);
  read(j, "batch_size", c.batch_size);
  read(j, "entropy", c.entropy);
}

json wvcmc_json(const WvcmcConfig& c) {
  json j{{"eta", c.eta}, {"t_m", c.t_m}, {"batch_size", c.batch_size}, {"entropy", c.entropy}};
  j["eta_per_worker"] = c.eta_per_worker ? json(*c.eta_per_worker) : json(nullptr);
  return j;
}

}  // namespace

Scenario parse_scenario(const std::string& name) {
  if (name == "gaussian-toy") return Scenario::GaussianToy;
  if (name == "probit-synthetic") return Scenario::ProbitSynthetic;
  if (name == "probit-csv") return Scenario::ProbitCsv;
  throw std::invalid_argument("unknown scenario '" + name +
                              "' (expected gaussian-toy, probit-synthetic or probit-csv)");
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::GaussianToy: return "gaussian-toy";
    case Scenario::ProbitSynthetic: return "probit-synthetic";
    case Scenario::ProbitCsv: return "probit-csv";
  }
  return "?";
}

ExperimentConfig default_config(Scenario scenario) {
  ExperimentConfig c;
  c.scenario = scenario;
  if (scenario == Scenario::GaussianToy) {
    c.workers = 10;
    c.blocks = 2000;
    c.snr_db = 5.0;
    c.schemes = {"gcmc", "wgcmc-oma", "wgcmc-noma", "wvcmc-oma", "wvcmc-noma"};
    c.wvcmc_oma = {5e-3, std::nullopt, 300, 0, true};
    c.wvcmc_noma = {1e-3, std::nullopt, 30, 0, true};
    c.trials = 20;
  } else {
    c.workers = 20;
    c.blocks = 1000;
    c.snr_db = 15.0;
    c.schemes = {"gcmc", "wgcmc-oma", "wgcmc-noma", "wvcmc-oma", "wvcmc-noma", "best-single"};
    c.wvcmc_oma = {1e-6, std::nullopt, 50, 0, true};
    c.wvcmc_noma = {1e-7, std::nullopt, 50, 0, true};
    c.trials = 20;
  }
  return c;
}

int ExperimentConfig::dim() const {
  if (scenario == Scenario::GaussianToy) return gaussian.d;
  if (scenario == Scenario::ProbitSynthetic) {
    return probit.theta_star.empty() ? 5 : static_cast<int>(probit.theta_star.size());
  }
  return -1;  // known only after ingestion
}

int ExperimentConfig::resolved_repetitions() const {
  if (repetitions) return *repetitions;
  return scenario == Scenario::GaussianToy ? 1 : 2;
}

double ExperimentConfig::resolved_power() const {
  if (power) return *power;
  // Gaussian toy: P = d gives P_k close to 1 for unit-diagonal covariances.
  // Probit: the fit-term curvature grows like K P, so P = 5 keeps the default
  // step sizes (1e-6 OMA, 1e-7 NOMA) stable at K = 20.
  return scenario == Scenario::GaussianToy ? static_cast<double>(gaussian.d) : 5.0;
}

ChannelKind ExperimentConfig::resolved_channel() const {
  if (channel) return *channel;
  return scenario == Scenario::GaussianToy ? ChannelKind::Identity : ChannelKind::IidGaussian;
}

bool ExperimentConfig::resolved_recenter() const {
  if (recenter) return *recenter;
  return scenario != Scenario::GaussianToy;
}

std::size_t ExperimentConfig::samples_oma() const {
  return samples ? *samples : blocks / static_cast<std::size_t>(workers);
}

std::size_t ExperimentConfig::samples_noma() const { return samples ? *samples : blocks; }

bool ExperimentConfig::wants(const std::string& scheme) const {
  return std::find(schemes.begin(), schemes.end(), scheme) != schemes.end();
}

void ExperimentConfig::validate() const {
  if (workers < 1) throw std::invalid_argument("config: K must be >= 1");
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (parallel < 1) throw std::invalid_argument("config: parallel must be >= 1");
  if (!samples && blocks < static_cast<std::size_t>(workers)) {
    throw std::invalid_argument("config: T must be >= K so that OMA gets S = T/K >= 1");
  }
  if (samples_oma() < 2 || samples_noma() < 2) {
    throw std::invalid_argument("config: need at least 2 samples per access mode");
  }
  if (power && !(*power > 0.0)) throw std::invalid_argument("config: power must be positive");
  if (resolved_repetitions() < 1) throw std::invalid_argument("config: repetitions must be >= 1");
  if (schemes.empty()) throw std::invalid_argument("config: no schemes selected");
  for (const auto& s : schemes) {
    const auto& known = known_schemes();
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw std::invalid_argument("config: unknown scheme '" + s + "'");
    }
  }
  if (scenario == Scenario::GaussianToy) {
    if (gaussian.d < 1) throw std::invalid_argument("config: gaussian.d must be >= 1");
    if (wants("best-single")) {
      throw std::invalid_argument("config: best-single needs a probit scenario");
    }
  } else {
    if (!(probit.sigma2 > 0.0)) throw std::invalid_argument("config: probit.sigma2 must be positive");
    if (probit.reference_samples < 1000) {
      throw std::invalid_argument("config: probit.reference_samples must be >= 1000");
    }
    if (scenario == Scenario::ProbitSynthetic && probit.n < static_cast<std::size_t>(workers)) {
      throw std::invalid_argument("config: probit.N must be >= K");
    }
    if (scenario == Scenario::ProbitCsv && probit.csv.path.empty()) {
      throw std::invalid_argument("config: probit.csv.path is required for probit-csv");
    }
    if (!(probit.csv.test_fraction >= 0.0 && probit.csv.test_fraction < 1.0)) {
      throw std::invalid_argument("config: probit.csv.test_fraction must be in [0, 1)");
    }
  }
  for (const WvcmcConfig* w : {&wvcmc_oma, &wvcmc_noma}) {
    if (w->t_m < 0) throw std::invalid_argument("config: t_m must be >= 0");
    if (!(w->resolved_eta(workers) >= 0.0)) throw std::invalid_argument("config: eta must be >= 0");
  }
  if (wants("sgld")) {
    SgldSchedule probe{sgld.alpha, sgld.beta, sgld.gamma, sgld.burn_in, sgld.burn_in + 1,
                       sgld.batch_size};
    probe.validate();
  }
}

ExperimentConfig parse_config(const json& j) {
  check_keys(j,
             {"scenario", "K", "T", "S", "snr_db", "power", "channel", "repetitions", "schemes",
              "partition", "trials", "seed", "parallel", "timing", "recenter", "output", "gaussian",
              "probit", "wvcmc_oma", "wvcmc_noma", "sgld"},
             "top level");
  if (!j.contains("scenario")) throw std::invalid_argument("config: 'scenario' is required");
  ExperimentConfig c = default_config(parse_scenario(j.at("scenario").get<std::string>()));
  read(j, "K", c.workers);
  read(j, "T", c.blocks);
  read_opt(j, "S", c.samples);
  read(j, "snr_db", c.snr_db);
  read_opt(j, "power", c.power);
  if (j.contains("channel") && !j.at("channel").is_null()) {
    c.channel = parse_channel_kind(j.at("channel").get<std::string>());
  }
  read_opt(j, "repetitions", c.repetitions);
  read(j, "schemes", c.schemes);
  if (j.contains("partition")) {
    const json& p = j.at("partition");
    check_keys(p, {"rule", "zeta"}, "partition");
    const std::string rule = p.value("rule", std::string("equal"));
    if (rule == "equal") {
      c.partition.kind = PartitionRule::Kind::Equal;
    } else if (rule == "heterogeneous") {
      c.partition.kind = PartitionRule::Kind::Heterogeneous;
    } else {
      throw std::invalid_argument("config: partition.rule must be equal or heterogeneous");
    }
    read(p, "zeta", c.partition.zeta);
  }
  read(j, "trials", c.trials);
  read(j, "seed", c.seed);
  read(j, "parallel", c.parallel);
  read(j, "timing", c.timing);
  read_opt(j, "recenter", c.recenter);
  read(j, "output", c.output);
  if (j.contains("gaussian")) {
    const json& g = j.at("gaussian");
    check_keys(g, {"d", "mode"}, "gaussian");
    read(g, "d", c.gaussian.d);
    if (g.contains("mode")) {
      const auto mode = g.at("mode").get<std::string>();
      if (mode != "heterogeneous" && mode != "homogeneous") {
        throw std::invalid_argument("config: gaussian.mode must be heterogeneous or homogeneous");
      }
      c.gaussian.heterogeneous = mode == "heterogeneous";
    }
  }
  if (j.contains("probit")) {
    const json& p = j.at("probit");
    check_keys(p, {"N", "theta_star", "sigma2", "test_points", "reference_samples", "burn_in", "csv"},
               "probit");
    read(p, "N", c.probit.n);
    read(p, "theta_star", c.probit.theta_star);
    read(p, "sigma2", c.probit.sigma2);
    read(p, "test_points", c.probit.test_points);
    read(p, "reference_samples", c.probit.reference_samples);
    read(p, "burn_in", c.probit.burn_in);
    if (p.contains("csv")) {
      const json& q = p.at("csv");
      check_keys(q, {"path", "label", "pca_dim", "test_fraction"}, "probit.csv");
      read(q, "path", c.probit.csv.path);
      read(q, "label", c.probit.csv.label);
      read_opt(q, "pca_dim", c.probit.csv.pca_dim);
      read(q, "test_fraction", c.probit.csv.test_fraction);
    }
  }
  if (j.contains("wvcmc_oma")) read_wvcmc(j.at("wvcmc_oma"), c.wvcmc_oma, "wvcmc_oma");
  if (j.contains("wvcmc_noma")) read_wvcmc(j.at("wvcmc_noma"), c.wvcmc_noma, "wvcmc_noma");
  if (j.contains("sgld")) {
    const json& s = j.at("sgld");
    check_keys(s, {"alpha", "beta", "gamma", "burn_in", "batch_size", "iterations", "init"}, "sgld");
    read(s, "alpha", c.sgld.alpha);
    read(s, "beta", c.sgld.beta);
    read(s, "gamma", c.sgld.gamma);
    read(s, "burn_in", c.sgld.burn_in);
    read(s, "batch_size", c.sgld.batch_size);
    read_opt(s, "iterations", c.sgld.iterations);
    if (s.contains("init")) {
      const auto init = s.at("init").get<std::string>();
      if (init != "prior" && init != "zero") {
        throw std::invalid_argument("config: sgld.init must be prior or zero");
      }
      c.sgld.prior_init = init == "prior";
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["scenario"] = to_string(c.scenario);
  j["K"] = c.workers;
  j["T"] = c.blocks;
  j["S"] = c.samples ? json(*c.samples) : json(nullptr);
  j["snr_db"] = c.snr_db;
  j["power"] = c.resolved_power();
  j["channel"] = to_string(c.resolved_channel());
  j["repetitions"] = c.resolved_repetitions();
  j["schemes"] = c.schemes;
  j["partition"] = {
      {"rule", c.partition.kind == PartitionRule::Kind::Equal ? "equal" : "heterogeneous"},
      {"zeta", c.partition.zeta}};
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["parallel"] = c.parallel;
  j["timing"] = c.timing;
  j["recenter"] = c.resolved_recenter();
  j["output"] = c.output;
  j["gaussian"] = {{"d", c.gaussian.d},
                   {"mode", c.gaussian.heterogeneous ? "heterogeneous" : "homogeneous"}};
  json csv{{"path", c.probit.csv.path},
           {"label", c.probit.csv.label},
           {"test_fraction", c.probit.csv.test_fraction}};
  csv["pca_dim"] = c.probit.csv.pca_dim ? json(*c.probit.csv.pca_dim) : json(nullptr);
  j["probit"] = {{"N", c.probit.n},
                 {"theta_star", c.probit.theta_star},
                 {"sigma2", c.probit.sigma2},
                 {"test_points", c.probit.test_points},
                 {"reference_samples", c.probit.reference_samples},
                 {"burn_in", c.probit.burn_in},
                 {"csv", csv}};
  j["wvcmc_oma"] = wvcmc_json(c.wvcmc_oma);
  j["wvcmc_noma"] = wvcmc_json(c.wvcmc_noma);
  j["sgld"] = {{"alpha", c.sgld.alpha},         {"beta", c.sgld.beta},
               {"gamma", c.sgld.gamma},         {"burn_in", c.sgld.burn_in},
               {"batch_size", c.sgld.batch_size}, {"init", c.sgld.prior_init ? "prior" : "zero"}};
  j["sgld"]["iterations"] = c.sgld.iterations ? json(*c.sgld.iterations) : json(nullptr);
  return j;
}

}  // namespace wcmc
