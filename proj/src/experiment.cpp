#include "wcmc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "wcmc/aggregators.hpp"
#include "wcmc/baselines.hpp"
#include "wcmc/channel.hpp"
#include "wcmc/metrics.hpp"
#include "wcmc/posteriors.hpp"
#include "wcmc/wvcmc.hpp"

namespace wcmc {

const char* const kResultColumns =
    "scheme,snr_db,T,K,zeta,trial,err2,kl,computed_gradients,wall_ms,seed";

namespace {

using Clock = std::chrono::steady_clock;

// Reference posteriors and ingested CSVs are expensive and identical across
// sweep points that share a data seed.
std::mutex g_cache_mutex;
std::map<std::string, std::shared_ptr<const Samples>> g_reference_cache;
std::map<std::string, std::shared_ptr<const CsvIngestResult>> g_csv_cache;

std::shared_ptr<const CsvIngestResult> cached_csv(const CsvConfig& c) {
  std::ostringstream key;
  key << c.path << '|' << c.label << '|' << (c.pca_dim ? *c.pca_dim : -1);
  {
    std::lock_guard lock(g_cache_mutex);
    auto it = g_csv_cache.find(key.str());
    if (it != g_csv_cache.end()) return it->second;
  }
  auto res = std::make_shared<const CsvIngestResult>(ingest_csv(c.path, c.label, c.pca_dim));
  std::lock_guard lock(g_cache_mutex);
  return g_csv_cache.emplace(key.str(), res).first->second;
}

std::shared_ptr<const Samples> cached_reference(const std::string& key, const ProbitShard& global,
                                                std::size_t count, std::size_t burn_in,
                                                std::uint64_t seed) {
  {
    std::lock_guard lock(g_cache_mutex);
    auto it = g_reference_cache.find(key);
    if (it != g_reference_cache.end()) return it->second;
  }
  Rng rng(seed);
  auto ref = std::make_shared<const Samples>(gibbs_probit_sampler(global, count, burn_in, rng));
  std::lock_guard lock(g_cache_mutex);
  return g_reference_cache.emplace(key, ref).first->second;
}

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Everything a trial shares between schemes.
struct TrialState {
  ScenarioKind kind = ScenarioKind::Gaussian;
  int d = 0;
  std::vector<Samples> local;  // per worker, d x max(S_oma, S_noma)
  Matrix reference_moment;
  std::shared_ptr<const Samples> reference;
  Matrix test_covariates;
  Vector reference_predictions;
  std::unique_ptr<LogJoint> joint;
  std::vector<double> entropies_oma, entropies_noma;
  double prior_variance = 1.0;
};

void prepare_gaussian(const ExperimentConfig& c, std::uint64_t tseed, TrialState& st) {
  st.kind = ScenarioKind::Gaussian;
  st.d = c.gaussian.d;
  const auto covs = gen_gaussian_scenario(c.workers, st.d, c.gaussian.heterogeneous);
  const Matrix global = gaussian_global_covariance(covs);
  st.reference_moment = global;
  st.joint = std::make_unique<GaussianLogJoint>(global);
  const auto smax = static_cast<Eigen::Index>(std::max(c.samples_oma(), c.samples_noma()));
  for (int k = 0; k < c.workers; ++k) {
    Rng rng(derive_seed(tseed, stage::kLocalBase + static_cast<std::uint64_t>(k)));
    st.local.push_back(MvnSampler(Vector::Zero(st.d), covs[k]).draw(rng, smax));
    const double h = GaussianLogJoint(covs[k]).entropy();
    st.entropies_oma.push_back(h);
    st.entropies_noma.push_back(h);
  }
}

void prepare_probit(const ExperimentConfig& c, std::uint64_t tseed, TrialState& st) {
  st.kind = ScenarioKind::Probit;
  LabeledDataset train;
  std::string data_key;
  if (c.scenario == Scenario::ProbitSynthetic) {
    Vector theta_star = default_probit_theta();
    if (!c.probit.theta_star.empty()) {
      theta_star = Eigen::Map<const Vector>(c.probit.theta_star.data(),
                                            static_cast<Eigen::Index>(c.probit.theta_star.size()));
    }
    Rng data_rng(derive_seed(tseed, stage::kData));
    train = gen_probit_data(c.probit.n, theta_star, data_rng);
    Rng test_rng(derive_seed(tseed, stage::kTest));
    st.test_covariates.resize(static_cast<Eigen::Index>(c.probit.test_points), theta_star.size());
    for (Eigen::Index j = 0; j < st.test_covariates.cols(); ++j) {
      for (Eigen::Index i = 0; i < st.test_covariates.rows(); ++i) {
        st.test_covariates(i, j) = test_rng.normal();
      }
    }
    std::ostringstream key;
    key << "syn|" << tseed << '|' << c.probit.n << '|' << std::setprecision(17);
    for (Eigen::Index i = 0; i < theta_star.size(); ++i) key << theta_star(i) << ',';
    data_key = key.str();
  } else {
    const auto csv = cached_csv(c.probit.csv);
    const LabeledDataset& all = csv->data;
    // Shuffle, then hold out a test fraction.
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(tseed, stage::kPartition));
    std::shuffle(order.begin(), order.end(), rng.engine());
    const auto n_test = static_cast<std::size_t>(std::floor(c.probit.csv.test_fraction * all.size()));
    std::vector<std::size_t> test_rows(order.begin(), order.begin() + n_test);
    std::vector<std::size_t> train_rows(order.begin() + n_test, order.end());
    train = all.subset(train_rows);
    st.test_covariates = all.subset(test_rows).covariates;
    std::ostringstream key;
    key << "csv|" << tseed << '|' << c.probit.csv.path << '|' << c.probit.csv.label << '|'
        << (c.probit.csv.pca_dim ? *c.probit.csv.pca_dim : -1) << '|' << c.probit.csv.test_fraction;
    data_key = key.str();
  }
  st.d = train.dim();
  if (train.size() < static_cast<std::size_t>(c.workers)) {
    throw std::invalid_argument("probit: fewer training points than workers");
  }

  const ProbitShard global = ProbitShard::from(train, c.probit.sigma2);
  std::ostringstream ref_key;
  ref_key << data_key << '|' << std::setprecision(17) << c.probit.sigma2 << '|'
          << c.probit.reference_samples << '|' << c.probit.burn_in;
  st.reference = cached_reference(ref_key.str(), global, c.probit.reference_samples,
                                  c.probit.burn_in, derive_seed(tseed, stage::kReference));
  st.reference_moment = second_moment(*st.reference);
  if (st.test_covariates.rows() > 0) {
    st.reference_predictions = ensemble_predict_all(*st.reference, st.test_covariates);
  }
  st.joint = std::make_unique<ProbitLogJoint>(global);
  st.prior_variance = c.probit.sigma2;

  const auto shards = partition(train, c.workers, c.partition);
  const std::size_t smax = std::max(c.samples_oma(), c.samples_noma());
  for (int k = 0; k < c.workers; ++k) {
    // Subposteriors carry the prior raised to 1/K, i.e. variance K sigma^2.
    const ProbitShard shard = ProbitShard::from(shards[k], c.workers * c.probit.sigma2);
    Rng rng(derive_seed(tseed, stage::kLocalBase + static_cast<std::uint64_t>(k)));
    st.local.push_back(gibbs_probit_sampler(shard, smax, c.probit.burn_in, rng));
    st.entropies_oma.push_back(
        knn_entropy(st.local.back().leftCols(static_cast<Eigen::Index>(c.samples_oma()))));
    st.entropies_noma.push_back(
        knn_entropy(st.local.back().leftCols(static_cast<Eigen::Index>(c.samples_noma()))));
  }
}

struct Scored {
  double err2;
  int excluded;
  double kl;
};

Scored score(const TrialState& st, const Samples& samples) {
  const auto e = second_order_error(samples, st.reference_moment);
  double kl = std::numeric_limits<double>::quiet_NaN();
  if (st.kind == ScenarioKind::Probit && st.reference_predictions.size() > 0) {
    const Vector p = ensemble_predict_all(samples, st.test_covariates);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) acc += bernoulli_kl(p(i), st.reference_predictions(i));
    kl = acc / static_cast<double>(p.size());
  }
  return {e.value, e.excluded, kl};
}

}  // namespace

std::vector<Matrix> gen_gaussian_scenario(int workers, int d, bool heterogeneous) {
  if (workers < 1) throw std::invalid_argument("gaussian scenario: K must be positive");
  std::vector<Matrix> covs;
  for (int k = 1; k <= workers; ++k) {
    covs.push_back(toeplitz_covariance(static_cast<double>(k - 1) / workers, d));
  }
  if (heterogeneous) return covs;
  const Matrix c0 = static_cast<double>(workers) * gaussian_global_covariance(covs);
  return std::vector<Matrix>(static_cast<std::size_t>(workers), c0);
}

std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return derive_seed(master, static_cast<std::uint64_t>(trial));
}

std::vector<ResultRow> run_trial(const ExperimentConfig& c, int trial) {
  c.validate();
  const std::uint64_t tseed = trial_seed(c.seed, trial);
  TrialState st;
  try {
    if (c.scenario == Scenario::GaussianToy) {
      prepare_gaussian(c, tseed, st);
    } else {
      prepare_probit(c, tseed, st);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("trial " + std::to_string(trial) + " setup: " + e.what());
  }

  const int d = st.d;
  const int l = c.resolved_repetitions();
  const int m_r = l * d;
  const double power = c.resolved_power();
  const ChannelModel channel = c.resolved_channel() == ChannelKind::Identity
                                   ? ChannelModel::identity(m_r)
                                   : ChannelModel::iid_gaussian(m_r, m_r + 2);
  channel.validate(d);
  const Matrix gram = channel.mean_inverse_gram();
  const double n0 = noise_for_snr(power, c.snr_db, m_r);
  const AggregationOptions agg{l, c.resolved_recenter()};
  const auto s_oma = static_cast<Eigen::Index>(c.samples_oma());
  const auto s_noma = static_cast<Eigen::Index>(c.samples_noma());

  std::vector<ResultRow> rows;
  auto emit = [&](const std::string& scheme, std::size_t blocks, const Samples& samples,
                  std::size_t grads, double ms) {
    const Scored sc = score(st, samples);
    ResultRow r;
    r.scheme = scheme;
    r.snr_db = c.snr_db;
    r.blocks = blocks;
    r.workers = c.workers;
    r.zeta = c.partition.kind == PartitionRule::Kind::Heterogeneous ? c.partition.zeta : 0.0;
    r.trial = trial;
    r.err2 = sc.err2;
    r.kl = sc.kl;
    r.computed_gradients = grads;
    r.wall_ms = c.timing ? ms : 0.0;
    r.seed = tseed;
    r.err2_excluded = sc.excluded;
    rows.push_back(std::move(r));
  };
  auto run_scheme = [&](const std::string& name, auto&& body) {
    if (!c.wants(name)) return;
    try {
      body();
    } catch (const std::exception& e) {
      throw std::runtime_error("trial " + std::to_string(trial) + ", scheme " + name + ": " +
                               e.what());
    }
  };

  const bool need_oma = c.wants("gcmc") || c.wants("wgcmc-oma") || c.wants("wvcmc-oma") ||
                        c.wants("best-single");
  const bool need_noma = c.wants("wgcmc-noma") || c.wants("wvcmc-noma");
  const std::size_t t_oma = static_cast<std::size_t>(s_oma) * static_cast<std::size_t>(c.workers);
  const std::size_t t_noma = static_cast<std::size_t>(s_noma);

  // OMA: one block per worker per sample.
  std::vector<Matrix> enc_oma;
  std::vector<double> p_oma;
  Transmission tx_oma;
  if (need_oma) {
    std::vector<Samples> th;
    for (const Samples& s : st.local) {
      th.push_back(s.leftCols(s_oma));
      p_oma.push_back(power_scale(th.back(), gram, l, power));
      enc_oma.push_back(repetition_encoding(d, l, p_oma.back()));
    }
    Rng rng(derive_seed(tseed, stage::kChannelOma));
    tx_oma = transmit_oma(th, channel, enc_oma, n0, rng);
  }
  // NOMA: shared encoding scaled by the weakest worker.
  Matrix enc_noma;
  double p_min = 0.0;
  Transmission tx_noma;
  if (need_noma) {
    std::vector<Samples> th;
    p_min = std::numeric_limits<double>::infinity();
    for (const Samples& s : st.local) {
      th.push_back(s.leftCols(s_noma));
      p_min = std::min(p_min, power_scale(th.back(), gram, l, power));
    }
    enc_noma = repetition_encoding(d, l, p_min);
    Rng rng(derive_seed(tseed, stage::kChannelNoma));
    tx_noma = transmit_noma(th, channel, enc_noma, n0, rng);
  }

  WeightSet gcmc_ws;
  bool have_gcmc = false;
  auto ensure_gcmc = [&] {
    if (!have_gcmc) gcmc_ws = fit_gcmc(tx_oma.received, enc_oma, agg);
    have_gcmc = true;
  };

  run_scheme("gcmc", [&] {
    const auto t0 = Clock::now();
    ensure_gcmc();
    const Samples out = apply_weights(gcmc_ws, tx_oma.received);
    emit("gcmc", t_oma, out, 0, elapsed_ms(t0));
  });
  run_scheme("wgcmc-oma", [&] {
    const auto t0 = Clock::now();
    const WeightSet ws = fit_wgcmc_oma(tx_oma.received, p_oma, n0, agg);
    emit("wgcmc-oma", t_oma, apply_weights(ws, tx_oma.received), 0, elapsed_ms(t0));
  });
  run_scheme("wgcmc-noma", [&] {
    const auto t0 = Clock::now();
    const WeightSet ws = fit_wgcmc_noma(tx_noma.received[0], c.workers, p_min, n0, agg);
    emit("wgcmc-noma", t_noma, apply_weights(ws, tx_noma.received), 0, elapsed_ms(t0));
  });

  std::size_t wvcmc_oma_budget = 0;
  auto run_vcmc = [&](AccessMode mode) {
    const bool oma = mode == AccessMode::Oma;
    const WvcmcConfig& wc = oma ? c.wvcmc_oma : c.wvcmc_noma;
    const auto t0 = Clock::now();
    VcmcProblem p;
    p.mode = mode;
    p.received = oma ? tx_oma.received : tx_noma.received;
    p.encodings = oma ? enc_oma : std::vector<Matrix>{enc_noma};
    p.workers = c.workers;
    p.n0 = n0;
    p.entropies = oma ? st.entropies_oma : st.entropies_noma;
    p.joint = st.joint.get();
    p.entropy_term = wc.entropy;
    if (oma) ensure_gcmc();
    const WeightSet init = init_weights(mode, st.kind, oma ? enc_oma[0] : enc_noma, c.workers,
                                        oma ? &gcmc_ws : nullptr);
    WvcmcOptions opts;
    opts.eta = wc.resolved_eta(c.workers);
    opts.iterations = wc.t_m;
    opts.batch_size = wc.batch_size;
    opts.record_objective = false;
    Rng rng(derive_seed(tseed, oma ? stage::kWvcmcOma : stage::kWvcmcNoma));
    const WvcmcResult res = run_wvcmc(p, init, opts, rng);
    if (oma) wvcmc_oma_budget = res.computed_gradients;
    emit(oma ? "wvcmc-oma" : "wvcmc-noma", oma ? t_oma : t_noma, res.samples,
         res.computed_gradients, elapsed_ms(t0));
  };
  run_scheme("wvcmc-oma", [&] { run_vcmc(AccessMode::Oma); });
  run_scheme("wvcmc-noma", [&] { run_vcmc(AccessMode::Noma); });

  run_scheme("sgld", [&] {
    const auto t0 = Clock::now();
    SgldSchedule sched{c.sgld.alpha, c.sgld.beta, c.sgld.gamma, c.sgld.burn_in, 0, c.sgld.batch_size};
    const std::size_t n = st.joint->num_data();
    const std::size_t nb = n == 0 ? 1 : std::min(sched.batch_size, n);
    if (c.sgld.iterations) {
      sched.iterations = *c.sgld.iterations;
    } else {
      // Matched to the WVCMC-OMA budget of N_b * S gradients per iteration.
      std::size_t budget = wvcmc_oma_budget;
      if (budget == 0) {
        const std::size_t wb = (c.wvcmc_oma.batch_size == 0 || n == 0)
                                   ? std::max<std::size_t>(n, 1)
                                   : std::min(c.wvcmc_oma.batch_size, n);
        budget = wb * static_cast<std::size_t>(s_oma) * static_cast<std::size_t>(c.wvcmc_oma.t_m);
      }
      sched.iterations = budget / nb;
    }
    Rng rng(derive_seed(tseed, stage::kSgld));
    Vector init = Vector::Zero(d);
    if (c.sgld.prior_init) {
      const double sd = std::sqrt(st.prior_variance);
      for (Eigen::Index i = 0; i < d; ++i) init(i) = sd * rng.normal();
    }
    const SgldResult res = sgld_run(*st.joint, sched, init, rng);
    emit("sgld", 0, res.samples, res.computed_gradients, elapsed_ms(t0));
  });

  run_scheme("best-single", [&] {
    const auto t0 = Clock::now();
    std::vector<Samples> decoded;
    for (std::size_t k = 0; k < enc_oma.size(); ++k) {
      decoded.push_back(pseudoinverse(enc_oma[k]) * tx_oma.received[k]);
    }
    const BestWorker best = best_single_worker(decoded, [&](const Samples& s) {
      return second_order_error(s, st.reference_moment).value;
    });
    emit("best-single", t_oma, best.samples, 0, elapsed_ms(t0));
  });
  return rows;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& c) {
  c.validate();
  std::vector<std::vector<ResultRow>> per_trial(static_cast<std::size_t>(c.trials));
  std::vector<std::exception_ptr> errors(per_trial.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < c.trials; t = next++) {
      try {
        per_trial[t] = run_trial(c, t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const int threads = std::min(c.parallel, c.trials);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<ResultRow> rows;
  for (auto& r : per_trial) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

ExperimentConfig apply_axis(ExperimentConfig c, const std::string& axis, double value) {
  if (axis == "snr") {
    c.snr_db = value;
  } else if (axis == "T") {
    if (value < 1 || value != std::floor(value)) throw std::invalid_argument("sweep: T must be a positive integer");
    c.blocks = static_cast<std::size_t>(value);
  } else if (axis == "K") {
    if (value < 1 || value != std::floor(value)) throw std::invalid_argument("sweep: K must be a positive integer");
    c.workers = static_cast<int>(value);
  } else if (axis == "zeta") {
    c.partition.kind = PartitionRule::Kind::Heterogeneous;
    c.partition.zeta = value;
  } else {
    throw std::invalid_argument("sweep: unknown axis '" + axis + "' (expected snr, T, K or zeta)");
  }
  c.validate();
  return c;
}

std::vector<ResultRow> sweep(const ExperimentConfig& c, const std::string& axis,
                             const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("sweep: no values given");
  std::vector<ExperimentConfig> points;
  for (double v : values) points.push_back(apply_axis(c, axis, v));
  std::vector<ResultRow> rows;
  for (const auto& p : points) {
    auto r = run_experiment(p);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

void write_results(const std::vector<ResultRow>& rows, std::ostream& out, bool header) {
  if (header) out << kResultColumns << '\n';
  const auto old = out.precision(17);
  for (const auto& r : rows) {
    out << r.scheme << ',' << r.snr_db << ',' << r.blocks << ',' << r.workers << ',' << r.zeta
        << ',' << r.trial << ',' << r.err2 << ',';
    if (std::isnan(r.kl)) {
      out << "nan";
    } else {
      out << r.kl;
    }
    out << ',' << r.computed_gradients << ',' << r.wall_ms << ',' << r.seed << '\n';
  }
  out.precision(old);
}

std::vector<ResultRow> read_results(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("results: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultColumns) throw std::invalid_argument("results: unexpected header '" + line + "'");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) f.push_back(cell);
    if (f.size() != 11) {
      throw std::invalid_argument("results line " + std::to_string(lineno) + ": expected 11 fields");
    }
    try {
      ResultRow r;
      r.scheme = f[0];
      r.snr_db = std::stod(f[1]);
      r.blocks = std::stoull(f[2]);
      r.workers = std::stoi(f[3]);
      r.zeta = std::stod(f[4]);
      r.trial = std::stoi(f[5]);
      r.err2 = std::stod(f[6]);
      r.kl = f[7] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[7]);
      r.computed_gradients = std::stoull(f[8]);
      r.wall_ms = std::stod(f[9]);
      r.seed = std::stoull(f[10]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw std::invalid_argument("results line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

nlohmann::json run_manifest(const ExperimentConfig& c, const std::vector<ResultRow>& rows,
                            const std::string& axis, const std::vector<double>& values) {
  nlohmann::json m;
  m["version"] = kVersion;
  m["config"] = to_json(c);
  m["rows"] = rows.size();
  m["columns"] = kResultColumns;
  long excluded = 0;
  for (const auto& r : rows) excluded += r.err2_excluded;
  m["err2_excluded_terms"] = excluded;
  if (!axis.empty()) m["sweep"] = {{"axis", axis}, {"values", values}};
  if (c.scenario == Scenario::ProbitCsv) {
    try {
      m["csv_explained_variance"] = cached_csv(c.probit.csv)->explained_variance_ratio;
    } catch (const std::exception&) {
    }
  }
  return m;
}

void clear_reference_cache() {
  std::lock_guard lock(g_cache_mutex);
  g_reference_cache.clear();
  g_csv_cache.clear();
}

}  // namespace wcmc
