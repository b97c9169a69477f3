// Command-line front end: gen-data, run, sweep, report.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "wcmc/config.hpp"
#include "wcmc/experiment.hpp"
#include "wcmc/report.hpp"

namespace {

using namespace wcmc;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallel;
  bool no_timing = false;
  bool append = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output path (defaults to the config's output)");
  app->add_option("--seed", c.seed, "master seed override");
  app->add_option("--parallel", c.parallel, "number of trials run concurrently");
  app->add_flag("--no-timing", c.no_timing, "write wall_ms as 0 for byte-identical reruns");
  app->add_flag("--append", c.append, "append rows to an existing results file");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.parallel) cfg.parallel = *c.parallel;
  if (c.no_timing) cfg.timing = false;
  if (!c.out.empty()) cfg.output = c.out;
  cfg.validate();
  return cfg;
}

std::string manifest_path(const std::string& csv) {
  std::filesystem::path p(csv);
  p.replace_extension(".manifest.json");
  return p.string();
}

void emit(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows, bool append,
          const std::string& axis = "", const std::vector<double>& values = {}) {
  const bool exists = std::filesystem::exists(cfg.output);
  std::ofstream out(cfg.output, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + cfg.output);
  write_results(rows, out, !(append && exists));
  std::ofstream man(manifest_path(cfg.output));
  man << run_manifest(cfg, rows, axis, values).dump(2) << '\n';
  std::cerr << "wrote " << rows.size() << " rows to " << cfg.output << '\n';
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> v;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double x = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("--values: bad number '" + item + "'");
    v.push_back(x);
  }
  if (v.empty()) throw std::invalid_argument("--values: empty list");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wcmc: consensus Monte Carlo over simulated wireless channels"};
  app.require_subcommand(1);

  Common gen_opts;
  int gen_trial = 0;
  auto* gen = app.add_subcommand("gen-data", "write the synthetic probit data set of one trial as CSV");
  gen->add_option("--config", gen_opts.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_opts.out, "CSV path")->required();
  gen->add_option("--seed", gen_opts.seed, "master seed override");
  gen->add_option("--trial", gen_trial, "trial index whose data stream is used");

  Common run_opts;
  auto* run = app.add_subcommand("run", "run every trial of a config");
  add_common(run, run_opts);

  Common sweep_opts;
  std::string axis;
  std::string values;
  auto* sw = app.add_subcommand("sweep", "repeat a run over one axis");
  add_common(sw, sweep_opts);
  sw->add_option("--axis", axis, "snr, T, K or zeta")->required()->check(CLI::IsMember({"snr", "T", "K", "zeta"}));
  sw->add_option("--values", values, "comma-separated axis values")->required();

  std::string report_in;
  auto* rep = app.add_subcommand("report", "mean and 5/95 percentiles per scheme and sweep point");
  rep->add_option("results", report_in, "results CSV")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      ExperimentConfig cfg = load_config(gen_opts.config);
      if (gen_opts.seed) cfg.seed = *gen_opts.seed;
      if (cfg.scenario != Scenario::ProbitSynthetic) {
        throw std::invalid_argument("gen-data needs scenario probit-synthetic");
      }
      Vector theta = default_probit_theta();
      if (!cfg.probit.theta_star.empty()) {
        theta = Eigen::Map<const Vector>(cfg.probit.theta_star.data(),
                                         static_cast<Eigen::Index>(cfg.probit.theta_star.size()));
      }
      Rng rng(derive_seed(trial_seed(cfg.seed, gen_trial), stage::kData));
      const LabeledDataset data = gen_probit_data(cfg.probit.n, theta, rng);
      std::ofstream out(gen_opts.out);
      if (!out) throw std::runtime_error("cannot write " + gen_opts.out);
      write_csv(data, out);
      std::cerr << "wrote " << data.size() << " rows to " << gen_opts.out << '\n';
    } else if (run->parsed()) {
      const ExperimentConfig cfg = resolve(run_opts);
      emit(cfg, run_experiment(cfg), run_opts.append);
    } else if (sw->parsed()) {
      const ExperimentConfig cfg = resolve(sweep_opts);
      const auto v = parse_values(values);
      emit(cfg, sweep(cfg, axis, v), sweep_opts.append, axis, v);
    } else if (rep->parsed()) {
      std::ifstream in(report_in);
      print_summary(summarize(read_results(in)), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
