#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "wcmc/config.hpp"
#include "wcmc/matops.hpp"

namespace wcmc {

/// Seed stages. Each (trial, stage) pair gets its own stream so adding a
/// scheme never perturbs the draws of another.
namespace stage {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kPartition = 2;
inline constexpr std::uint64_t kReference = 3;
inline constexpr std::uint64_t kTest = 4;
inline constexpr std::uint64_t kChannelOma = 10;
inline constexpr std::uint64_t kChannelNoma = 11;
inline constexpr std::uint64_t kWvcmcOma = 20;
inline constexpr std::uint64_t kWvcmcNoma = 21;
inline constexpr std::uint64_t kSgld = 30;
inline constexpr std::uint64_t kLocalBase = 100;  // + worker index
}  // namespace stage

struct ResultRow {
  std::string scheme;
  double snr_db = 0.0;
  std::size_t blocks = 0;  // T actually used by the scheme
  int workers = 0;
  double zeta = 0.0;
  int trial = 0;
  double err2 = 0.0;
  double kl = 0.0;  // NaN for the Gaussian toy
  std::size_t computed_gradients = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  int err2_excluded = 0;  // diagnostics only, not part of the CSV schema
};

/// Toeplitz covariances rho_k = (k-1)/K (heterogeneous), or all equal to
/// C_0 = K (sum_k C_k^{-1})^{-1} (homogeneous).
std::vector<Matrix> gen_gaussian_scenario(int workers, int d, bool heterogeneous);

/// Seed recorded for a trial (the per-trial root of every stage stream).
std::uint64_t trial_seed(std::uint64_t master, int trial);

/// One trial of every configured scheme.
std::vector<ResultRow> run_trial(const ExperimentConfig& config, int trial);

/// All trials (in parallel up to config.parallel), merged in trial order.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

/// Axis in {snr, T, K, zeta}; one run_experiment per value with shared seeds.
std::vector<ResultRow> sweep(const ExperimentConfig& config, const std::string& axis,
                             const std::vector<double>& values);

ExperimentConfig apply_axis(ExperimentConfig config, const std::string& axis, double value);

extern const char* const kResultColumns;

void write_results(const std::vector<ResultRow>& rows, std::ostream& out, bool header = true);
std::vector<ResultRow> read_results(std::istream& in);

/// Resolved config, library version and run diagnostics.
nlohmann::json run_manifest(const ExperimentConfig& config, const std::vector<ResultRow>& rows,
                            const std::string& axis = "", const std::vector<double>& values = {});

/// Drops cached reference posteriors (they are keyed by data seed).
void clear_reference_cache();

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wcmc
