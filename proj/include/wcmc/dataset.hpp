#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wcmc/matops.hpp"
#include "wcmc/rng.hpp"

namespace wcmc {

/// Binary-labelled covariates, one row per data point.
struct LabeledDataset {
  Matrix covariates;                 // N x d
  std::vector<std::uint8_t> labels;  // values in {0, 1}
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(covariates.cols()); }

  /// Throws if shapes disagree or a label is not 0/1.
  void validate() const;

  LabeledDataset subset(const std::vector<std::size_t>& rows) const;
};

/// Covariates u_n ~ N(0, I_d), labels v_n ~ Bernoulli(Phi(theta^T u_n)).
LabeledDataset gen_probit_data(std::size_t n, const Vector& theta_star, Rng& rng);

/// Default ground-truth parameter of the synthetic probit experiments.
Vector default_probit_theta();

struct PartitionRule {
  enum class Kind { Equal, Heterogeneous } kind = Kind::Equal;
  double zeta = 0.0;
};

/// Disjoint cover of the data set by K shards, returned as row indices.
/// Heterogeneous rule: worker k (1-based) receives fraction
/// (1/k^zeta) / sum_j 1/j^zeta of class-1 points and
/// (1/(K-k+1)^zeta) / sum_j 1/j^zeta of class-0 points, rounded by the
/// largest-remainder method.
std::vector<std::vector<std::size_t>> partition_indices(const LabeledDataset& data, int workers,
                                                        const PartitionRule& rule);

std::vector<LabeledDataset> partition(const LabeledDataset& data, int workers,
                                      const PartitionRule& rule);

/// Largest-remainder apportionment of `total` items by non-negative weights.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights);

struct CsvIngestResult {
  LabeledDataset data;
  /// Fraction of the standardized covariance captured by the kept components
  /// (1 when no projection was applied).
  double explained_variance_ratio = 1.0;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a header-row, comma-separated numeric CSV. Covariates are
/// standardized (population moments) and optionally projected onto the top
/// `pca_dim` principal components.
CsvIngestResult ingest_csv(const std::string& path, const std::string& label_column,
                           std::optional<int> pca_dim = std::nullopt);

CsvIngestResult ingest_csv_stream(std::istream& in, const std::string& label_column,
                                  std::optional<int> pca_dim, const std::string& source_name);

void write_csv(const LabeledDataset& data, std::ostream& out);

}  // namespace wcmc
