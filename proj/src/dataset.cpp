#include "wcmc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "wcmc/normal.hpp"

namespace wcmc {

void LabeledDataset::validate() const {
  if (static_cast<std::size_t>(covariates.rows()) != labels.size()) {
    throw DimensionError("dataset: " + std::to_string(covariates.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  for (auto v : labels) {
    if (v > 1) throw std::invalid_argument("dataset: labels must be 0 or 1");
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), covariates.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.covariates.row(static_cast<Eigen::Index>(i)) = covariates.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  out.provenance = provenance;
  return out;
}

LabeledDataset gen_probit_data(std::size_t n, const Vector& theta_star, Rng& rng) {
  const auto d = theta_star.size();
  if (d < 1) throw DimensionError("gen_probit_data: empty parameter");
  LabeledDataset out;
  out.covariates.resize(static_cast<Eigen::Index>(n), d);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < d; ++j) out.covariates(r, j) = rng.normal();
    const double p = normal::cdf(out.covariates.row(r).dot(theta_star));
    out.labels[i] = rng.uniform() < p ? 1 : 0;
  }
  out.provenance = "synthetic probit, N=" + std::to_string(n);
  return out;
}

Vector default_probit_theta() {
  Vector t(5);
  t << 0.1103, -0.5832, 0.6417, 1.8279, 0.4968;
  return t;
}

std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  if (weights.empty()) throw std::invalid_argument("apportion: no weights");
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw std::invalid_argument("apportion: weights must have a positive sum");
  std::vector<std::size_t> out(weights.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] < 0.0) throw std::invalid_argument("apportion: negative weight");
    const double exact = static_cast<double>(total) * weights[k] / sum;
    out[k] = static_cast<std::size_t>(std::floor(exact));
    used += out[k];
    rema.emplace_back(exact - std::floor(exact), k);
  }
  // Largest remainders first; ties go to the lower index.
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < total; ++i, ++used) ++out[rema[i % rema.size()].second];
  return out;
}

std::vector<std::vector<std::size_t>> partition_indices(const LabeledDataset& data, int workers,
                                                        const PartitionRule& rule) {
  data.validate();
  if (workers < 1) throw std::invalid_argument("partition: K must be positive");
  if (data.size() < static_cast<std::size_t>(workers)) {
    throw std::invalid_argument("partition: fewer data points than workers");
  }
  const auto k = static_cast<std::size_t>(workers);
  std::vector<std::vector<std::size_t>> shards(k);

  if (rule.kind == PartitionRule::Kind::Equal) {
    const auto sizes = apportion(data.size(), std::vector<double>(k, 1.0));
    std::size_t next = 0;
    for (std::size_t w = 0; w < k; ++w) {
      for (std::size_t i = 0; i < sizes[w]; ++i) shards[w].push_back(next++);
    }
    return shards;
  }

  if (!(rule.zeta >= 0.0)) throw std::invalid_argument("partition: zeta must be non-negative");
  std::vector<std::size_t> ones, zeros;
  for (std::size_t i = 0; i < data.size(); ++i) (data.labels[i] ? ones : zeros).push_back(i);
  std::vector<double> w1(k), w0(k);
  for (std::size_t w = 0; w < k; ++w) {
    w1[w] = 1.0 / std::pow(static_cast<double>(w + 1), rule.zeta);
    w0[w] = 1.0 / std::pow(static_cast<double>(k - w), rule.zeta);
  }
  const auto n1 = apportion(ones.size(), w1);
  const auto n0 = apportion(zeros.size(), w0);
  std::size_t a = 0, b = 0;
  for (std::size_t w = 0; w < k; ++w) {
    for (std::size_t i = 0; i < n1[w]; ++i) shards[w].push_back(ones[a++]);
    for (std::size_t i = 0; i < n0[w]; ++i) shards[w].push_back(zeros[b++]);
    std::sort(shards[w].begin(), shards[w].end());
    if (shards[w].empty()) {
      throw std::invalid_argument("partition: worker " + std::to_string(w + 1) +
                                  " received no data at zeta=" + std::to_string(rule.zeta) +
                                  "; lower zeta or K, or use more data");
    }
  }
  return shards;
}

std::vector<LabeledDataset> partition(const LabeledDataset& data, int workers,
                                      const PartitionRule& rule) {
  std::vector<LabeledDataset> out;
  for (const auto& rows : partition_indices(data, workers, rule)) out.push_back(data.subset(rows));
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

double parse_number(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  if (t.empty()) throw CsvError(where + ": empty field");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw CsvError(where + ": '" + t + "' is not a finite number");
  }
  return v;
}

}  // namespace

CsvIngestResult ingest_csv_stream(std::istream& in, const std::string& label_column,
                                  std::optional<int> pca_dim, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(source_name + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == label_column) label_idx = i;
  }
  if (label_idx == header.size()) {
    throw CsvError(source_name + ": no column named '" + label_column + "'");
  }
  if (header.size() < 2) throw CsvError(source_name + ": need at least one covariate column");

  std::vector<std::vector<double>> rows;
  std::vector<std::uint8_t> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    const std::string where = source_name + " line " + std::to_string(lineno);
    if (cells.size() != header.size()) {
      throw CsvError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                     std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double v = parse_number(cells[i], where);
      if (i == label_idx) {
        if (v != 0.0 && v != 1.0) throw CsvError(where + ": label must be 0 or 1");
        labels.push_back(v == 1.0 ? 1 : 0);
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError(source_name + ": no data rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows[0].size());
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[i][j];
  }
  // Standardize with population moments; constant columns are only centred.
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(n));
    if (sd > 0.0) x.col(j) /= sd;
  }

  CsvIngestResult res;
  if (pca_dim && *pca_dim != d) {
    if (*pca_dim < 1 || *pca_dim > d) {
      throw std::invalid_argument("ingest_csv: PCA dimension must be in [1, " + std::to_string(d) + "]");
    }
    const Matrix cov = x.transpose() * x / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
    // Eigenvalues ascending: keep the last pca_dim, largest first.
    const Matrix basis = eig.eigenvectors().rightCols(*pca_dim).rowwise().reverse();
    const double total = eig.eigenvalues().cwiseMax(0.0).sum();
    const double kept = eig.eigenvalues().tail(*pca_dim).cwiseMax(0.0).sum();
    res.explained_variance_ratio = total > 0.0 ? kept / total : 1.0;
    x = x * basis;
  }
  res.data.covariates = std::move(x);
  res.data.labels = std::move(labels);
  res.data.provenance = source_name;
  return res;
}

CsvIngestResult ingest_csv(const std::string& path, const std::string& label_column,
                           std::optional<int> pca_dim) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path);
  return ingest_csv_stream(in, label_column, pca_dim, path);
}

void write_csv(const LabeledDataset& data, std::ostream& out) {
  data.validate();
  for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) out << "x" << (j + 1) << ',';
  out << "label\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.covariates.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) out << data.covariates(i, j) << ',';
    out << static_cast<int>(data.labels[static_cast<std::size_t>(i)]) << '\n';
  }
}

}  // namespace wcmc
