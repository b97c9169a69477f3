#include "wcmc/aggregators.hpp"

#include <cmath>

namespace wcmc {

namespace {

constexpr double kRidgeRatio = 1e-8;

Matrix inverse_spd(const Matrix& a) {
  const Matrix r = regularize_covariance(a);
  Eigen::LLT<Matrix> llt(r);
  if (llt.info() != Eigen::Success) throw std::domain_error("aggregator: covariance not invertible");
  Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

void check_square_family(const std::vector<Matrix>& covs, const char* what) {
  if (covs.empty()) throw std::invalid_argument(std::string(what) + ": no workers");
  for (const Matrix& c : covs) {
    if (c.rows() != covs.front().rows() || c.cols() != c.rows()) {
      throw DimensionError(std::string(what) + ": covariances must share one square shape");
    }
  }
}

}  // namespace

std::string to_string(AccessMode mode) { return mode == AccessMode::Oma ? "oma" : "noma"; }

void WeightSet::validate(const std::vector<Samples>& received) const {
  if (w.empty()) throw DimensionError("weights: empty weight set");
  if (mode == AccessMode::Noma && (w.size() != 1 || received.size() != 1)) {
    throw DimensionError("weights: NOMA uses one weight matrix and one received stream");
  }
  if (w.size() != received.size()) {
    throw DimensionError("weights: " + std::to_string(w.size()) + " matrices for " +
                         std::to_string(received.size()) + " received streams");
  }
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k].rows() != w.front().rows() || w[k].cols() != received[k].rows() ||
        received[k].cols() != received.front().cols()) {
      throw DimensionError("weights: W_" + std::to_string(k) + " is " + shape_of(w[k]) +
                           " but the stream is " + shape_of(received[k]));
    }
  }
  if (offset.size() != 0 && offset.size() != w.front().rows()) {
    throw DimensionError("weights: offset length does not match d");
  }
}

Samples apply_weights(const WeightSet& weights, const std::vector<Samples>& received) {
  weights.validate(received);
  Samples out = weights.w[0] * received[0];
  for (std::size_t k = 1; k < weights.w.size(); ++k) out.noalias() += weights.w[k] * received[k];
  if (weights.offset.size() != 0) out.colwise() += weights.offset;
  return out;
}

Matrix regularize_covariance(const Matrix& c) {
  const Matrix sym = require_symmetric(c, "regularize_covariance");
  if (eigen_ratio(sym) >= kRidgeRatio) return sym;
  const double tr = sym.trace();
  if (!(tr > 0.0)) throw std::domain_error("aggregator: covariance estimate is identically zero");
  Matrix out = sym;
  out.diagonal().array() += kRidgeRatio * tr / static_cast<double>(sym.rows());
  return out;
}

std::vector<Matrix> gcmc_weights_from_cov(const std::vector<Matrix>& covs) {
  check_square_family(covs, "gcmc_weights");
  std::vector<Matrix> inv;
  Matrix info = Matrix::Zero(covs[0].rows(), covs[0].cols());
  for (const Matrix& c : covs) {
    inv.push_back(inverse_spd(c));
    info += inv.back();
  }
  const Matrix total = inverse_spd(info);
  std::vector<Matrix> out;
  for (const Matrix& ci : inv) out.push_back(total * ci);
  return out;
}

std::vector<Matrix> gcmc_weights(const std::vector<Samples>& samples) {
  std::vector<Matrix> covs;
  for (const Samples& s : samples) covs.push_back(sample_covariance(s));
  return gcmc_weights_from_cov(covs);
}

std::vector<Matrix> wgcmc_oma_from_cov(const std::vector<Matrix>& covs,
                                       const std::vector<double>& powers, double n0) {
  check_square_family(covs, "wgcmc_oma");
  if (powers.size() != covs.size()) throw DimensionError("wgcmc_oma: one power per worker");
  const auto d = covs[0].rows();
  std::vector<Matrix> reg;
  Matrix info = Matrix::Zero(d, d);
  for (const Matrix& c : covs) {
    reg.push_back(regularize_covariance(c));
    info += inverse_spd(reg.back());
  }
  const Matrix total = inverse_spd(info);
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < reg.size(); ++k) {
    if (!(powers[k] > 0.0)) throw std::invalid_argument("wgcmc_oma: P_k must be positive");
    Matrix received_cov = powers[k] * reg[k];
    received_cov.diagonal().array() += n0;
    out.push_back(total * psd_inv_sqrt(reg[k]) * psd_inv_sqrt(received_cov));
  }
  return out;
}

Matrix wgcmc_noma_from_cov(const Matrix& c0, int workers, double min_power, double n0) {
  if (workers < 1) throw std::invalid_argument("wgcmc_noma: K must be positive");
  if (!(min_power > 0.0)) throw std::invalid_argument("wgcmc_noma: min P_k must be positive");
  const Matrix reg = regularize_covariance(c0);
  Matrix received_cov = workers * min_power * reg;
  received_cov.diagonal().array() += n0;
  return psd_sqrt(reg) * psd_inv_sqrt(received_cov) / std::sqrt(static_cast<double>(workers));
}

Matrix noisy_covariance_estimate(const Samples& y, double power, double n0) {
  if (!(power > 0.0)) throw std::invalid_argument("covariance estimate: power must be positive");
  Matrix c = sample_covariance(y);
  c.diagonal().array() -= n0;
  return positive_part(c) / power;
}

Matrix repetition_average(int d, int repetitions) {
  Matrix a(d, d * repetitions);
  for (int r = 0; r < repetitions; ++r) a.middleCols(r * d, d) = Matrix::Identity(d, d);
  return a / static_cast<double>(repetitions);
}

WeightSet fit_gcmc(const std::vector<Samples>& received, const std::vector<Matrix>& encodings,
                   const AggregationOptions&) {
  if (received.size() != encodings.size()) throw DimensionError("gcmc: one encoding per worker");
  std::vector<Matrix> decoders;
  std::vector<Samples> decoded;
  for (std::size_t k = 0; k < received.size(); ++k) {
    decoders.push_back(pseudoinverse(encodings[k]));
    decoded.push_back(decoders.back() * received[k]);
  }
  const std::vector<Matrix> w = gcmc_weights(decoded);
  WeightSet out{AccessMode::Oma, {}, Vector()};
  for (std::size_t k = 0; k < w.size(); ++k) out.w.push_back(w[k] * decoders[k]);
  return out;
}

WeightSet fit_wgcmc_oma(const std::vector<Samples>& received, const std::vector<double>& powers,
                        double n0, const AggregationOptions& opts) {
  if (received.empty() || received.size() != powers.size()) {
    throw DimensionError("wgcmc_oma: one power per received stream");
  }
  const int l = opts.repetitions;
  const int d = static_cast<int>(received[0].rows()) / l;
  if (d * l != received[0].rows()) throw DimensionError("wgcmc_oma: m_r is not l*d");
  const Matrix avg = repetition_average(d, l);
  // Averaging l copies leaves noise of variance N0 / l per entry.
  const double n0_eff = n0 / l;

  std::vector<Samples> folded;
  std::vector<Matrix> covs;
  for (std::size_t k = 0; k < received.size(); ++k) {
    folded.push_back(avg * received[k]);
    covs.push_back(noisy_covariance_estimate(folded.back(), powers[k], n0_eff));
  }
  const std::vector<Matrix> w = wgcmc_oma_from_cov(covs, powers, n0_eff);

  WeightSet out{AccessMode::Oma, {}, Vector()};
  for (const Matrix& wk : w) out.w.push_back(wk * avg);
  if (opts.recenter) {
    // Consensus mean from the noisy covariance estimates, GCMC style.
    const std::vector<Matrix> g = gcmc_weights_from_cov(covs);
    Vector mu = Vector::Zero(d);
    Vector applied = Vector::Zero(d);
    for (std::size_t k = 0; k < folded.size(); ++k) {
      const Vector ybar = folded[k].rowwise().mean();
      mu += g[k] * ybar / std::sqrt(powers[k]);
      applied += w[k] * ybar;
    }
    out.offset = mu - applied;
  }
  return out;
}

WeightSet fit_wgcmc_noma(const Samples& received, int workers, double min_power, double n0,
                         const AggregationOptions& opts) {
  const int l = opts.repetitions;
  const int d = static_cast<int>(received.rows()) / l;
  if (d * l != received.rows()) throw DimensionError("wgcmc_noma: m_r is not l*d");
  const Matrix avg = repetition_average(d, l);
  const double n0_eff = n0 / l;
  const Samples folded = avg * received;
  const Matrix c0 = noisy_covariance_estimate(folded, workers * min_power, n0_eff);
  const Matrix w = wgcmc_noma_from_cov(c0, workers, min_power, n0_eff);

  WeightSet out{AccessMode::Noma, {w * avg}, Vector()};
  if (opts.recenter) {
    const Vector ybar = folded.rowwise().mean();
    out.offset = ybar / (workers * std::sqrt(min_power)) - w * ybar;
  }
  return out;
}

}  // namespace wcmc
