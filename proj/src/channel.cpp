#include "wcmc/channel.hpp"

#include <cmath>

namespace wcmc {

ChannelKind parse_channel_kind(const std::string& name) {
  if (name == "identity") return ChannelKind::Identity;
  if (name == "iid-gaussian") return ChannelKind::IidGaussian;
  throw std::invalid_argument("unknown channel kind '" + name +
                              "' (expected identity or iid-gaussian)");
}

std::string to_string(ChannelKind kind) {
  return kind == ChannelKind::Identity ? "identity" : "iid-gaussian";
}

void ChannelModel::validate(int d) const {
  if (!(m_t >= m_r && m_r >= d && d >= 1)) {
    throw DimensionError("channel: need m_t >= m_r >= d, got m_t=" + std::to_string(m_t) +
                         " m_r=" + std::to_string(m_r) + " d=" + std::to_string(d));
  }
  if (kind == ChannelKind::Identity && m_t != m_r) {
    throw DimensionError("channel: identity channel must be square");
  }
  if (kind == ChannelKind::IidGaussian && m_t - m_r - 1 <= 0) {
    throw DimensionError("channel: iid-gaussian needs m_t >= m_r + 2 for a finite mean inverse gram");
  }
}

Matrix ChannelModel::draw(Rng& rng) const {
  if (kind == ChannelKind::Identity) return Matrix::Identity(m_r, m_t);
  Matrix h(m_r, m_t);
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, j) = rng.normal();
  }
  return h;
}

Matrix ChannelModel::mean_inverse_gram() const {
  if (kind == ChannelKind::Identity) return Matrix::Identity(m_r, m_r);
  // Inverse-Wishart mean.
  return Matrix::Identity(m_r, m_r) / static_cast<double>(m_t - m_r - 1);
}

ChannelModel ChannelModel::identity(int dim) { return {ChannelKind::Identity, dim, dim, true}; }

ChannelModel ChannelModel::iid_gaussian(int m_r, int m_t) {
  return {ChannelKind::IidGaussian, m_r, m_t, true};
}

Matrix repetition_encoding(int d, int repetitions, double power) {
  if (d < 1 || repetitions < 1) throw DimensionError("repetition_encoding: bad shape");
  if (!(power >= 0.0)) throw std::invalid_argument("repetition_encoding: negative power");
  Matrix e(d * repetitions, d);
  for (int r = 0; r < repetitions; ++r) e.middleRows(r * d, d) = Matrix::Identity(d, d);
  return std::sqrt(power) * e;
}

double noise_for_snr(double power, double snr_db, int dims) {
  return power / (static_cast<double>(dims) * std::pow(10.0, snr_db / 10.0));
}

double power_scale(const Samples& thetas, const Matrix& mean_inverse_gram, int repetitions,
                   double power) {
  if (thetas.cols() < 1) throw std::invalid_argument("power_scale: no samples");
  const int d = static_cast<int>(thetas.rows());
  if (mean_inverse_gram.rows() != d * repetitions || mean_inverse_gram.cols() != d * repetitions) {
    throw DimensionError("power_scale: gram is " + shape_of(mean_inverse_gram) + ", expected " +
                         std::to_string(d * repetitions) + " square");
  }
  // tr(G R theta theta^T R^T) = theta^T (R^T G R) theta with R = 1_l kron I_d.
  const Matrix r = repetition_encoding(d, repetitions, 1.0);
  const Matrix folded = r.transpose() * mean_inverse_gram * r;
  const double total = (thetas.array() * (folded * thetas).array()).sum();
  if (!(total > 0.0)) throw std::invalid_argument("power_scale: samples are all zero");
  return power * static_cast<double>(thetas.cols()) / total;
}

Vector precode(const Vector& theta, const Matrix& h, const Matrix& e) {
  if (e.cols() != theta.size() || e.rows() != h.rows()) {
    throw DimensionError("precode: H " + shape_of(h) + ", E " + shape_of(e) + ", theta " +
                         std::to_string(theta.size()));
  }
  return zf_pseudoinverse(h) * (e * theta);
}

PowerCheck verify_power(const Samples& x, double power) {
  if (x.cols() == 0) return {true, 0.0};
  const double avg = x.colwise().squaredNorm().mean();
  return {avg <= power * (1.0 + 1e-6), avg};
}

namespace {

void add_noise(Samples& y, double n0, Rng& rng) {
  if (n0 < 0.0) throw std::invalid_argument("transmit: N0 must be non-negative");
  if (n0 == 0.0) return;
  const double sd = std::sqrt(n0);
  for (Eigen::Index s = 0; s < y.cols(); ++s) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, s) += sd * rng.normal();
  }
}

double audit_power(const Samples& theta, const Matrix& e, const ChannelModel& channel, Rng& rng) {
  const Samples signal = e * theta;
  if (channel.kind == ChannelKind::Identity) return signal.colwise().squaredNorm().mean();
  double acc = 0.0;
  Matrix pinv;
  for (Eigen::Index s = 0; s < theta.cols(); ++s) {
    if (s == 0 || channel.redraw) pinv = zf_pseudoinverse(channel.draw(rng));
    acc += (pinv * signal.col(s)).squaredNorm();
  }
  return acc / static_cast<double>(theta.cols());
}

}  // namespace

Transmission transmit_oma(const std::vector<Samples>& thetas, const ChannelModel& channel,
                          const std::vector<Matrix>& encodings, double n0, Rng& rng) {
  if (thetas.size() != encodings.size() || thetas.empty()) {
    throw DimensionError("transmit_oma: need one encoding per worker");
  }
  Transmission out;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    const Matrix& e = encodings[k];
    channel.validate(static_cast<int>(thetas[k].rows()));
    if (e.rows() != channel.m_r || e.cols() != thetas[k].rows()) {
      throw DimensionError("transmit_oma: encoding " + shape_of(e) + " does not fit channel");
    }
    if (k > 0 && thetas[k].cols() != thetas[0].cols()) {
      throw DimensionError("transmit_oma: workers sent different numbers of blocks");
    }
    Samples y = e * thetas[k];
    add_noise(y, n0, rng);
    out.received.push_back(std::move(y));
  }
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    out.transmit_power.push_back(audit_power(thetas[k], encodings[k], channel, rng));
  }
  return out;
}

Transmission transmit_noma(const std::vector<Samples>& thetas, const ChannelModel& channel,
                           const Matrix& encoding, double n0, Rng& rng) {
  if (thetas.empty()) throw DimensionError("transmit_noma: no workers");
  channel.validate(static_cast<int>(thetas[0].rows()));
  if (encoding.rows() != channel.m_r || encoding.cols() != thetas[0].rows()) {
    throw DimensionError("transmit_noma: encoding " + shape_of(encoding) + " does not fit channel");
  }
  Samples sum = Samples::Zero(thetas[0].rows(), thetas[0].cols());
  for (const Samples& t : thetas) {
    if (t.rows() != sum.rows() || t.cols() != sum.cols()) {
      throw DimensionError("transmit_noma: workers sent mismatched blocks");
    }
    sum += t;
  }
  Transmission out;
  Samples y = encoding * sum;
  add_noise(y, n0, rng);
  out.received.push_back(std::move(y));
  for (const Samples& t : thetas) {
    out.transmit_power.push_back(audit_power(t, encoding, channel, rng));
  }
  return out;
}

}  // namespace wcmc
