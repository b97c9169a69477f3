#pragma once

// Uncoded analog transmission with zero-forcing precoding. Received signals
// are simulated after channel inversion (E theta + n); channel matrices are
// still drawn per block so the transmit power can be audited.

#include <string>
#include <vector>

#include "wcmc/matops.hpp"
#include "wcmc/rng.hpp"

namespace wcmc {

enum class ChannelKind { Identity, IidGaussian };

ChannelKind parse_channel_kind(const std::string& name);
std::string to_string(ChannelKind kind);

struct ChannelModel {
  ChannelKind kind = ChannelKind::Identity;
  int m_r = 0;
  int m_t = 0;
  bool redraw = true;  // new H every block

  /// Throws unless m_t >= m_r >= d (and m_t == m_r for Identity).
  void validate(int d) const;
  Matrix draw(Rng& rng) const;
  /// E[(H H^T)^{-1}], analytic: I for Identity, I / (m_t - m_r - 1) for iid.
  Matrix mean_inverse_gram() const;

  static ChannelModel identity(int dim);
  static ChannelModel iid_gaussian(int m_r, int m_t);
};

/// sqrt(P) (1_l kron I_d).
Matrix repetition_encoding(int d, int repetitions, double power);

/// Noise variance giving SNR = P / (dims * N0) at `snr_db`.
double noise_for_snr(double power, double snr_db, int dims);

/// P S / sum_s tr(G (1_l kron I_d) theta theta^T (1_l kron I_d)^T).
double power_scale(const Samples& thetas, const Matrix& mean_inverse_gram, int repetitions,
                   double power);

/// x = H^+ E theta.
Vector precode(const Vector& theta, const Matrix& h, const Matrix& e);

struct PowerCheck {
  bool ok = true;
  double average = 0.0;
};

/// Average of ||x||^2 over the columns of x, compared against P (1 + 1e-6).
PowerCheck verify_power(const Samples& x, double power);

struct Transmission {
  /// OMA: K blocks of m_r x S; NOMA: a single m_r x S block.
  std::vector<Samples> received;
  /// Measured (1/S) sum_s ||x_k^(s)||^2 per worker.
  std::vector<double> transmit_power;
};

/// y_k = E_k theta_k + n_k, one independent noise vector per worker and block.
Transmission transmit_oma(const std::vector<Samples>& thetas, const ChannelModel& channel,
                          const std::vector<Matrix>& encodings, double n0, Rng& rng);

/// y = sum_k E theta_k + n with a shared E.
Transmission transmit_noma(const std::vector<Samples>& thetas, const ChannelModel& channel,
                           const Matrix& encoding, double n0, Rng& rng);

}  // namespace wcmc
