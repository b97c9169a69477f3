#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "wcmc/channel.hpp"

using namespace wcmc;
using namespace wcmc::testing;

TEST_SUITE("channel") {

TEST_CASE("channel model validation and names") {
  CHECK_NOTHROW(ChannelModel::identity(5).validate(5));
  CHECK_THROWS(ChannelModel::identity(4).validate(5));
  CHECK_NOTHROW(ChannelModel::iid_gaussian(10, 12).validate(5));
  CHECK_THROWS(ChannelModel::iid_gaussian(10, 9).validate(5));
  CHECK(parse_channel_kind(to_string(ChannelKind::IidGaussian)) == ChannelKind::IidGaussian);
  CHECK(parse_channel_kind(to_string(ChannelKind::Identity)) == ChannelKind::Identity);
  CHECK_THROWS(parse_channel_kind("rayleigh-ish"));
}

TEST_CASE("repetition encoding and SNR") {
  const Matrix e = repetition_encoding(2, 3, 4.0);
  CHECK(e.rows() == 6);
  CHECK(e.cols() == 2);
  for (int r = 0; r < 3; ++r) {
    CHECK(max_abs(e.block(2 * r, 0, 2, 2) - 2.0 * Matrix::Identity(2, 2)) == 0.0);
  }
  // SNR = P / (dims N0)
  CHECK(noise_for_snr(10.0, 10.0, 5) == doctest::Approx(0.2));
  CHECK(noise_for_snr(5.0, 0.0, 10) == doctest::Approx(0.5));
}

TEST_CASE("power scale") {
  // l = 2, identity gram, sum ||theta||^2 = S
  Samples th = Samples::Zero(3, 4);
  th.row(0).setOnes();
  CHECK(power_scale(th, Matrix::Identity(6, 6), 2, 7.0) == doctest::Approx(3.5));

  // brute-force trace oracle with a general PSD gram
  Rng rng(61);
  const Matrix g = random_spd(6, rng);
  const Samples x = random_matrix(3, 9, rng);
  const Matrix r = repetition_encoding(3, 2, 1.0);
  double total = 0.0;
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    const Vector v = x.col(s);
    total += (g * r * v * v.transpose() * r.transpose()).trace();
  }
  CHECK(power_scale(x, g, 2, 5.0) == doctest::Approx(5.0 * 9 / total).epsilon(1e-12));
  CHECK_THROWS(power_scale(Samples::Zero(3, 4), Matrix::Identity(6, 6), 2, 1.0));
}

TEST_CASE("zero-forcing precoding") {
  Vector th(2);
  th << 1.0, -3.0;
  CHECK(max_abs(precode(th, Matrix::Identity(2, 2), Matrix::Identity(2, 2)) - th) < 1e-15);
  const Matrix h = 2.0 * Matrix::Identity(2, 2);
  const Vector x = precode(th, h, Matrix::Identity(2, 2));
  CHECK(max_abs(x - 0.5 * th) < 1e-15);
  CHECK(max_abs(h * x - th) < 1e-15);

  Rng rng(62);
  const ChannelModel ch = ChannelModel::iid_gaussian(10, 12);
  const Matrix e = repetition_encoding(5, 2, 3.0);
  for (int block = 0; block < 50; ++block) {
    const Matrix hk = ch.draw(rng);
    const Vector t = random_vector(5, rng);
    CHECK((hk * precode(t, hk, e) - e * t).norm() < 1e-9);
  }
}

TEST_CASE("mean inverse gram of iid channels") {
  const ChannelModel ch = ChannelModel::iid_gaussian(10, 12);
  CHECK(max_abs(ch.mean_inverse_gram() - Matrix::Identity(10, 10)) == 0.0);
  // Monte Carlo: the trace average is the stable summary at one degree of freedom
  Rng rng(63);
  double tr = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Matrix h = ch.draw(rng);
    tr += (h * h.transpose()).inverse().trace() / 10.0;
  }
  CHECK(std::abs(tr / n - 1.0) < 0.05);
  CHECK(max_abs(ChannelModel::identity(4).mean_inverse_gram() - Matrix::Identity(4, 4)) == 0.0);
}

TEST_CASE("OMA transmission") {
  Rng rng(64);
  const ChannelModel ch = ChannelModel::identity(4);
  std::vector<Samples> th{random_matrix(2, 30, rng), random_matrix(2, 30, rng)};
  std::vector<Matrix> enc{repetition_encoding(2, 2, 1.5), repetition_encoding(2, 2, 0.5)};
  const Transmission clean = transmit_oma(th, ch, enc, 0.0, rng);
  for (int k = 0; k < 2; ++k) CHECK(max_abs(clean.received[k] - enc[k] * th[k]) < 1e-15);

  Rng a(65), b(65);
  CHECK(transmit_oma(th, ch, enc, 0.3, a).received[1] == transmit_oma(th, ch, enc, 0.3, b).received[1]);
}

TEST_CASE("OMA noise variance and independence across workers") {
  Rng rng(66);
  const int s = 25000;
  const ChannelModel ch = ChannelModel::identity(4);
  std::vector<Samples> zero(2, Samples::Zero(4, s));
  std::vector<Matrix> enc(2, Matrix::Identity(4, 4));
  const double n0 = 0.7;
  const Transmission t = transmit_oma(zero, ch, enc, n0, rng);
  const auto& y0 = t.received[0].array();
  const auto& y1 = t.received[1].array();
  const double count = 4.0 * s;
  CHECK(std::abs(y0.square().sum() / count - n0) < 0.02);
  const double corr = (y0 * y1).sum() / count / n0;
  CHECK(std::abs(corr) < 3.0 / std::sqrt(count));
}

TEST_CASE("NOMA transmission") {
  Rng rng(67);
  const ChannelModel ch = ChannelModel::identity(3);
  std::vector<Samples> th{random_matrix(3, 10, rng), random_matrix(3, 10, rng), random_matrix(3, 10, rng)};
  const Transmission t = transmit_noma(th, ch, Matrix::Identity(3, 3), 0.0, rng);
  REQUIRE(t.received.size() == 1);
  CHECK(max_abs(t.received[0] - (th[0] + th[1] + th[2])) < 1e-14);

  // one worker: same law (here, same stream) as OMA
  const Matrix e = repetition_encoding(3, 1, 2.0);
  Rng a(68), b(68);
  const Transmission n1 = transmit_noma({th[0]}, ch, e, 0.4, a);
  const Transmission o1 = transmit_oma({th[0]}, ch, {e}, 0.4, b);
  CHECK(n1.received[0] == o1.received[0]);

  Rng c(69);
  const Transmission noise = transmit_noma({Samples::Zero(3, 30000)}, ch, e, 0.25, c);
  CHECK(std::abs(noise.received[0].array().square().mean() - 0.25) < 0.01);
}

TEST_CASE("power audit") {
  CHECK(verify_power(Samples::Zero(3, 0), 1.0).ok);
  Samples x = Samples::Zero(2, 2);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;
  CHECK(verify_power(x, 1.0).ok);
  CHECK(verify_power(x, 1.0).average == doctest::Approx(1.0));
  CHECK_FALSE(verify_power(2.0 * x, 1.0).ok);

  // OMA meets P with equality through its own power scale (identity channels)
  Rng rng(70);
  const int d = 3, l = 2;
  const double power = 4.0;
  const ChannelModel ch = ChannelModel::identity(d * l);
  std::vector<Samples> th;
  std::vector<Matrix> enc;
  for (int k = 0; k < 4; ++k) {
    th.push_back((k + 1.0) * random_matrix(d, 200, rng));
    enc.push_back(repetition_encoding(d, l, power_scale(th.back(), ch.mean_inverse_gram(), l, power)));
  }
  const Transmission t = transmit_oma(th, ch, enc, 0.1, rng);
  for (double p : t.transmit_power) CHECK(std::abs(p / power - 1.0) < 1e-6);

  // NOMA with the weakest worker's scale never exceeds P
  double pmin = 1e300;
  for (const Samples& s : th) pmin = std::min(pmin, power_scale(s, ch.mean_inverse_gram(), l, power));
  const Transmission n = transmit_noma(th, ch, repetition_encoding(d, l, pmin), 0.1, rng);
  for (double p : n.transmit_power) CHECK(p <= power * (1.0 + 1e-6));
}

}  // TEST_SUITE
