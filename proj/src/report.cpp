#include "wcmc/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <tuple>

namespace wcmc {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, double, std::size_t, int, double>;
  std::vector<Key> order;
  std::vector<std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    const Key k{r.scheme, r.snr_db, r.blocks, r.workers, r.zeta};
    auto it = std::find(order.begin(), order.end(), k);
    if (it == order.end()) {
      order.push_back(k);
      groups.emplace_back();
      it = order.end() - 1;
    }
    groups[static_cast<std::size_t>(it - order.begin())].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (std::size_t g = 0; g < order.size(); ++g) {
    SummaryRow s;
    std::tie(s.scheme, s.snr_db, s.blocks, s.workers, s.zeta) = order[g];
    std::vector<double> err;
    double kl = 0.0;
    int kl_n = 0;
    for (const ResultRow* r : groups[g]) {
      err.push_back(r->err2);
      if (!std::isnan(r->kl)) {
        kl += r->kl;
        ++kl_n;
      }
    }
    s.trials = err.size();
    double sum = 0.0;
    for (double e : err) sum += e;
    s.err2_mean = sum / static_cast<double>(err.size());
    s.err2_p5 = percentile(err, 0.05);
    s.err2_p95 = percentile(err, 0.95);
    s.kl_mean = kl_n > 0 ? kl / kl_n : std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(s));
  }
  return out;
}

void print_summary(const std::vector<SummaryRow>& summary, std::ostream& out) {
  out << std::left << std::setw(12) << "scheme" << std::right << std::setw(8) << "snr_db"
      << std::setw(8) << "T" << std::setw(5) << "K" << std::setw(7) << "zeta" << std::setw(7)
      << "n" << std::setw(13) << "err2_mean" << std::setw(13) << "err2_p5" << std::setw(13)
      << "err2_p95" << std::setw(13) << "kl_mean" << '\n';
  for (const auto& s : summary) {
    out << std::left << std::setw(12) << s.scheme << std::right << std::fixed
        << std::setprecision(1) << std::setw(8) << s.snr_db << std::setw(8) << s.blocks
        << std::setw(5) << s.workers << std::setprecision(2) << std::setw(7) << s.zeta
        << std::setw(7) << s.trials << std::scientific << std::setprecision(4) << std::setw(13)
        << s.err2_mean << std::setw(13) << s.err2_p5 << std::setw(13) << s.err2_p95;
    if (std::isnan(s.kl_mean)) {
      out << std::setw(13) << "-";
    } else {
      out << std::setw(13) << s.kl_mean;
    }
    out << std::defaultfloat << '\n';
  }
}

}  // namespace wcmc
