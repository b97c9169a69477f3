#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wcmc/experiment.hpp"

namespace wcmc {

struct SummaryRow {
  std::string scheme;
  double snr_db = 0.0;
  std::size_t blocks = 0;
  int workers = 0;
  double zeta = 0.0;
  std::size_t trials = 0;
  double err2_mean = 0.0;
  double err2_p5 = 0.0;
  double err2_p95 = 0.0;
  double kl_mean = 0.0;  // NaN when no row carries a KL value
};

/// Linear-interpolation percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

/// Groups rows by (scheme, snr, T, K, zeta), keeping first-seen order.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void print_summary(const std::vector<SummaryRow>& summary, std::ostream& out);

}  // namespace wcmc
