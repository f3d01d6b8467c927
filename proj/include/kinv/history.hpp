#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kinv/inversion.hpp"

namespace kinv {

/// One parsed row of history.csv.
struct HistoryRow {
  int iteration = 0;
  Vector mean;
  double cov_frobenius = 0.0;
  double optimization_error = 0.0;
  int forward_evaluations = 0;
};

/// Columns: iter, m_1..m_n, cov_frobenius, optimization_error, forward_evals.
/// Numbers use the shortest round-trip decimal form.
void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& records);
std::vector<HistoryRow> read_history_csv(std::istream& in);

}  // namespace kinv
