#include "kinv/history.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "kinv/errors.hpp"
#include "kinv/numeric_io.hpp"

namespace kinv {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

int parse_int(const std::string& s) {
  const double v = parse_double(s);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) throw Error(ErrorKind::IoError, "not an integer: " + s);
  return i;
}

}  // namespace

void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& records) {
  if (records.empty()) return;
  const auto n = records.front().belief.dim();
  out << "iter";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",m_" << i;
  out << ",cov_frobenius,optimization_error,forward_evals\n";
  for (const auto& r : records) {
    out << r.iteration;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(r.belief.mean()(i));
    out << ',' << format_double(r.cov_frobenius) << ',' << format_double(r.optimization_error)
        << ',' << r.forward_evaluations << '\n';
  }
}

std::vector<HistoryRow> read_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::IoError, "empty history");
  const auto header = split_csv(line);
  if (header.size() < 5 || header.front() != "iter" || header.back() != "forward_evals") {
    throw Error(ErrorKind::IoError, "unexpected history header");
  }
  const std::size_t n = header.size() - 4;
  std::vector<HistoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw Error(ErrorKind::IoError, "ragged history row");
    HistoryRow row;
    row.iteration = parse_int(f[0]);
    row.mean.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) row.mean(static_cast<Eigen::Index>(i)) = parse_double(f[1 + i]);
    row.cov_frobenius = parse_double(f[n + 1]);
    row.optimization_error = parse_double(f[n + 2]);
    row.forward_evaluations = parse_int(f[n + 3]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace kinv
