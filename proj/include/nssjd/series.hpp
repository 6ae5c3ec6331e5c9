// Time-major series container plus CSV ingestion/emission.
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace nssjd {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A T x p real matrix of observations or sources; rows are time instants.
struct SeriesMatrix {
  Eigen::MatrixXd values;

  int t_len() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }

  // Validates finiteness and non-emptiness.
  static SeriesMatrix from(Eigen::MatrixXd m);
};

// Expected layout: header `t,series_1,...,series_p`, numeric body, strictly
// increasing t column. Errors carry the offending row (1-based, body rows).
SeriesMatrix load_series_csv(const std::string& path);

// Emits the canonical form: regenerated t column 1..T, values at 17
// significant digits. Only row order is meaningful; t values are not.
void write_series_csv(const SeriesMatrix& series, const std::string& path);

// Headerless rectangular numeric CSV, used for unmixing/mixing matrices.
Eigen::MatrixXd load_matrix_csv(const std::string& path);
void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);

// Shortest-round-trip style formatting used by every CSV writer (17
// significant digits).
std::string format_double(double v);

}  // namespace nssjd
