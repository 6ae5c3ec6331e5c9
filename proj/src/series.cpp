#include "nssjd/series.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace nssjd {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& cell, int row, const std::string& col) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw ParseError("row " + std::to_string(row) + ", column " + col +
                     ": non-numeric cell '" + cell + "'");
  }
  while (pos < cell.size() && (cell[pos] == ' ' || cell[pos] == '\t')) ++pos;
  if (pos != cell.size()) {
    throw ParseError("row " + std::to_string(row) + ", column " + col +
                     ": non-numeric cell '" + cell + "'");
  }
  if (!std::isfinite(v)) {
    throw ParseError("row " + std::to_string(row) + ", column " + col +
                     ": non-finite value '" + cell + "'");
  }
  return v;
}

}  // namespace

SeriesMatrix SeriesMatrix::from(Eigen::MatrixXd m) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw std::invalid_argument("series must have T >= 1 and p >= 1");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument("series contains non-finite entries");
  }
  return SeriesMatrix{std::move(m)};
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

SeriesMatrix load_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file '" + path + "'");
  const auto header = split_line(line);
  if (header.size() < 2 || header[0] != "t") {
    throw ParseError("malformed header: expected 't,series_1,...,series_p'");
  }
  const int p = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < p; ++j) {
    if (header[j + 1] != "series_" + std::to_string(j + 1)) {
      throw ParseError("malformed header: expected column 'series_" +
                       std::to_string(j + 1) + "', got '" + header[j + 1] + "'");
    }
  }

  std::vector<std::vector<double>> rows;
  double prev_t = 0;
  int row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty() && in.eof()) break;
    ++row_no;
    const auto cells = split_line(line);
    if (static_cast<int>(cells.size()) != p + 1) {
      throw ParseError("row " + std::to_string(row_no) + ": expected " +
                       std::to_string(p + 1) + " cells, got " +
                       std::to_string(cells.size()));
    }
    const double t = parse_cell(cells[0], row_no, "t");
    if (row_no > 1 && t <= prev_t) {
      throw ParseError("row " + std::to_string(row_no) +
                       ": t not strictly increasing");
    }
    prev_t = t;
    std::vector<double> vals(p);
    for (int j = 0; j < p; ++j) {
      vals[j] = parse_cell(cells[j + 1], row_no, header[j + 1]);
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError("no observations in '" + path + "'");

  Eigen::MatrixXd m(static_cast<int>(rows.size()), p);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < p; ++j) m(i, j) = rows[i][j];
  }
  return SeriesMatrix{std::move(m)};
}

void write_series_csv(const SeriesMatrix& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "t";
  for (int j = 0; j < series.dim(); ++j) out << ",series_" << (j + 1);
  out << "\n";
  for (int i = 0; i < series.t_len(); ++i) {
    out << (i + 1);
    for (int j = 0; j < series.dim(); ++j) {
      out << "," << format_double(series.values(i, j));
    }
    out << "\n";
  }
}

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row_no;
    const auto cells = split_line(line);
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      vals.push_back(parse_cell(cells[j], row_no, "col_" + std::to_string(j + 1)));
    }
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw ParseError("row " + std::to_string(row_no) + ": ragged row");
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError("no rows in '" + path + "'");
  Eigen::MatrixXd m(static_cast<int>(rows.size()),
                    static_cast<int>(rows.front().size()));
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      out << format_double(m(i, j));
    }
    out << "\n";
  }
}

}  // namespace nssjd
