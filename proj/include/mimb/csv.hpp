#pragma once

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimb {

// Thrown for any malformed input file (missing, ragged, non-numeric).
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_cell(const std::string& cell, const std::string& path,
                         std::size_t row, std::size_t col) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw IoError(path + ": non-numeric cell at row " + std::to_string(row) +
                  ", column " + std::to_string(col) + ": '" + cell + "'");
  }
  while (pos < cell.size() &&
         (cell[pos] == ' ' || cell[pos] == '\t' || cell[pos] == '\r')) {
    ++pos;
  }
  if (pos != cell.size()) {
    throw IoError(path + ": non-numeric cell at row " + std::to_string(row) +
                  ", column " + std::to_string(col) + ": '" + cell + "'");
  }
  return value;
}

}  // namespace detail

// Reads a rectangular CSV of doubles. Rows are matrix rows; blank lines at
// the end of the file are ignored.
inline Eigen::MatrixXd read_csv_matrix(const std::string& path,
                                       bool skip_header = false) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool pending_header = skip_header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (pending_header) {
      pending_header = false;
      continue;
    }
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      row[j] = detail::parse_cell(cells[j], path, lineno, j + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError(path + ": row " + std::to_string(lineno) + " has " +
                    std::to_string(row.size()) + " cells, expected " +
                    std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": empty file");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

// Writes with 17 significant digits so doubles round-trip exactly.
inline void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m,
                             int precision = 17) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.*g", precision, m(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

inline void write_csv_matrix(const std::string& path,
                             const Eigen::MatrixXi& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

// One integer per line.
inline std::vector<int> read_label_file(const std::string& path,
                                        bool skip_header = false) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  bool pending_header = skip_header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (pending_header) {
      pending_header = false;
      continue;
    }
    if (line.empty()) continue;
    double value = detail::parse_cell(line, path, lineno, 1);
    labels.push_back(static_cast<int>(std::lround(value)));
  }
  if (labels.empty()) throw IoError(path + ": empty label file");
  return labels;
}

inline void write_label_file(const std::string& path,
                             const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (int label : labels) out << label << '\n';
}

}  // namespace mimb
