#include "rfk/data.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rfk {

DataMatrix::DataMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() < 2) {
    throw DataError("data matrix needs at least 2 rows, got " + std::to_string(values_.rows()));
  }
  if (values_.cols() < 1) {
    throw DataError("data matrix needs at least 1 column");
  }
  for (Eigen::Index j = 0; j < values_.cols(); ++j) {
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (!std::isfinite(values_(i, j))) {
        throw DataError("non-finite value at row " + std::to_string(i + 1) + ", column " +
                        std::to_string(j + 1));
      }
    }
  }
}

DataMatrix DataMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DataError("data matrix has no rows");
  const std::size_t p = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != p) {
      throw DataError("row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                      " columns, expected " + std::to_string(p));
    }
    for (std::size_t j = 0; j < p; ++j) m(i, j) = rows[i][j];
  }
  return DataMatrix(std::move(m));
}

DataMatrix DataMatrix::column(const std::vector<double>& values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(i, 0) = values[i];
  return DataMatrix(std::move(m));
}

std::vector<double> DataMatrix::column_values(std::size_t j) const {
  std::vector<double> out(rows());
  for (std::size_t i = 0; i < rows(); ++i) out[i] = values_(i, j);
  return out;
}

bool DataMatrix::rows_identical(std::size_t a, std::size_t b) const {
  for (std::size_t j = 0; j < cols(); ++j) {
    const double x = values_(a, j);
    const double y = values_(b, j);
    if (std::memcmp(&x, &y, sizeof(double)) != 0) return false;
  }
  return true;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

DataMatrix read_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<double> row;
    std::stringstream ss(t);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      const std::string c = trim(cell);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (c.empty() || used != c.size()) {
        throw DataError(source + ": row " + std::to_string(line_no) + ", column " +
                        std::to_string(col) + ": cannot parse '" + c + "' as a number");
      }
      if (!std::isfinite(v)) {
        throw DataError(source + ": row " + std::to_string(line_no) + ", column " +
                        std::to_string(col) + ": non-finite value '" + c + "'");
      }
      row.push_back(v);
    }
    if (t.back() == ',') {
      throw DataError(source + ": row " + std::to_string(line_no) + ", column " +
                      std::to_string(col + 1) + ": empty cell");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(source + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(row.size()) + " columns, expected " +
                      std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(source + ": no data rows");
  return DataMatrix::from_rows(rows);
}

DataMatrix read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_csv(in, path);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace rfk
