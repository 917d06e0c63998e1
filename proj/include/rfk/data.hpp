#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rfk {

/// Raised when input data cannot be parsed or violates a type invariant.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n observations (rows) by p features (columns). All entries finite, n >= 2, p >= 1.
class DataMatrix {
 public:
  explicit DataMatrix(Eigen::MatrixXd values);

  static DataMatrix from_rows(const std::vector<std::vector<double>>& rows);
  static DataMatrix column(const std::vector<double>& values);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }

  std::vector<double> column_values(std::size_t j) const;
  /// Bitwise row equality (distinguishes -0.0 from 0.0).
  bool rows_identical(std::size_t a, std::size_t b) const;

 private:
  Eigen::MatrixXd values_;
};

/// Parse headerless, comma-separated numeric text. Errors carry 1-based row/column positions.
DataMatrix read_csv(std::istream& in, const std::string& source = "<stream>");
DataMatrix read_csv_file(const std::string& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Row-major, full matrix, round-trip exact values, LF line endings.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);

}  // namespace rfk
