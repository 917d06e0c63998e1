#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "rfk/data.hpp"

using rfk::DataError;
using rfk::DataMatrix;

namespace {

DataMatrix parse(const std::string& text) {
  std::istringstream in(text);
  return rfk::read_csv(in, "mem.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("csv parsing") {
  const DataMatrix m = parse("# comment\n1,2\n\n3.5,-4e-1\n");
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m(1, 0) == 3.5);
  CHECK(m(1, 1) == -0.4);

  SUBCASE("CRLF endings") { CHECK(parse("1,2\r\n3,4\r\n")(1, 1) == 4.0); }
}

TEST_CASE("csv errors carry positions") {
  CHECK(error_of("1,2\n3,abc\n").find("row 2, column 2") != std::string::npos);
  CHECK(error_of("1,2\n3\n").find("row 2") != std::string::npos);
  CHECK(error_of("1,2\n3,nan\n").find("row 2, column 2") != std::string::npos);
  CHECK(error_of("1,inf\n3,4\n").find("row 1, column 2") != std::string::npos);
  CHECK(error_of("1,,2\n3,4,5\n").find("column 2") != std::string::npos);
  CHECK_FALSE(error_of("1,2,\n3,4,\n").empty());
  CHECK_FALSE(error_of("1\n").empty());
  CHECK_FALSE(error_of("").empty());
}

TEST_CASE("matrix invariants") {
  CHECK_THROWS_AS(DataMatrix(Eigen::MatrixXd(1, 3)), DataError);
  CHECK_THROWS_AS(DataMatrix(Eigen::MatrixXd(3, 0)), DataError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(DataMatrix{bad}, DataError);
  CHECK_THROWS_AS(DataMatrix::from_rows({{1.0, 2.0}, {3.0}}), DataError);
}

TEST_CASE("bitwise row identity") {
  const DataMatrix m = DataMatrix::from_rows({{0.0, 1.0}, {-0.0, 1.0}, {0.0, 1.0}});
  CHECK(m.rows_identical(0, 2));
  CHECK_FALSE(m.rows_identical(0, 1));
}

TEST_CASE("matrix csv round trip is exact") {
  Eigen::MatrixXd v(2, 3);
  v << 0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 12345.678901234567;
  std::ostringstream out;
  rfk::write_matrix_csv(out, v);
  std::istringstream in(out.str());
  const DataMatrix back = rfk::read_csv(in);
  CHECK(back.values() == v);
  CHECK(rfk::format_double(0.5) == "0.5");
}
