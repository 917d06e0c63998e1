#include "rfk/independence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "rfk/data.hpp"
#include "rfk/parallel.hpp"
#include "rfk/random.hpp"

namespace rfk {

Eigen::MatrixXd double_center(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 2) {
    throw std::invalid_argument("double_center needs a square matrix with n >= 2");
  }
  const Eigen::Index n = m.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  // Same summation order for rows and columns, so symmetric input gives identical means.
  Eigen::VectorXd row_mean = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd col_mean = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      row_mean(i) += m(i, k);
      col_mean(i) += m(k, i);
    }
  }
  row_mean *= inv_n;
  col_mean *= inv_n;
  double grand = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) grand += row_mean(i);
  grand *= inv_n;
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      // Summing the two means first keeps the output exactly symmetric for symmetric input.
      out(i, j) = m(i, j) - (row_mean(i) + col_mean(j)) + grand;
    }
  }
  return out;
}

double centered_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      std::span<const std::size_t> perm) {
  const auto n = static_cast<std::size_t>(a.rows());
  if (perm.size() != n || b.rows() != a.rows()) throw std::invalid_argument("size mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto pj = static_cast<Eigen::Index>(perm[j]);
    for (std::size_t i = 0; i < n; ++i) {
      total += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
               b(static_cast<Eigen::Index>(perm[i]), pj);
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n));
}

namespace {

std::vector<std::size_t> identity_perm(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

}  // namespace

double hsic_statistic(const KernelMatrix& k, const KernelMatrix& l) {
  if (k.size() != l.size()) {
    throw std::invalid_argument("hsic_statistic size mismatch: " + std::to_string(k.size()) + " vs " +
                                std::to_string(l.size()));
  }
  return centered_inner(double_center(k.values()), double_center(l.values()), identity_perm(k.size()));
}

DcorrResult dcorr_statistic(const MetricMatrix& dx, const MetricMatrix& dy) {
  if (dx.size() != dy.size()) throw std::invalid_argument("dcorr_statistic size mismatch");
  const Eigen::MatrixXd a = double_center(dx.values());
  const Eigen::MatrixXd b = double_center(dy.values());
  const double n2 = static_cast<double>(dx.size()) * static_cast<double>(dx.size());
  const double var_x = a.cwiseProduct(a).sum() / n2;
  const double var_y = b.cwiseProduct(b).sum() / n2;
  if (!(var_x > 0.0) || !(var_y > 0.0)) return {0.0, true};
  const double cov = a.cwiseProduct(b).sum() / n2;
  return {cov / std::sqrt(var_x * var_y), false};
}

std::string TestResult::csv_header() { return "method,n,statistic,p_value,B,seed"; }

std::string TestResult::to_csv_row() const {
  std::ostringstream out;
  out << method << ',' << n << ',' << format_double(statistic) << ',' << format_double(p_value) << ','
      << num_permutations << ',' << seed;
  return out.str();
}

std::string TestResult::to_json() const {
  std::ostringstream out;
  out << "{\"method\":\"" << method << "\",\"n\":" << n
      << ",\"statistic\":" << format_double(statistic) << ",\"p_value\":" << format_double(p_value)
      << ",\"B\":" << num_permutations << ",\"seed\":" << seed
      << ",\"degenerate\":" << (degenerate ? "true" : "false") << '}';
  return out.str();
}

double permutation_p_value(double observed, std::span<const double> permuted) {
  const auto exceed = std::count_if(permuted.begin(), permuted.end(),
                                    [&](double s) { return s >= observed; });
  return static_cast<double>(1 + exceed) / static_cast<double>(1 + permuted.size());
}

std::vector<std::size_t> replicate_permutation(std::size_t n, std::uint64_t seed, std::size_t b) {
  std::vector<std::size_t> perm = identity_perm(n);
  Engine rng = make_engine(seed, {b});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

TestResult permutation_test(const std::function<double(std::span<const std::size_t>)>& statistic,
                            std::size_t n, int num_permutations, std::uint64_t seed,
                            unsigned threads) {
  if (num_permutations < 1) throw std::invalid_argument("number of permutations must be >= 1");
  TestResult result;
  result.n = n;
  result.num_permutations = num_permutations;
  result.seed = seed;
  result.statistic = statistic(identity_perm(n));

  std::vector<double> permuted(static_cast<std::size_t>(num_permutations));
  parallel_for(permuted.size(), threads, [&](std::size_t b) {
    permuted[b] = statistic(replicate_permutation(n, seed, b));
  });
  result.p_value = permutation_p_value(result.statistic, permuted);
  return result;
}

TestResult permutation_test(const KernelMatrix& k, const KernelMatrix& l, int num_permutations,
                            std::uint64_t seed, unsigned threads) {
  if (k.size() != l.size()) throw std::invalid_argument("permutation_test size mismatch");
  const Eigen::MatrixXd kc = double_center(k.values());
  const Eigen::MatrixXd lc = double_center(l.values());
  TestResult result = permutation_test(
      [&](std::span<const std::size_t> perm) { return centered_inner(kc, lc, perm); }, k.size(),
      num_permutations, seed, threads);
  result.method = "hsic";
  result.degenerate = k.degenerate() || l.degenerate();
  return result;
}

}  // namespace rfk
