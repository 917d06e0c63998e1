#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "rfk/kernel.hpp"

namespace rfk {

/// H M H with H = I - 11^T / n.
Eigen::MatrixXd double_center(const Eigen::MatrixXd& m);

/// (1/n^2) sum_ij A(i, j) * B(perm[i], perm[j]) for already centered A, B.
/// An identity `perm` gives the unpermuted statistic.
double centered_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      std::span<const std::size_t> perm);

/// Biased V-statistic HSIC: (1/n^2) sum_ij (HKH)(i, j) (HLH)(i, j).
/// Inputs are expected to be PSD; this is not re-checked here.
double hsic_statistic(const KernelMatrix& k, const KernelMatrix& l);

struct DcorrResult {
  double value = 0.0;
  /// Set when either distance variance is zero; value is then 0.
  bool degenerate = false;
};

DcorrResult dcorr_statistic(const MetricMatrix& dx, const MetricMatrix& dy);

struct TestResult {
  std::string method;
  std::size_t n = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  int num_permutations = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;

  static std::string csv_header();
  std::string to_csv_row() const;
  std::string to_json() const;
};

/// p = (1 + #{permuted >= observed}) / (1 + B).
double permutation_p_value(double observed, std::span<const double> permuted);

/// The permutation used for replicate b: a uniform shuffle drawn from stream (seed, b).
std::vector<std::size_t> replicate_permutation(std::size_t n, std::uint64_t seed, std::size_t b);

/// Generic permutation test. `statistic(perm)` must return the statistic with the second sample's
/// indices relabelled by perm (identity perm = observed). Replicates run in parallel; the result
/// does not depend on `threads`.
TestResult permutation_test(const std::function<double(std::span<const std::size_t>)>& statistic,
                            std::size_t n, int num_permutations, std::uint64_t seed,
                            unsigned threads = 1);

/// HSIC permutation test: L's rows and columns are permuted jointly.
TestResult permutation_test(const KernelMatrix& k, const KernelMatrix& l, int num_permutations,
                            std::uint64_t seed, unsigned threads = 1);

}  // namespace rfk
