#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "rfk/data.hpp"
#include "rfk/forest.hpp"

namespace rfk {

enum class Provenance { proximity, mixed, characteristic, metric_induced, external };

std::string to_string(Provenance provenance);

/// Symmetric n x n Gram matrix. Proximity, mixed and characteristic kernels additionally have a
/// unit diagonal and entries in [0, 1]; the constructor enforces both.
class KernelMatrix {
 public:
  KernelMatrix(Eigen::MatrixXd values, Provenance provenance, bool degenerate = false);

  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }
  Provenance provenance() const { return provenance_; }
  /// Set when every point coincides (all-ones kernel from an all-zero metric, or a kernel whose
  /// off-diagonal entries all equal the diagonal).
  bool degenerate() const { return degenerate_; }

 private:
  Eigen::MatrixXd values_;
  Provenance provenance_;
  bool degenerate_;
};

/// Symmetric dissimilarity matrix with zero diagonal and nonnegative entries.
class MetricMatrix {
 public:
  explicit MetricMatrix(Eigen::MatrixXd values);

  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

struct MixtureConfig {
  /// Requested fraction of identity partitions, in (0, 1).
  double pi = 0.01;
  /// Metric exponent, in (0, 1).
  double r = 0.5;

  void validate() const;
};

/// K(i, j) = fraction of partitions in which i and j share a cell. Counts are accumulated as
/// integers and divided once, so the result does not depend on `threads`.
KernelMatrix proximity_kernel(const Forest& forest, unsigned threads = 1);

/// Number of identity partitions appended to m base partitions for fraction pi:
/// ceil(pi * m / (1 - pi)), at least 1.
std::size_t identity_partition_count(std::size_t m, double pi);

/// Appends identity partitions so that at least a fraction pi of all partitions are identity.
Forest inject_identity_partitions(const Forest& base, const DataMatrix& x, double pi);

/// d(i, j) = 1 - K(i, j) / max(K), max over all entries of the sample matrix.
MetricMatrix kernel_to_metric(const KernelMatrix& k);

/// k(i, j) = 1 - D(i, j) / max(D). An all-zero D yields the all-ones kernel flagged degenerate.
KernelMatrix metric_to_kernel(const MetricMatrix& d);

/// K*(i, j) = 1 - (1 - K(i, j) / max(K))^r for r in (0, 1).
KernelMatrix characteristic_transform(const KernelMatrix& k, double r);

/// proximity -> identity mixture -> characteristic transform.
KernelMatrix forest_characteristic_kernel(const Forest& forest, const DataMatrix& x,
                                          const MixtureConfig& mixture, unsigned threads = 1);

struct PsdCheck {
  bool is_psd = false;
  double min_eigenvalue = 0.0;
};

/// Smallest eigenvalue via a dense symmetric eigensolver. Rejects non-symmetric input.
PsdCheck check_psd(const Eigen::MatrixXd& m, double tol = 1e-8);

/// True iff -H D H is PSD (H the centering matrix), i.e. the quadratic form of D is
/// nonpositive on every zero-sum coefficient vector.
bool check_negative_type(const MetricMatrix& d, double tol = 1e-8);

/// Smallest eigenvalue of -H D H.
double negative_type_margin(const MetricMatrix& d);

MetricMatrix euclidean_metric(const DataMatrix& x);

/// exp(-||a - b||^2 / (2 s^2)) with s the median of the nonzero pairwise distances.
/// Returns an all-ones kernel flagged degenerate when all rows coincide.
KernelMatrix gaussian_kernel_median(const DataMatrix& x);

}  // namespace rfk
