#include "rfk/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rfk/parallel.hpp"

namespace rfk {

namespace {

bool exactly_symmetric(const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (m(i, j) != m(j, i)) return false;
    }
  }
  return true;
}

void require_square(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument(std::string(what) + " must be a nonempty square matrix");
  }
}

bool bounded_provenance(Provenance p) {
  return p == Provenance::proximity || p == Provenance::mixed || p == Provenance::characteristic;
}

}  // namespace

std::string to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::proximity: return "proximity";
    case Provenance::mixed: return "mixed";
    case Provenance::characteristic: return "characteristic";
    case Provenance::metric_induced: return "metric-induced";
    case Provenance::external: return "external";
  }
  return "unknown";
}

KernelMatrix::KernelMatrix(Eigen::MatrixXd values, Provenance provenance, bool degenerate)
    : values_(std::move(values)), provenance_(provenance), degenerate_(degenerate) {
  require_square(values_, "kernel matrix");
  if (!values_.allFinite()) throw std::invalid_argument("kernel matrix has non-finite entries");
  if (!exactly_symmetric(values_)) throw std::invalid_argument("kernel matrix is not symmetric");
  if (bounded_provenance(provenance_)) {
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (values_(i, i) != 1.0) {
        throw std::invalid_argument(to_string(provenance_) + " kernel needs a unit diagonal");
      }
    }
    if (values_.minCoeff() < 0.0 || values_.maxCoeff() > 1.0) {
      throw std::invalid_argument(to_string(provenance_) + " kernel entries must lie in [0, 1]");
    }
  }
}

MetricMatrix::MetricMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  require_square(values_, "metric matrix");
  if (!values_.allFinite()) throw std::invalid_argument("metric matrix has non-finite entries");
  if (!exactly_symmetric(values_)) throw std::invalid_argument("metric matrix is not symmetric");
  if (values_.minCoeff() < 0.0) throw std::invalid_argument("metric matrix has negative entries");
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    if (values_(i, i) != 0.0) throw std::invalid_argument("metric matrix needs a zero diagonal");
  }
}

void MixtureConfig::validate() const {
  if (!(pi > 0.0 && pi < 1.0)) {
    throw std::invalid_argument("identity fraction pi must lie in (0, 1), got " + std::to_string(pi));
  }
  if (!(r > 0.0 && r < 1.0)) {
    throw std::invalid_argument("exponent r must lie in (0, 1), got " + std::to_string(r));
  }
}

KernelMatrix proximity_kernel(const Forest& forest, unsigned threads) {
  const std::size_t m = forest.num_partitions();
  if (m == 0) throw std::invalid_argument("proximity kernel of an empty forest");
  const std::size_t n = forest.num_observations();

  std::vector<int> cells(m * n);
  for (std::size_t t = 0; t < m; ++t) {
    const auto& c = forest.partitions()[t].cells();
    std::copy(c.begin(), c.end(), cells.begin() + static_cast<std::ptrdiff_t>(t * n));
  }

  Eigen::MatrixXd k(n, n);
  const double inv_m = 1.0 / static_cast<double>(m);
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<std::uint32_t> counts(n - i, 0);
    for (std::size_t t = 0; t < m; ++t) {
      const int* row = cells.data() + t * n;
      const int ci = row[i];
      for (std::size_t j = i; j < n; ++j) counts[j - i] += row[j] == ci ? 1u : 0u;
    }
    for (std::size_t j = i; j < n; ++j) {
      const double v = counts[j - i] == m ? 1.0 : static_cast<double>(counts[j - i]) * inv_m;
      k(i, j) = v;
      k(j, i) = v;
    }
  });
  const bool degenerate = (k.array() == 1.0).all();
  return KernelMatrix(std::move(k), Provenance::proximity, degenerate);
}

std::size_t identity_partition_count(std::size_t m, double pi) {
  if (!(pi > 0.0 && pi < 1.0)) {
    throw std::invalid_argument("identity fraction pi must lie in (0, 1), got " + std::to_string(pi));
  }
  const double exact = pi * static_cast<double>(m) / (1.0 - pi);
  // Guard against ceil() of a value like 1.0000000000000002 produced by rounding.
  const double rounded = std::round(exact);
  const double count = std::abs(exact - rounded) <= 1e-9 * std::max(1.0, exact) ? rounded : std::ceil(exact);
  return std::max<std::size_t>(1, static_cast<std::size_t>(count));
}

Forest inject_identity_partitions(const Forest& base, const DataMatrix& x, double pi) {
  const std::size_t extra = identity_partition_count(base.num_partitions(), pi);
  if (x.rows() != base.num_observations()) {
    throw std::invalid_argument("data rows do not match the forest's observations");
  }
  std::vector<Partition> partitions = base.partitions();
  const Partition identity = identity_partition(x);
  partitions.insert(partitions.end(), extra, identity);
  return Forest(base.kind(), std::move(partitions), base.identity_count() + extra);
}

MetricMatrix kernel_to_metric(const KernelMatrix& k) {
  const double max_k = k.values().maxCoeff();
  if (!(max_k > 0.0)) throw std::invalid_argument("kernel_to_metric needs max(K) > 0");
  Eigen::MatrixXd d = (1.0 - k.values().array() / max_k).max(0.0).matrix();
  d.diagonal().setZero();
  return MetricMatrix(std::move(d));
}

KernelMatrix metric_to_kernel(const MetricMatrix& d) {
  const std::size_t n = d.size();
  const double max_d = d.values().maxCoeff();
  if (max_d == 0.0) {
    return KernelMatrix(Eigen::MatrixXd::Ones(n, n), Provenance::metric_induced, true);
  }
  Eigen::MatrixXd k = (1.0 - d.values().array() / max_d).matrix();
  return KernelMatrix(std::move(k), Provenance::metric_induced);
}

KernelMatrix characteristic_transform(const KernelMatrix& k, double r) {
  if (!(r > 0.0 && r < 1.0)) {
    throw std::invalid_argument("exponent r must lie in (0, 1), got " + std::to_string(r));
  }
  const double max_k = k.values().maxCoeff();
  if (!(max_k > 0.0)) throw std::invalid_argument("characteristic_transform needs max(K) > 0");
  const Eigen::Index n = k.values().rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dist = std::max(0.0, 1.0 - k.values()(i, j) / max_k);
      out(i, j) = 1.0 - std::pow(dist, r);
    }
  }
  const bool degenerate = k.degenerate() || (out.array() == 1.0).all();
  const Provenance prov =
      bounded_provenance(k.provenance()) ? Provenance::characteristic : Provenance::external;
  return KernelMatrix(std::move(out), prov, degenerate);
}

KernelMatrix forest_characteristic_kernel(const Forest& forest, const DataMatrix& x,
                                          const MixtureConfig& mixture, unsigned threads) {
  mixture.validate();
  const Forest mixed = inject_identity_partitions(forest, x, mixture.pi);
  const KernelMatrix prox = proximity_kernel(mixed, threads);
  return characteristic_transform(KernelMatrix(prox.values(), Provenance::mixed, prox.degenerate()),
                                  mixture.r);
}

PsdCheck check_psd(const Eigen::MatrixXd& m, double tol) {
  require_square(m, "check_psd input");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("check_psd input is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");
  const double min_eig = solver.eigenvalues().minCoeff();
  return {min_eig >= -tol, min_eig};
}

double negative_type_margin(const MetricMatrix& d) {
  const Eigen::Index n = d.values().rows();
  const Eigen::MatrixXd h =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd centered = -(h * d.values() * h);
  centered = 0.5 * (centered + centered.transpose()).eval();
  return check_psd(centered, 0.0).min_eigenvalue;
}

bool check_negative_type(const MetricMatrix& d, double tol) { return negative_type_margin(d) >= -tol; }

MetricMatrix euclidean_metric(const DataMatrix& x) {
  const std::size_t n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double diff = x(i, c) - x(j, c);
        s += diff * diff;
      }
      d(i, j) = d(j, i) = std::sqrt(s);
    }
  }
  return MetricMatrix(std::move(d));
}

KernelMatrix gaussian_kernel_median(const DataMatrix& x) {
  const MetricMatrix d = euclidean_metric(x);
  const std::size_t n = d.size();
  std::vector<double> pairwise;
  pairwise.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (d(i, j) > 0.0) pairwise.push_back(d(i, j));
    }
  }
  if (pairwise.empty()) {
    return KernelMatrix(Eigen::MatrixXd::Ones(n, n), Provenance::external, true);
  }
  auto mid = pairwise.begin() + static_cast<std::ptrdiff_t>(pairwise.size() / 2);
  std::nth_element(pairwise.begin(), mid, pairwise.end());
  double median = *mid;
  if (pairwise.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(pairwise.begin(), mid));
  }
  const double scale = 2.0 * median * median;
  Eigen::MatrixXd k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      k(i, j) = k(j, i) = std::exp(-d(i, j) * d(i, j) / scale);
    }
  }
  return KernelMatrix(std::move(k), Provenance::external);
}

}  // namespace rfk
