#include "rfk/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "rfk/forest.hpp"
#include "rfk/parallel.hpp"
#include "rfk/random.hpp"

namespace rfk {

namespace {

constexpr std::array<std::string_view, 12> kSettingNames = {
    "linear",    "cubic",  "exponential", "step",       "quadratic",    "wshape",
    "spiral",    "bernoulli", "fourthroot", "twoparabolas", "circle",   "ellipse",
};

constexpr std::array<std::string_view, 4> kMethodNames = {"srf", "urf", "dcorr", "hsic-gaussian"};

// Calibrated once by tools/calibrate_noise; mirrored in config/noise.json.
constexpr std::array<double, 12> kDefaultNoise = {
    1.6,    // linear
    1.345,  // cubic
    1.345,  // exponential
    1.131,  // step
    0.9514, // quadratic
    0.8,    // wshape
    0.05,   // spiral
    1.6,    // bernoulli
    1.131,  // fourthroot
    0.2828, // twoparabolas
    0.05,   // circle
    0.05,   // ellipse
};

}  // namespace

std::string to_string(Setting s) { return std::string(kSettingNames[static_cast<std::size_t>(s)]); }

Setting parse_setting(std::string_view name) {
  for (std::size_t i = 0; i < kSettingNames.size(); ++i) {
    if (kSettingNames[i] == name) return kAllSettings[i];
  }
  throw std::invalid_argument("unknown simulation setting '" + std::string(name) + "'");
}

double default_noise(Setting s) { return kDefaultNoise[static_cast<std::size_t>(s)]; }

NoiseTable builtin_noise_table() {
  NoiseTable table;
  for (Setting s : kAllSettings) table[to_string(s)] = default_noise(s);
  return table;
}

NoiseTable read_noise_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open noise config " + path);
  const nlohmann::json doc = nlohmann::json::parse(in);
  NoiseTable table = builtin_noise_table();
  for (const auto& [name, entry] : doc.at("settings").items()) {
    parse_setting(name);
    const double noise = entry.is_number() ? entry.get<double>() : entry.at("noise").get<double>();
    if (!(noise >= 0.0) || !std::isfinite(noise)) {
      throw std::invalid_argument("noise for " + name + " must be finite and >= 0");
    }
    table[name] = noise;
  }
  return table;
}

SimSetting SimSetting::with_default_noise(Setting name, int p) { return {name, p, default_noise(name)}; }

void SimSetting::validate() const {
  if (p < 1) throw std::invalid_argument("setting dimension p must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw std::invalid_argument("noise must be finite and >= 0");
}

namespace {

struct Draw {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

double weighted_sum(const Eigen::MatrixXd& x, Eigen::Index row) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < x.cols(); ++d) s += x(row, d) / static_cast<double>(d + 1);
  return s;
}

Draw draw_joint(const SimSetting& s, int n, Engine& rng) {
  const Eigen::Index rows = n;
  const Eigen::Index p = s.p;
  const double kappa = s.noise;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unif(rng); };
  auto fill_uniform = [&](Eigen::MatrixXd& m, double lo, double hi) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index d = 0; d < m.cols(); ++d) m(i, d) = uniform(lo, hi);
  };
  constexpr double pi = std::numbers::pi;

  Draw out{Eigen::MatrixXd(rows, p), Eigen::VectorXd(rows)};
  Eigen::MatrixXd& x = out.x;
  Eigen::VectorXd& y = out.y;

  switch (s.name) {
    case Setting::linear:
      fill_uniform(x, -1.0, 1.0);
      for (Eigen::Index i = 0; i < rows; ++i) y(i) = weighted_sum(x, i) + kappa * normal(rng);
      break;
    case Setting::cubic:
      fill_uniform(x, -1.0, 1.0);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double z = weighted_sum(x, i) - 1.0 / 3.0;
        y(i) = 128.0 * z * z * z + 48.0 * z * z - 12.0 * z + 80.0 * kappa * normal(rng);
      }
      break;
    case Setting::exponential:
      fill_uniform(x, 0.0, 3.0);
      for (Eigen::Index i = 0; i < rows; ++i) y(i) = std::exp(weighted_sum(x, i)) + 10.0 * kappa * normal(rng);
      break;
    case Setting::step:
      fill_uniform(x, -1.0, 1.0);
      for (Eigen::Index i = 0; i < rows; ++i) {
        y(i) = (weighted_sum(x, i) > 0.0 ? 1.0 : 0.0) + kappa * normal(rng);
      }
      break;
    case Setting::quadratic:
      fill_uniform(x, -1.0, 1.0);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double z = weighted_sum(x, i);
        y(i) = z * z + 0.5 * kappa * normal(rng);
      }
      break;
    case Setting::wshape: {
      fill_uniform(x, -1.0, 1.0);
      Eigen::MatrixXd u(rows, p);
      fill_uniform(u, -1.0, 1.0);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double z = weighted_sum(x, i);
        const double inner = z * z - 0.5;
        y(i) = 4.0 * (inner * inner + weighted_sum(u, i) / 500.0) + 0.5 * kappa * normal(rng);
      }
      break;
    }
    case Setting::spiral:
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double u = uniform(0.0, 5.0);
        const double sn = std::sin(pi * u);
        const double cs = std::cos(pi * u);
        double sin_power = 1.0;
        for (Eigen::Index d = 0; d < p; ++d) {
          x(i, d) = u * sin_power * cs;
          sin_power *= sn;
        }
        y(i) = u * sn + 0.4 * kappa * normal(rng);
      }
      break;
    case Setting::bernoulli: {
      std::bernoulli_distribution coin(0.5);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index d = 0; d < p; ++d) x(i, d) = (coin(rng) ? 1.0 : 0.0) + 0.5 * kappa * normal(rng);
      }
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double sign = coin(rng) ? 1.0 : -1.0;
        y(i) = sign * weighted_sum(x, i) + 0.5 * kappa * normal(rng);
      }
      break;
    }
    case Setting::fourthroot:
      fill_uniform(x, -1.0, 1.0);
      for (Eigen::Index i = 0; i < rows; ++i) {
        y(i) = std::pow(std::abs(weighted_sum(x, i)), 0.25) + kappa / 4.0 * normal(rng);
      }
      break;
    case Setting::twoparabolas: {
      std::bernoulli_distribution coin(0.5);
      fill_uniform(x, -1.0, 1.0);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double z = weighted_sum(x, i);
        const double v = coin(rng) ? 1.0 : 0.0;
        y(i) = (z * z + 2.0 * kappa * unif(rng)) * (v - 0.5);
      }
      break;
    }
    case Setting::circle:
    case Setting::ellipse: {
      const double radius = s.name == Setting::circle ? 1.0 : 5.0;
      for (Eigen::Index i = 0; i < rows; ++i) {
        double first_angle = 0.0;
        for (Eigen::Index d = 0; d < p; ++d) {
          const double angle = pi * uniform(-1.0, 1.0);
          if (d == 0) first_angle = angle;
          x(i, d) = radius * std::cos(angle) + kappa * normal(rng) / 4.0;
        }
        y(i) = radius * std::sin(first_angle) + kappa * normal(rng) / 4.0;
      }
      break;
    }
  }
  return out;
}

DataMatrix as_column(const Eigen::VectorXd& v) {
  Eigen::MatrixXd m(v.size(), 1);
  m.col(0) = v;
  return DataMatrix(std::move(m));
}

}  // namespace

SimData generate(const SimSetting& setting, int n, bool dependent, std::uint64_t seed) {
  setting.validate();
  if (n < 2) throw std::invalid_argument("sample size n must be >= 2");
  if (dependent) {
    Engine rng = make_engine(seed, {0});
    Draw d = draw_joint(setting, n, rng);
    return {DataMatrix(std::move(d.x)), as_column(d.y)};
  }
  Engine rng_x = make_engine(seed, {1});
  Engine rng_y = make_engine(seed, {2});
  Draw dx = draw_joint(setting, n, rng_x);
  Draw dy = draw_joint(setting, n, rng_y);
  return {DataMatrix(std::move(dx.x)), as_column(dy.y)};
}

std::string to_string(Method m) { return std::string(kMethodNames[static_cast<std::size_t>(m)]); }

Method parse_method(std::string_view name) {
  for (std::size_t i = 0; i < kMethodNames.size(); ++i) {
    if (kMethodNames[i] == name) return kAllMethods[i];
  }
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

void MethodConfig::validate() const {
  if (num_trees < 1) throw std::invalid_argument("num_trees must be >= 1");
  if (min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
  if (mtry < 0 || max_depth < 0) throw std::invalid_argument("mtry and max_depth must be >= 0");
  mixture.validate();
}

namespace {

ForestConfig forest_config(const MethodConfig& cfg, bool supervised, std::uint64_t seed, std::size_t p) {
  ForestConfig fc;
  fc.num_trees = cfg.num_trees;
  fc.mtry = std::min<int>(cfg.mtry, static_cast<int>(p));
  fc.min_leaf = cfg.min_leaf;
  fc.max_depth = cfg.max_depth;
  fc.bootstrap = supervised ? cfg.supervised_bootstrap : cfg.unsupervised_bootstrap;
  fc.seed = seed;
  fc.threads = cfg.threads;
  return fc;
}

}  // namespace

KernelMatrix srf_kernel(const DataMatrix& x, std::span<const double> y, const MethodConfig& cfg,
                        std::uint64_t seed) {
  const Forest forest = build_supervised_forest(x, y, forest_config(cfg, true, seed, x.cols()));
  return forest_characteristic_kernel(forest, x, cfg.mixture, cfg.threads);
}

KernelMatrix urf_kernel(const DataMatrix& x, const MethodConfig& cfg, std::uint64_t seed) {
  const Forest forest = build_unsupervised_forest(x, forest_config(cfg, false, seed, x.cols()));
  return forest_characteristic_kernel(forest, x, cfg.mixture, cfg.threads);
}

MethodStatistic run_method(Method method, const DataMatrix& x, const DataMatrix& y,
                           const MethodConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (x.rows() != y.rows()) {
    throw std::invalid_argument("X has " + std::to_string(x.rows()) + " rows but Y has " +
                                std::to_string(y.rows()));
  }
  switch (method) {
    case Method::srf: {
      if (y.cols() != 1) throw std::invalid_argument("srf needs a single response column");
      const std::vector<double> target = y.column_values(0);
      const KernelMatrix k = srf_kernel(x, target, cfg, derive_seed(seed, {1}));
      const KernelMatrix l = metric_to_kernel(euclidean_metric(y));
      return {hsic_statistic(k, l), k.degenerate() || l.degenerate()};
    }
    case Method::urf: {
      const KernelMatrix k = urf_kernel(x, cfg, derive_seed(seed, {1}));
      const KernelMatrix l = urf_kernel(y, cfg, derive_seed(seed, {2}));
      return {hsic_statistic(k, l), k.degenerate() || l.degenerate()};
    }
    case Method::dcorr: {
      const DcorrResult r = dcorr_statistic(euclidean_metric(x), euclidean_metric(y));
      return {r.value, r.degenerate};
    }
    case Method::hsic_gaussian: {
      const KernelMatrix k = gaussian_kernel_median(x);
      const KernelMatrix l = gaussian_kernel_median(y);
      return {hsic_statistic(k, l), k.degenerate() || l.degenerate()};
    }
  }
  throw std::invalid_argument("unhandled method");
}

TestResult test_method(Method method, const DataMatrix& x, const DataMatrix& y,
                       const MethodConfig& cfg, int num_permutations, std::uint64_t seed,
                       unsigned threads) {
  cfg.validate();
  if (x.rows() != y.rows()) {
    throw std::invalid_argument("X has " + std::to_string(x.rows()) + " rows but Y has " +
                                std::to_string(y.rows()));
  }
  const std::size_t n = x.rows();
  TestResult result;
  switch (method) {
    case Method::srf: {
      if (y.cols() != 1) throw std::invalid_argument("srf needs a single response column");
      const std::vector<double> target = y.column_values(0);
      const KernelMatrix l = metric_to_kernel(euclidean_metric(y));
      const Eigen::MatrixXd lc = double_center(l.values());
      const std::uint64_t forest_seed = derive_seed(seed, {1});
      // Each permutation relabels the response, refits the forest on it and compares the new
      // X-kernel with the equally relabelled Y-kernel.
      result = permutation_test(
          [&](std::span<const std::size_t> perm) {
            std::vector<double> permuted(n);
            for (std::size_t i = 0; i < n; ++i) permuted[i] = target[perm[i]];
            const KernelMatrix k = srf_kernel(x, permuted, cfg, forest_seed);
            return centered_inner(double_center(k.values()), lc, perm);
          },
          n, num_permutations, seed, threads);
      result.degenerate = l.degenerate();
      break;
    }
    case Method::urf: {
      result = permutation_test(urf_kernel(x, cfg, derive_seed(seed, {1})),
                                urf_kernel(y, cfg, derive_seed(seed, {2})), num_permutations,
                                seed, threads);
      break;
    }
    case Method::dcorr: {
      const MetricMatrix dx = euclidean_metric(x);
      const MetricMatrix dy = euclidean_metric(y);
      const DcorrResult observed = dcorr_statistic(dx, dy);
      // dcorr is a fixed positive multiple of the centered distance inner product, so the
      // permutation distribution of that inner product gives the dcorr p-value.
      const Eigen::MatrixXd a = double_center(dx.values());
      const Eigen::MatrixXd b = double_center(dy.values());
      result = permutation_test(
          [&](std::span<const std::size_t> perm) { return centered_inner(a, b, perm); }, n,
          num_permutations, seed, threads);
      result.statistic = observed.value;
      result.degenerate = observed.degenerate;
      if (observed.degenerate) result.p_value = 1.0;
      break;
    }
    case Method::hsic_gaussian:
      result = permutation_test(gaussian_kernel_median(x), gaussian_kernel_median(y),
                                num_permutations, seed, threads);
      break;
  }
  result.method = to_string(method);
  return result;
}

double empirical_power(std::span<const double> alternative, std::span<const double> null,
                       double alpha, double* threshold) {
  if (null.empty() || alternative.empty()) throw std::invalid_argument("empty statistic sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  std::vector<double> sorted(null.begin(), null.end());
  std::sort(sorted.begin(), sorted.end());
  const double r = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * r - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  const double cut = sorted[rank - 1];
  if (threshold) *threshold = cut;
  const auto above = std::count_if(alternative.begin(), alternative.end(),
                                   [&](double s) { return s > cut; });
  return static_cast<double>(above) / static_cast<double>(alternative.size());
}

std::uint64_t replicate_data_seed(std::uint64_t seed, const SimSetting& s, std::size_t rep,
                                  bool dependent) {
  return derive_seed(seed, {static_cast<std::uint64_t>(s.name), static_cast<std::uint64_t>(s.p),
                            rep, dependent ? 1u : 0u});
}

namespace {

PowerReport power_between(const SimSetting& setting, Method method, int n, int replicates,
                          double alpha, const MethodConfig& cfg, std::uint64_t seed,
                          unsigned threads, bool alternative_dependent) {
  setting.validate();
  cfg.validate();
  if (replicates < 20) throw std::invalid_argument("power estimation needs >= 20 replicates");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");

  const auto reps = static_cast<std::size_t>(replicates);
  std::vector<double> alt(reps);
  std::vector<double> null(reps);
  const auto method_key = static_cast<std::uint64_t>(method);
  // Job 2*rep is the alternative arm, 2*rep+1 the null arm.
  parallel_for(2 * reps, threads, [&](std::size_t job) {
    const std::size_t rep = job / 2;
    const bool null_arm = job % 2 == 1;
    std::uint64_t data_seed = 0;
    if (null_arm) {
      data_seed = replicate_data_seed(seed, setting, rep, false);
    } else if (alternative_dependent) {
      data_seed = replicate_data_seed(seed, setting, rep, true);
    } else {
      data_seed = derive_seed(replicate_data_seed(seed, setting, rep, false), {7});
    }
    const SimData data = generate(setting, n, !null_arm && alternative_dependent, data_seed);
    const std::uint64_t method_seed = derive_seed(data_seed, {method_key});
    (null_arm ? null : alt)[rep] = run_method(method, data.x, data.y, cfg, method_seed).value;
  });

  PowerReport report;
  report.setting = setting;
  report.method = method;
  report.n = n;
  report.replicates = replicates;
  report.alpha = alpha;
  report.seed = seed;
  report.power = empirical_power(alt, null, alpha, &report.null_threshold);
  return report;
}

}  // namespace

PowerReport estimate_power(const SimSetting& setting, Method method, int n, int replicates,
                           double alpha, const MethodConfig& cfg, std::uint64_t seed,
                           unsigned threads) {
  return power_between(setting, method, n, replicates, alpha, cfg, seed, threads, true);
}

PowerReport estimate_size(const SimSetting& setting, Method method, int n, int replicates,
                          double alpha, const MethodConfig& cfg, std::uint64_t seed,
                          unsigned threads) {
  return power_between(setting, method, n, replicates, alpha, cfg, seed, threads, false);
}

}  // namespace rfk
