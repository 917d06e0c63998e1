#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rfk/data.hpp"
#include "rfk/independence.hpp"
#include "rfk/kernel.hpp"

namespace rfk {

enum class Setting {
  linear,
  cubic,
  exponential,
  step,
  quadratic,
  wshape,
  spiral,
  bernoulli,
  fourthroot,
  twoparabolas,
  circle,
  ellipse,
};

inline constexpr std::array<Setting, 12> kAllSettings = {
    Setting::linear,     Setting::cubic,     Setting::exponential,  Setting::step,
    Setting::quadratic,  Setting::wshape,    Setting::spiral,       Setting::bernoulli,
    Setting::fourthroot, Setting::twoparabolas, Setting::circle,    Setting::ellipse,
};

std::string to_string(Setting s);
Setting parse_setting(std::string_view name);

/// Built-in noise level per setting (the calibrated values shipped in config/noise.json).
double default_noise(Setting s);

/// Per-setting noise table, keyed by setting name.
using NoiseTable = std::map<std::string, double>;
NoiseTable builtin_noise_table();
/// Reads the "settings" object of a noise calibration JSON file.
NoiseTable read_noise_table(const std::string& path);

struct SimSetting {
  Setting name = Setting::linear;
  int p = 1;
  double noise = 0.0;

  static SimSetting with_default_noise(Setting name, int p);
  void validate() const;

  friend bool operator==(const SimSetting&, const SimSetting&) = default;
};

struct SimData {
  DataMatrix x;
  DataMatrix y;
};

/// dependent = false pairs X from one independent draw with Y from a second draw of the same
/// generator, preserving both marginals.
SimData generate(const SimSetting& setting, int n, bool dependent, std::uint64_t seed);

enum class Method { srf, urf, dcorr, hsic_gaussian };

inline constexpr std::array<Method, 4> kAllMethods = {Method::srf, Method::urf, Method::dcorr,
                                                      Method::hsic_gaussian};

std::string to_string(Method m);
Method parse_method(std::string_view name);

struct MethodConfig {
  int num_trees = 100;
  int mtry = 0;
  int min_leaf = 5;
  int max_depth = 0;
  bool supervised_bootstrap = true;
  bool unsupervised_bootstrap = false;
  MixtureConfig mixture;
  /// Threads used inside one statistic evaluation (forest growth, kernel assembly).
  unsigned threads = 1;

  void validate() const;
};

struct MethodStatistic {
  double value = 0.0;
  bool degenerate = false;
};

/// Kernel for X under a forest method (srf needs y; urf ignores it).
KernelMatrix srf_kernel(const DataMatrix& x, std::span<const double> y, const MethodConfig& cfg,
                        std::uint64_t seed);
KernelMatrix urf_kernel(const DataMatrix& x, const MethodConfig& cfg, std::uint64_t seed);

MethodStatistic run_method(Method method, const DataMatrix& x, const DataMatrix& y,
                           const MethodConfig& cfg, std::uint64_t seed);

/// Permutation test of independence for one method on user data. For srf the supervised forest is
/// refit against each permuted response.
TestResult test_method(Method method, const DataMatrix& x, const DataMatrix& y,
                       const MethodConfig& cfg, int num_permutations, std::uint64_t seed,
                       unsigned threads = 1);

struct PowerReport {
  SimSetting setting;
  Method method = Method::srf;
  int n = 0;
  int replicates = 0;
  double alpha = 0.05;
  double power = 0.0;
  double null_threshold = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const PowerReport&, const PowerReport&) = default;
};

/// Fraction of alternative statistics strictly above the empirical (1 - alpha) quantile of the
/// null statistics, taken as the ceil((1 - alpha) r)-th order statistic.
double empirical_power(std::span<const double> alternative, std::span<const double> null,
                       double alpha, double* threshold = nullptr);

/// Seeds for the data of one replicate; independent of the method so methods share data.
std::uint64_t replicate_data_seed(std::uint64_t seed, const SimSetting& s, std::size_t rep, bool dependent);

PowerReport estimate_power(const SimSetting& setting, Method method, int n, int replicates,
                           double alpha, const MethodConfig& cfg, std::uint64_t seed,
                           unsigned threads = 1);

/// Null-vs-null variant: both arms use independent data. Its "power" is the empirical size.
PowerReport estimate_size(const SimSetting& setting, Method method, int n, int replicates,
                          double alpha, const MethodConfig& cfg, std::uint64_t seed,
                          unsigned threads = 1);

}  // namespace rfk
