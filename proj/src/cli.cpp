#include "rfk/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfk/data.hpp"
#include "rfk/forest.hpp"
#include "rfk/independence.hpp"
#include "rfk/kernel.hpp"
#include "rfk/sim.hpp"

namespace rfk::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ForestOptions {
  int trees = 500;
  int mtry = 0;
  int min_leaf = 5;
  int max_depth = 0;
  std::optional<bool> bootstrap;
  double pi = 0.01;
  double r = 0.5;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

void add_forest_options(CLI::App* cmd, ForestOptions& o, int default_trees) {
  o.trees = default_trees;
  cmd->add_option("--trees", o.trees, "trees per forest (m)")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--mtry", o.mtry, "candidate features per split (0 = default)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--min-leaf", o.min_leaf, "minimum observations per leaf")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--max-depth", o.max_depth, "maximum tree depth (0 = unlimited)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--bootstrap,!--no-bootstrap", o.bootstrap, "bootstrap rows for each tree");
  cmd->add_option("--pi", o.pi, "fraction of identity partitions, in (0,1)")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  cmd->add_option("--r", o.r, "metric exponent, in (0,1)")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  cmd->add_option("--seed", o.seed, "random seed")->envname(kSeedEnv)->capture_default_str();
  cmd->add_option("--threads", o.threads, "worker threads (0 = available parallelism)");
}

MixtureConfig mixture_of(const ForestOptions& o) {
  MixtureConfig m{o.pi, o.r};
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return m;
}

std::string fmt(double v) { return format_double(v); }

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const std::string& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// kernel

struct KernelOptions {
  std::string x_path;
  std::string y_path;
  int y_column = -1;
  std::string out_path;
  ForestOptions forest;
};

int cmd_kernel(const KernelOptions& o, std::ostream& out, std::ostream& err) {
  DataMatrix x = read_csv_file(o.x_path);
  std::vector<double> y;
  const bool supervised = !o.y_path.empty() || o.y_column >= 0;
  if (!o.y_path.empty()) {
    const DataMatrix ym = read_csv_file(o.y_path);
    if (ym.cols() != 1) throw UsageError("--y file must have exactly one column, got " + std::to_string(ym.cols()));
    if (ym.rows() != x.rows()) {
      throw UsageError("row count mismatch: x has " + std::to_string(x.rows()) + " rows, y has " +
                       std::to_string(ym.rows()));
    }
    y = ym.column_values(0);
  } else if (o.y_column >= 0) {
    const auto col = static_cast<std::size_t>(o.y_column);
    if (col >= x.cols() || x.cols() < 2) {
      throw UsageError("--y-column " + std::to_string(o.y_column) + " needs at least " +
                       std::to_string(std::max<std::size_t>(2, col + 1)) + " columns in x");
    }
    y = x.column_values(col);
    Eigen::MatrixXd rest(x.rows(), x.cols() - 1);
    for (std::size_t j = 0, k = 0; j < x.cols(); ++j) {
      if (j != col) rest.col(static_cast<Eigen::Index>(k++)) = x.values().col(static_cast<Eigen::Index>(j));
    }
    x = DataMatrix(std::move(rest));
  }

  const MixtureConfig mixture = mixture_of(o.forest);
  ForestConfig fc;
  fc.num_trees = o.forest.trees;
  fc.mtry = o.forest.mtry;
  fc.min_leaf = o.forest.min_leaf;
  fc.max_depth = o.forest.max_depth;
  fc.bootstrap = o.forest.bootstrap.value_or(supervised);
  fc.seed = o.forest.seed;
  fc.threads = o.forest.threads;
  try {
    fc.validate(x.cols());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const Forest forest = supervised ? build_supervised_forest(x, y, fc) : build_unsupervised_forest(x, fc);
  const Forest mixed = inject_identity_partitions(forest, x, mixture.pi);
  const KernelMatrix prox = proximity_kernel(mixed, fc.threads);
  const KernelMatrix kernel =
      characteristic_transform(KernelMatrix(prox.values(), Provenance::mixed, prox.degenerate()), mixture.r);
  const PsdCheck psd = check_psd(kernel.values());
  const std::size_t identity_cells = static_cast<std::size_t>(identity_partition(x).num_cells());

  std::ofstream file;
  std::ostream* sink = &out;
  if (!o.out_path.empty()) {
    file.open(o.out_path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + o.out_path);
    sink = &file;
  }
  std::ostream& s = *sink;
  s << "# rfkernel kernel mode=" << (supervised ? "supervised" : "unsupervised") << " n=" << x.rows()
    << " p=" << x.cols() << " mtry=" << fc.resolved_mtry(x.cols(), supervised) << " min_leaf=" << fc.min_leaf
    << " max_depth=" << fc.max_depth << " bootstrap=" << (fc.bootstrap ? "true" : "false") << '\n';
  s << "# m=" << fc.num_trees << ",identity_partitions=" << mixed.identity_count() << ",pi=" << fmt(mixture.pi)
    << ",pi_achieved=" << fmt(static_cast<double>(mixed.identity_count()) / static_cast<double>(mixed.num_partitions()))
    << ",r=" << fmt(mixture.r) << ",seed=" << fc.seed << ",min_eigenvalue=" << fmt(psd.min_eigenvalue) << '\n';
  if (kernel.degenerate()) {
    s << "# warning: degenerate kernel (all observations coincide)\n";
    err << "warning: degenerate kernel (all observations coincide)\n";
  } else if (identity_cells < x.rows()) {
    s << "# warning: " << x.rows() - identity_cells << " duplicate rows share cells\n";
    err << "warning: " << x.rows() - identity_cells << " duplicate rows share cells\n";
  }
  write_matrix_csv(s, kernel.values());
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// test

struct TestOptions {
  std::string x_path;
  std::string y_path;
  std::string method;
  int permutations = 1000;
  std::string format = "csv";
  int min_leaf = 5;
  ForestOptions forest;
};

int cmd_test(const TestOptions& o, std::ostream& out, std::ostream&) {
  const DataMatrix x = read_csv_file(o.x_path);
  const DataMatrix y = read_csv_file(o.y_path);
  if (x.rows() != y.rows()) {
    throw UsageError("row count mismatch: x has " + std::to_string(x.rows()) + " rows, y has " +
                     std::to_string(y.rows()));
  }
  const Method method = parse_method(o.method);
  if (method == Method::srf && y.cols() != 1) {
    throw UsageError("method srf needs a single-column y, got " + std::to_string(y.cols()) + " columns");
  }

  MethodConfig cfg;
  cfg.num_trees = o.forest.trees;
  cfg.mtry = o.forest.mtry;
  cfg.min_leaf = o.forest.min_leaf;
  cfg.max_depth = o.forest.max_depth;
  if (o.forest.bootstrap) {
    cfg.supervised_bootstrap = *o.forest.bootstrap;
    cfg.unsupervised_bootstrap = *o.forest.bootstrap;
  }
  cfg.mixture = mixture_of(o.forest);
  cfg.threads = 1;
  if (cfg.mtry > 0 && (static_cast<std::size_t>(cfg.mtry) > x.cols() ||
                       (method == Method::urf && static_cast<std::size_t>(cfg.mtry) > y.cols()))) {
    throw UsageError("--mtry exceeds the number of features");
  }

  const TestResult result = test_method(method, x, y, cfg, o.permutations, o.forest.seed, o.forest.threads);
  if (o.format == "json") {
    out << result.to_json() << '\n';
  } else {
    out << "# rfkernel test method=" << o.method << " trees=" << cfg.num_trees << " mtry=" << cfg.mtry
        << " min_leaf=" << cfg.min_leaf << " max_depth=" << cfg.max_depth << " pi=" << fmt(cfg.mixture.pi)
        << " r=" << fmt(cfg.mixture.r) << " B=" << o.permutations << " seed=" << o.forest.seed << '\n';
    out << TestResult::csv_header() << '\n' << result.to_csv_row() << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// power

struct PowerOptions {
  std::vector<std::string> settings;
  std::vector<std::string> methods;
  std::vector<int> dims{1, 2, 5, 10, 20, 50, 100};
  int n = 100;
  int reps = 200;
  double alpha = 0.05;
  std::string out_dir;
  std::string noise_config;
  ForestOptions forest;
};

std::string cell_key(const std::string& setting, const std::string& method, int p, std::uint64_t seed) {
  return setting + "," + method + "," + std::to_string(p) + "," + std::to_string(seed);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

int cmd_power(const PowerOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<Setting> settings;
  for (const std::string& name : split_list(o.settings)) settings.push_back(parse_setting(name));
  if (o.settings.empty()) settings.assign(kAllSettings.begin(), kAllSettings.end());
  if (settings.empty()) throw UsageError("empty setting list");
  std::vector<Method> methods;
  for (const std::string& name : split_list(o.methods)) methods.push_back(parse_method(name));
  if (methods.empty()) throw UsageError("empty method list");
  if (o.dims.empty()) throw UsageError("empty dimension list");
  for (int p : o.dims) {
    if (p < 1) throw UsageError("dimensions must be >= 1");
  }
  if (o.reps < 20) throw UsageError("--reps must be >= 20");
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  if (o.n < 2) throw UsageError("--n must be >= 2");

  const NoiseTable noise = o.noise_config.empty() ? builtin_noise_table() : read_noise_table(o.noise_config);

  MethodConfig cfg;
  cfg.num_trees = o.forest.trees;
  cfg.mtry = o.forest.mtry;
  cfg.min_leaf = o.forest.min_leaf;
  cfg.max_depth = o.forest.max_depth;
  if (o.forest.bootstrap) {
    cfg.supervised_bootstrap = *o.forest.bootstrap;
    cfg.unsupervised_bootstrap = *o.forest.bootstrap;
  }
  cfg.mixture = mixture_of(o.forest);
  cfg.threads = 1;

  std::ostringstream header;
  header << "# rfkernel power n=" << o.n << " replicates=" << o.reps << " alpha=" << fmt(o.alpha)
         << " trees=" << cfg.num_trees << " mtry=" << cfg.mtry << " min_leaf=" << cfg.min_leaf
         << " max_depth=" << cfg.max_depth << " supervised_bootstrap=" << cfg.supervised_bootstrap
         << " unsupervised_bootstrap=" << cfg.unsupervised_bootstrap << " pi=" << fmt(cfg.mixture.pi)
         << " r=" << fmt(cfg.mixture.r) << " seed=" << o.forest.seed << '\n';
  header << "# settings=";
  for (std::size_t i = 0; i < settings.size(); ++i) {
    header << (i ? "," : "") << to_string(settings[i]) << ':' << fmt(noise.at(to_string(settings[i])));
  }
  header << " methods=";
  for (std::size_t i = 0; i < methods.size(); ++i) header << (i ? "," : "") << to_string(methods[i]);
  header << " dims=";
  for (std::size_t i = 0; i < o.dims.size(); ++i) header << (i ? "," : "") << o.dims[i];
  header << '\n';
  const std::string header_text = header.str();
  const std::string column_line = "setting,method,n,p,noise,replicates,alpha,power,seed";

  namespace fs = std::filesystem;
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  const fs::path power_path = dir / "power.csv";
  const fs::path journal_path = dir / "power.journal";

  std::set<std::string> done;
  std::map<std::string, std::string> rows;
  if (fs::exists(power_path)) {
    std::ifstream in(power_path, std::ios::binary);
    std::string existing((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (existing.rfind(header_text + column_line + '\n', 0) != 0) {
      throw std::runtime_error(power_path.string() +
                               " was written with a different configuration; use a fresh --out-dir");
    }
    for (const std::string& key : read_lines(journal_path)) {
      if (!key.empty()) done.insert(key);
    }
    for (const std::string& line : read_lines(power_path)) {
      if (line.empty() || line.front() == '#' || line == column_line) continue;
      // setting,method,n,p,... -> key setting,method,p,seed
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string part;
      while (std::getline(ss, part, ',')) f.push_back(part);
      if (f.size() != 9) continue;
      rows[f[0] + "," + f[1] + "," + f[3] + "," + f[8]] = line;
    }
  }

  // Rewrite the table from the completed cells only, in canonical order.
  std::vector<std::string> canonical;
  std::map<std::string, double> power_of;
  {
    std::ofstream table(power_path, std::ios::binary | std::ios::trunc);
    std::ofstream journal(journal_path, std::ios::binary | std::ios::trunc);
    table << header_text << column_line << '\n';
    for (Setting s : settings) {
      for (int p : o.dims) {
        for (Method m : methods) {
          const std::string key = cell_key(to_string(s), to_string(m), p, o.forest.seed);
          if (done.count(key) && rows.count(key)) {
            table << rows[key] << '\n';
            journal << key << '\n';
          }
        }
      }
    }
  }

  std::ofstream table(power_path, std::ios::binary | std::ios::app);
  std::ofstream journal(journal_path, std::ios::binary | std::ios::app);
  for (Setting s : settings) {
    const SimSetting base{s, 1, noise.at(to_string(s))};
    for (int p : o.dims) {
      for (Method m : methods) {
        const std::string key = cell_key(to_string(s), to_string(m), p, o.forest.seed);
        std::string row;
        if (done.count(key) && rows.count(key)) {
          row = rows[key];
        } else {
          SimSetting setting = base;
          setting.p = p;
          const PowerReport report =
              estimate_power(setting, m, o.n, o.reps, o.alpha, cfg, o.forest.seed, o.forest.threads);
          std::ostringstream line;
          line << to_string(s) << ',' << to_string(m) << ',' << o.n << ',' << p << ',' << fmt(setting.noise) << ','
               << o.reps << ',' << fmt(o.alpha) << ',' << fmt(report.power) << ',' << o.forest.seed;
          row = line.str();
          table << row << '\n' << std::flush;
          journal << key << '\n' << std::flush;
          err << "done " << key << " power=" << report.power << '\n';
        }
        const auto comma = row.rfind(',', row.rfind(',') - 1);
        power_of[key] = std::stod(row.substr(comma + 1, row.rfind(',') - comma - 1));
      }
    }
  }

  {
    std::ofstream by_dim(dir / "power_by_dimension.csv", std::ios::binary | std::ios::trunc);
    by_dim << header_text << "setting,p";
    for (Method m : methods) by_dim << ',' << to_string(m);
    by_dim << '\n';
    for (Setting s : settings) {
      for (int p : o.dims) {
        by_dim << to_string(s) << ',' << p;
        for (Method m : methods) by_dim << ',' << fmt(power_of[cell_key(to_string(s), to_string(m), p, o.forest.seed)]);
        by_dim << '\n';
      }
    }
  }

  std::ofstream averages(dir / "averages.csv", std::ios::binary | std::ios::trunc);
  averages << header_text << "setting";
  for (Method m : methods) averages << ',' << to_string(m);
  averages << '\n';
  std::map<Method, double> grand;
  for (Setting s : settings) {
    averages << to_string(s);
    for (Method m : methods) {
      double mean = 0.0;
      for (int p : o.dims) mean += power_of[cell_key(to_string(s), to_string(m), p, o.forest.seed)];
      mean /= static_cast<double>(o.dims.size());
      grand[m] += mean / static_cast<double>(settings.size());
      averages << ',' << fmt(mean);
    }
    averages << '\n';
  }
  averages << "average";
  for (Method m : methods) averages << ',' << fmt(grand[m]);
  averages << '\n';

  out << "wrote " << power_path.string() << ", " << (dir / "power_by_dimension.csv").string() << ", "
      << (dir / "averages.csv").string() << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decision-forest characteristic kernels and independence tests"};
  app.require_subcommand(1);

  KernelOptions kernel;
  CLI::App* kernel_cmd = app.add_subcommand("kernel", "write the characteristic forest kernel of a CSV sample");
  kernel_cmd->add_option("--x", kernel.x_path, "headerless numeric CSV of observations")->required();
  auto* y_opt = kernel_cmd->add_option("--y", kernel.y_path, "single-column CSV response (supervised mode)");
  kernel_cmd->add_option("--y-column", kernel.y_column, "use this 0-based column of x as the response")
      ->check(CLI::NonNegativeNumber)
      ->excludes(y_opt);
  kernel_cmd->add_option("--out", kernel.out_path, "output path (default stdout)");
  add_forest_options(kernel_cmd, kernel.forest, 500);

  TestOptions test;
  CLI::App* test_cmd = app.add_subcommand("test", "permutation test of independence between two CSV samples");
  test_cmd->add_option("--x", test.x_path)->required();
  test_cmd->add_option("--y", test.y_path)->required();
  test_cmd->add_option("--method", test.method)->required()->check(CLI::IsMember({"srf", "urf", "dcorr", "hsic-gaussian"}));
  test_cmd->add_option("--permutations,-B", test.permutations)->check(CLI::PositiveNumber)->capture_default_str();
  test_cmd->add_option("--format", test.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  add_forest_options(test_cmd, test.forest, 500);

  PowerOptions power;
  CLI::App* power_cmd = app.add_subcommand("power", "simulation power sweep");
  power_cmd->add_option("--settings", power.settings, "comma-separated settings (default all 12)");
  power_cmd->add_option("--methods", power.methods, "comma-separated methods: srf,urf,dcorr,hsic-gaussian")
      ->required()
      ->expected(0, -1);
  power_cmd->add_option("--dims", power.dims, "comma-separated dimensions p")->delimiter(',');
  power_cmd->add_option("--n", power.n)->capture_default_str();
  power_cmd->add_option("--reps", power.reps, "replicates per arm")->capture_default_str();
  power_cmd->add_option("--alpha", power.alpha)->capture_default_str();
  power_cmd->add_option("--out-dir", power.out_dir)->required();
  power_cmd->add_option("--noise-config", power.noise_config, "JSON noise table (default: built-in calibration)");
  add_forest_options(power_cmd, power.forest, 100);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (kernel_cmd->parsed()) return cmd_kernel(kernel, out, err);
    if (test_cmd->parsed()) return cmd_test(test, out, err);
    if (power_cmd->parsed()) return cmd_power(power, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace rfk::cli
