#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "rfk/cli.hpp"
#include "rfk/data.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "rfkernel");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = rfk::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("rfk_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& contents = "") const {
    const fs::path p = path_ / name;
    if (!contents.empty()) std::ofstream(p) << contents;
    return p.string();
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

rfk::DataMatrix csv_body(const std::string& text) {
  std::istringstream in(text);
  return rfk::read_csv(in);
}

const char* kSample =
    "0.1,1.5\n0.7,-0.2\n-0.4,0.9\n1.3,0.3\n-1.1,-0.8\n0.2,0.4\n0.9,1.1\n-0.6,0.0\n";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"kernel"}).code == 2);
  CHECK(invoke({"kernel", "--x", "a.csv", "--bogus"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("kernel subcommand") {
  TempDir dir;
  const std::string x = dir.file("x.csv", kSample);

  SUBCASE("output header and matrix") {
    const Run r = invoke({"kernel", "--x", x, "--trees", "25", "--seed", "3"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("# rfkernel kernel mode=unsupervised", 0) == 0);
    CHECK(r.out.find("# m=25,identity_partitions=1,pi=0.01,") != std::string::npos);
    CHECK(r.out.find("min_eigenvalue=") != std::string::npos);
    const rfk::DataMatrix k = csv_body(r.out);
    CHECK(k.rows() == 8);
    CHECK(k.cols() == 8);
    CHECK(k.values() == k.values().transpose());
    CHECK(k.values().diagonal() == Eigen::VectorXd::Ones(8));
  }
  SUBCASE("same seed gives identical files") {
    const std::string a = dir.file("a.csv");
    const std::string b = dir.file("b.csv");
    REQUIRE(invoke({"kernel", "--x", x, "--trees", "30", "--seed", "5", "--out", a}).code == 0);
    REQUIRE(invoke({"kernel", "--x", x, "--trees", "30", "--seed", "5", "--threads", "3", "--out", b}).code == 0);
    CHECK(slurp(a) == slurp(b));
    const std::string c = dir.file("c.csv");
    REQUIRE(invoke({"kernel", "--x", x, "--trees", "30", "--seed", "6", "--out", c}).code == 0);
    CHECK(slurp(a) != slurp(c));
  }
  SUBCASE("seed from the environment") {
    ::setenv(rfk::cli::kSeedEnv, "77", 1);
    const Run env = invoke({"kernel", "--x", x, "--trees", "10"});
    ::unsetenv(rfk::cli::kSeedEnv);
    CHECK(env.out.find(",seed=77,") != std::string::npos);
    CHECK(env.out == invoke({"kernel", "--x", x, "--trees", "10", "--seed", "77"}).out);
  }
  SUBCASE("constant data is degenerate") {
    const std::string flat = dir.file("flat.csv", "2,2\n2,2\n2,2\n");
    const Run r = invoke({"kernel", "--x", flat});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("# warning: degenerate") != std::string::npos);
    CHECK(r.err.find("degenerate") != std::string::npos);
    CHECK(csv_body(r.out).values() == Eigen::MatrixXd::Ones(3, 3));
  }
  SUBCASE("single-leaf tree mixed half and half with the identity") {
    // One all-in-one-cell tree plus one identity tree: K = 0.5 off the diagonal before the
    // transform, 1 - sqrt(0.5) after it.
    const Run r = invoke({"kernel", "--x", x, "--trees", "1", "--pi", "0.5", "--min-leaf", "8"});
    REQUIRE(r.code == 0);
    const rfk::DataMatrix k = csv_body(r.out);
    CHECK(k(0, 1) == doctest::Approx(1.0 - std::sqrt(0.5)).epsilon(1e-15));
    CHECK(k(3, 7) == k(0, 1));
  }
  SUBCASE("supervised via a column of x") {
    const Run r = invoke({"kernel", "--x", x, "--y-column", "1", "--trees", "10"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("mode=supervised n=8 p=1") != std::string::npos);
    CHECK(invoke({"kernel", "--x", x, "--y-column", "5"}).code == 2);
  }
  SUBCASE("malformed input") {
    const std::string bad = dir.file("bad.csv", "1,2\n3,x\n");
    const Run r = invoke({"kernel", "--x", bad});
    CHECK(r.code == 1);
    CHECK(r.err.find("row 2, column 2") != std::string::npos);
    const std::string nan = dir.file("nan.csv", "1,2\nnan,3\n");
    CHECK(invoke({"kernel", "--x", nan}).code == 1);
    CHECK(invoke({"kernel", "--x", dir.file("missing.csv")}).code == 1);
    CHECK(invoke({"kernel", "--x", x, "--pi", "0"}).code == 2);
    CHECK(invoke({"kernel", "--x", x, "--r", "1"}).code == 2);
  }
}

TEST_CASE("test subcommand") {
  TempDir dir;
  const std::string x = dir.file("x.csv", kSample);
  const std::string y = dir.file("y.csv", "1\n2\n3\n4\n5\n6\n7\n8\n");

  SUBCASE("csv record") {
    const Run r = invoke({"test", "--x", x, "--y", y, "--method", "dcorr", "-B", "99", "--seed", "2"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("# rfkernel test method=dcorr", 0) == 0);
    CHECK(r.out.find("\nmethod,n,statistic,p_value,B,seed\ndcorr,8,") != std::string::npos);
    CHECK(r.out.find(",99,2\n") != std::string::npos);
  }
  SUBCASE("json record") {
    const Run r = invoke({"test", "--x", x, "--y", x, "--method", "dcorr", "--format", "json", "-B", "999"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind(R"({"method":"dcorr","n":8,"statistic":1,)", 0) == 0);
  }
  SUBCASE("forest methods run") {
    for (const char* m : {"srf", "urf", "hsic-gaussian"}) {
      CAPTURE(m);
      CHECK(invoke({"test", "--x", x, "--y", y, "--method", m, "--trees", "10", "-B", "20"}).code == 0);
    }
  }
  SUBCASE("errors") {
    CHECK(invoke({"test", "--x", x, "--y", y, "--method", "unknown"}).code == 2);
    const std::string short_y = dir.file("short.csv", "1\n2\n3\n");
    const Run r = invoke({"test", "--x", x, "--y", short_y, "--method", "dcorr"});
    CHECK(r.code == 2);
    CHECK(r.err.find("8") != std::string::npos);
    CHECK(r.err.find("3") != std::string::npos);
    CHECK(invoke({"test", "--x", x, "--y", x, "--method", "srf"}).code == 2);
  }
}

TEST_CASE("power subcommand") {
  TempDir dir;
  const std::string out = (dir.path() / "sweep").string();
  const std::vector<std::string> args = {"power", "--settings", "linear,circle", "--methods", "dcorr,urf",
                                         "--dims", "1,2", "--reps", "20", "--trees", "5", "--n", "30",
                                         "--out-dir", out};
  const Run first = invoke(args);
  REQUIRE(first.code == 0);
  const std::string table = slurp(out + "/power.csv");
  CHECK(table.rfind("# rfkernel power n=30 replicates=20", 0) == 0);
  CHECK(table.find("\nsetting,method,n,p,noise,replicates,alpha,power,seed\nlinear,dcorr,30,1,") != std::string::npos);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3 + 8);
  CHECK(slurp(out + "/power.journal").find("circle,urf,2,1\n") != std::string::npos);
  CHECK(slurp(out + "/averages.csv").find("\nsetting,dcorr,urf\nlinear,") != std::string::npos);
  CHECK(slurp(out + "/power_by_dimension.csv").find("\nsetting,p,dcorr,urf\n") != std::string::npos);

  SUBCASE("resume skips finished cells and reproduces the files") {
    const std::string averages = slurp(out + "/averages.csv");
    // Drop the last two cells from the journal, as if the run had been interrupted.
    std::string journal = slurp(out + "/power.journal");
    for (int k = 0; k < 2; ++k) journal.erase(journal.rfind('\n', journal.size() - 2) + 1);
    std::ofstream(out + "/power.journal", std::ios::binary | std::ios::trunc) << journal;
    const Run resumed = invoke(args);
    REQUIRE(resumed.code == 0);
    CHECK(std::count(resumed.err.begin(), resumed.err.end(), '\n') == 2);
    CHECK(slurp(out + "/power.csv") == table);
    CHECK(slurp(out + "/averages.csv") == averages);
  }
  SUBCASE("a different configuration is refused") {
    std::vector<std::string> changed = args;
    changed[10] = "40";
    CHECK(invoke(changed).code == 1);
  }
  SUBCASE("bad lists") {
    CHECK(invoke({"power", "--methods", "--out-dir", out}).code == 2);
    CHECK(invoke({"power", "--methods", "mgc", "--out-dir", out}).code == 2);
    CHECK(invoke({"power", "--settings", "sine", "--methods", "dcorr", "--out-dir", out}).code == 2);
  }
}
