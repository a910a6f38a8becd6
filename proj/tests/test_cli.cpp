#include "lls/io.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lls;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("lls_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
  std::string cmd = std::string(LLS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("basis csv round-trips through the design sidecar") {
  TempDir dir;
  Basis basis = lls::testing::worked_basis();
  write_basis_csv(basis, dir.file("basis.csv"));
  Basis back = read_basis_csv(dir.file("basis.csv"));
  CHECK((back.vectors - basis.vectors).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.design == basis.design);
}

TEST_CASE("scores csv round-trips") {
  TempDir dir;
  MixingEstimate est;
  est.basis = lls::testing::worked_basis();
  ScoredPattern sp;
  sp.pattern = lls::testing::pat({1, 2, 1});
  sp.weight = 0.25;
  sp.g = Vec(2);
  sp.g << 0.625, 0.375;
  sp.residual = 0.0125;
  est.support = {sp};
  write_scores_csv(est, dir.file("scores.csv"));
  MixingEstimate back = read_scores_csv(dir.file("scores.csv"), est.basis);
  REQUIRE(back.support.size() == 1);
  CHECK(back.support[0].pattern == sp.pattern);
  CHECK(back.support[0].weight == sp.weight);
  CHECK(back.support[0].g(0) == sp.g(0));
  CHECK(back.support[0].residual == sp.residual);
}

TEST_CASE("matrix dump writes question marks and a metadata sidecar") {
  TempDir dir;
  SurveyDesign d;
  d.levels = {2, 2};
  Dataset data(d, {{1, 1}, {2, 1}, {1, 2}});
  auto [fm, se] = build_frequency_matrix(data);
  write_matrix_csv(fm, dir.file("m.csv"));
  std::string text = slurp(dir.file("m.csv"));
  CHECK(text.find('?') != std::string::npos);
  std::string meta = slurp(dir.file("m.csv") + ".meta.json");
  CHECK(meta.find("\"records\": 3") != std::string::npos);
}

TEST_CASE("config files parse key=value pairs with comments") {
  TempDir dir;
  std::ofstream(dir.file("exp.cfg")) << "# table 1 cell\nexperiment = recovery\nk=2\n"
                                     << "j = 60\ni=1430\nreplications=10\nseed=7\n"
                                     << "design=simplex-grid\naccept=0.05\n";
  auto kv = read_config_file(dir.file("exp.cfg"));
  CHECK(kv.at("experiment") == "recovery");
  ExperimentConfig config = experiment_config_from(kv);
  CHECK(config.K == 2);
  CHECK(config.J == 60);
  CHECK(config.I == 1430);
  CHECK(config.seed == 7);
  CHECK(config.accept == 0.05);

  std::ofstream(dir.file("bad.cfg")) << "no equals sign here\n";
  CHECK_THROWS_AS(read_config_file(dir.file("bad.cfg")), input_error);
}

TEST_CASE("cli pipeline: simulate, rank, fit, scores, cluster") {
  TempDir dir;
  std::string data = dir.file("data.csv");
  REQUIRE(run_cli("simulate --k 2 --j 12 --i 400 --seed 11 --out " + data + " --truth-dir " +
                  dir.file("truth")) == 0);
  CHECK(fs::exists(dir.file("truth") + "/basis.csv"));

  REQUIRE(run_cli("rank --data " + data) == 0);
  REQUIRE(run_cli("fit --data " + data + " --k 2 --out " + dir.file("basis.csv") +
                  " --manifest " + dir.file("fit.json")) == 0);

  // Without --k the fitter chains the rank estimate and records the choice.
  REQUIRE(run_cli("fit --data " + data + " --out " + dir.file("basis_auto.csv") + " --manifest " +
                  dir.file("fit_auto.json")) == 0);
  std::string auto_manifest = slurp(dir.file("fit_auto.json"));
  CHECK(auto_manifest.find("K chosen by rank estimation") != std::string::npos);
  CHECK(auto_manifest.find("\"K\": 2") != std::string::npos);
  REQUIRE(run_cli("scores --data " + data + " --basis " + dir.file("basis.csv") + " --out " +
                  dir.file("scores.csv") + " --hist " + dir.file("hist.csv")) == 0);
  REQUIRE(run_cli("cluster --scores " + dir.file("scores.csv") + " --basis " +
                  dir.file("basis.csv") + " --method kmeans --k 2 --seed 5 --out " +
                  dir.file("clusters.csv")) == 0);
  REQUIRE(run_cli("cluster --scores " + dir.file("scores.csv") + " --basis " +
                  dir.file("basis.csv") + " --method hier --k 2 --linkage complete --out " +
                  dir.file("clusters_h.csv")) == 0);
  REQUIRE(run_cli("complete --data " + data + " --basis " + dir.file("basis.csv") + " --out " +
                  dir.file("matrix.csv")) == 0);
  REQUIRE(run_cli("complete --data " + data + " --raw --out " + dir.file("raw.csv")) == 0);
  REQUIRE(run_cli("basis --data " + data + " --basis " + dir.file("basis.csv") +
                  " --cluster-means --k 2 --seed 5 --out " + dir.file("means.csv")) == 0);

  // Pure types from the truth sidecar refit through the basis command.
  REQUIRE(run_cli("basis --basis " + dir.file("basis.csv") + " --pure-types " +
                  dir.file("truth") + "/basis.csv --out " + dir.file("pure.csv")) == 0);
  CHECK(!slurp(dir.file("means.csv")).empty());
  CHECK(!slurp(dir.file("pure.csv")).empty());
  CHECK(slurp(dir.file("raw.csv")).find('?') != std::string::npos);

  CHECK(slurp(dir.file("scores.csv")).find("pattern,weight,g1,g2") == 0);
  CHECK(!slurp(dir.file("hist.csv")).empty());
  CHECK(!slurp(dir.file("clusters.csv")).empty());
  std::string manifest = slurp(dir.file("fit.json"));
  CHECK(manifest.find("\"command\": \"fit\"") != std::string::npos);
}

TEST_CASE("cli outputs are byte-identical across reruns") {
  TempDir dir;
  std::string data = dir.file("data.csv");
  REQUIRE(run_cli("simulate --k 2 --j 10 --i 200 --seed 3 --out " + data) == 0);
  for (int round = 1; round <= 2; ++round) {
    REQUIRE(run_cli("fit --data " + data + " --k 2 --out " + dir.file("b" + std::to_string(round) +
                                                                      ".csv")) == 0);
    REQUIRE(run_cli("scores --data " + data + " --basis " +
                    dir.file("b" + std::to_string(round) + ".csv") + " --out " +
                    dir.file("s" + std::to_string(round) + ".csv")) == 0);
  }
  CHECK(slurp(dir.file("b1.csv")) == slurp(dir.file("b2.csv")));
  CHECK(slurp(dir.file("s1.csv")) == slurp(dir.file("s2.csv")));

  // Rerunning simulate reproduces the dataset byte for byte.
  std::string copy = dir.file("data2.csv");
  REQUIRE(run_cli("simulate --k 2 --j 10 --i 200 --seed 3 --out " + copy) == 0);
  CHECK(slurp(data) == slurp(copy));
}

TEST_CASE("cli rank accepts injected singular values") {
  TempDir dir;
  std::ofstream(dir.file("sv.txt"))
      << "39.112 3.217 1.464 0.652 0.363 0.310 0.243 0.220 0.198 0.148\n";
  std::string out = dir.file("rank_out.json");
  REQUIRE(run_cli("rank --sv-file " + dir.file("sv.txt") + " --threshold 0.584 --manifest " +
                  out) == 0);
  CHECK(slurp(out).find("\"K\": 4") != std::string::npos);
}

TEST_CASE("cli error paths exit with code 2") {
  TempDir dir;
  CHECK(run_cli("rank --data " + dir.file("nope.csv")) == 2);

  // A structurally valid basis file violating the sum invariants is an
  // input error, not a numerical failure.
  std::ofstream(dir.file("bad_basis.csv")) << "0.9,0.2\n0.1,0.8\n";
  std::ofstream(dir.file("bad_basis.csv.design")) << "2\n";
  std::ofstream(dir.file("tiny.csv")) << "1\n2\n";
  CHECK(run_cli("scores --data " + dir.file("tiny.csv") + " --basis " +
                dir.file("bad_basis.csv")) == 2);
  std::ofstream(dir.file("empty.csv")) << "";
  CHECK(run_cli("rank --data " + dir.file("empty.csv")) == 2);
  std::ofstream(dir.file("bad.cfg")) << "experiment=unknown\n";
  CHECK(run_cli("experiment --config " + dir.file("bad.cfg") + " --out-dir " + dir.file("out")) ==
        2);
  CHECK(run_cli("scores --data " + dir.file("nope.csv") + " --basis nope2") == 2);
  CHECK(run_cli("definitely-not-a-subcommand") == 2);
}

TEST_CASE("cli experiment runs a desk-scale recovery config") {
  TempDir dir;
  std::ofstream(dir.file("exp.cfg")) << "experiment=recovery\nk=2\nj=12\ni=200\n"
                                     << "replications=2\nseed=5\ndesign=simplex-grid\n";
  REQUIRE(run_cli("experiment --config " + dir.file("exp.cfg") + " --out-dir " +
                  dir.file("out")) == 0);
  std::string report = slurp(dir.file("out") + "/report.json");
  CHECK(report.find("\"median_distance\"") != std::string::npos);
  CHECK(fs::exists(dir.file("out") + "/report.csv"));

  // A seed override changes the outcome deterministically.
  REQUIRE(run_cli("experiment --config " + dir.file("exp.cfg") + " --out-dir " + dir.file("out2") +
                  " --seed 6") == 0);
  CHECK(slurp(dir.file("out2") + "/report.json") != report);
}
