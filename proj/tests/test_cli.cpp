#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "bmme/matrixio.hpp"
#include "cli.hpp"

using namespace bmme;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "bmme_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string data_file() {
  const auto p = scratch() / "x.csv";
  if (!fs::exists(p)) {
    REQUIRE(invoke({"synth", "--m", "12", "--n", "15", "--rank", "3", "--noise", "poisson",
                 "--scale", "3", "--seed", "1", "--out", p.string()})
                .code == 0);
  }
  return p.string();
}

}  // namespace

TEST_CASE("solve requires a rank") {
  const auto r = invoke({"solve", "--data", data_file()});
  CHECK(r.code == 2);
  CHECK(r.err.find("--rank") != std::string::npos);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"solve", "--data", data_file(), "--rank", "2", "--algo", "ccd"}).code == 2);
}

TEST_CASE("solve prints one JSON summary line") {
  const auto r = invoke({"solve", "--data", data_file(), "--rank", "3", "--max-iter", "20"});
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
  const auto j = json::parse(r.out);
  for (const char* key : {"algo", "seed", "final_objective", "final_rel_objective", "iters",
                          "wall_seconds", "kkt_residual"})
    CHECK(j.contains(key));
  CHECK(j["algo"] == "mue");
  CHECK(j["iters"] == 20);
  CHECK(j["kkt_residual"].is_number());

  const auto mv = json::parse(
      invoke({"solve", "--data", data_file(), "--rank", "3", "--max-iter", "20", "--algo", "minvol-e"})
          .out);
  CHECK(mv["kkt_residual"].is_null());
  // logdet of a column-stochastic gram plus delta I is negative, so no sign check
  CHECK(mv["final_rel_objective"].is_number());
}

TEST_CASE("validation failures exit nonzero") {
  CHECK(invoke({"solve", "--data", data_file(), "--rank", "2", "--beta", "3"}).code == 1);
  CHECK(invoke({"solve", "--data", data_file(), "--rank", "0"}).code == 1);
  CHECK(invoke({"solve", "--data", data_file(), "--rank", "2", "--q", "1"}).code == 1);
  CHECK(invoke({"solve", "--data", (scratch() / "missing.csv").string(), "--rank", "2"}).code == 1);
  const auto neg = scratch() / "neg.csv";
  std::ofstream(neg) << "1,-2\n3,4\n";
  CHECK(invoke({"solve", "--data", neg.string(), "--rank", "1"}).code == 1);
}

TEST_CASE("mue with schedule none reproduces mu; a fixed seed reproduces itself") {
  const auto dir = scratch();
  auto run = [&](const std::string& algo, const std::string& name,
                 std::vector<std::string> extra) {
    std::vector<std::string> args{"solve",      "--data",   data_file(), "--rank",
                                  "3",          "--algo",   algo,        "--max-iter",
                                  "40",         "--trace",  (dir / name).string(),
                                  "--no-timing", "--kkt-every", "10"};
    args.insert(args.end(), extra.begin(), extra.end());
    REQUIRE(invoke(args).code == 0);
    return slurp(dir / name);
  };
  const auto mu = run("mu", "mu.csv", {});
  const auto none = run("mue", "none.csv", {"--schedule", "none"});
  CHECK(mu == none);
  CHECK(mu.rfind(std::string(kTraceCsvHeader), 0) == 0);

  const auto a = run("mue", "a.csv", {"--seed", "7"});
  const auto b = run("mue", "b.csv", {"--seed", "7"});
  CHECK(a == b);
  CHECK(a != mu);

  const auto ja = run("minvol-e", "a.json", {"--seed", "7"});
  const auto jb = run("minvol-e", "b.json", {"--seed", "7"});
  CHECK(ja == jb);
  CHECK(json::parse(ja).is_array());
}

TEST_CASE("synth writes matrices and factors in every format") {
  const auto dir = scratch();
  for (const std::string ext : {"csv", "mtx", "bin"}) {
    const auto x = dir / ("s." + ext), w = dir / ("w." + ext), h = dir / ("h." + ext);
    REQUIRE(invoke({"synth", "--m", "6", "--n", "5", "--rank", "2", "--seed", "3", "--out",
                 x.string(), "--w-out", w.string(), "--h-out", h.string()})
                .code == 0);
    const auto fmt = ext == "csv" ? MatrixFormat::csv
                     : ext == "mtx" ? MatrixFormat::matrix_market
                                    : MatrixFormat::dense_binary;
    const Matrix X = read_matrix(x, fmt);
    const auto d = synth_lowrank({6, 5, 2, Noise::none, 1.0, 3});
    CHECK(X.rows() == 6);
    CHECK(X.cols() == 5);
    CHECK(read_matrix(w, fmt).rows() == 6);
    CHECK(read_matrix(h, fmt).cols() == 5);
    if (fmt != MatrixFormat::csv) CHECK(X == d.X);
  }
  CHECK(invoke({"synth", "--m", "3", "--n", "3", "--rank", "5", "--out", (dir / "z.csv").string()})
            .code == 1);
  CHECK(invoke({"synth", "--m", "3", "--n", "3", "--rank", "1", "--out", (dir / "z.txt").string()})
            .code == 1);
}

TEST_CASE("bench with one seed and one algorithm returns the raw curve") {
  const Matrix X = read_matrix(fs::path(data_file()), MatrixFormat::csv);
  cli::BenchOptions o;
  o.problem.rank = 3;
  o.problem.max_iter = 30;
  o.algos = {cli::Algo::mu};
  o.n_seeds = 1;
  o.jobs = 1;
  const auto rep = cli::run_bench(X, o);
  REQUIRE(rep.runs.size() == 1);
  const auto& recs = rep.runs[0].trace.records();
  REQUIRE(rep.iter_curves[0].y.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i)
    CHECK(rep.iter_curves[0].y[i] == recs[i].objective - rep.e_min);
  CHECK(rep.e_min == rep.runs[0].final_objective);
  CHECK(rep.crossings.empty());
}

TEST_CASE("bench crossing statistic and e_min") {
  const Matrix X = read_matrix(fs::path(data_file()), MatrixFormat::csv);
  cli::BenchOptions o;
  o.problem.rank = 3;
  o.problem.max_iter = 60;
  o.n_seeds = 4;
  o.jobs = 3;
  const auto rep = cli::run_bench(X, o);
  double e_min = INFINITY;
  for (const auto& r : rep.runs) e_min = std::min(e_min, r.final_objective);
  CHECK(rep.e_min == e_min);
  REQUIRE(rep.crossings.size() == 1);
  for (const auto& h : rep.crossings[0].per_seed)
    if (h) CHECK(*h <= 60);
  CHECK(rep.cap_violations == 0);

  // worker count must not change results
  o.jobs = 1;
  const auto serial = cli::run_bench(X, o);
  for (std::size_t i = 0; i < rep.runs.size(); ++i)
    CHECK(serial.runs[i].final_objective == rep.runs[i].final_objective);
  CHECK(serial.crossings[0].per_seed == rep.crossings[0].per_seed);

  CHECK(cli::median_reached({3, std::nullopt, 5}) == 5.0);
  CHECK_FALSE(cli::median_reached({3, std::nullopt, std::nullopt}).has_value());
  CHECK(cli::median_reached({1, 2, 3, 4}) == 2.5);
}

TEST_CASE("bench command writes curves and a JSON report") {
  const auto dir = scratch() / "bench";
  fs::remove_all(dir);
  const auto r = invoke({"bench", "--data", data_file(), "--rank", "3", "--seeds", "2",
                      "--max-iter", "25", "--algos", "mu,mue", "--out-dir", dir.string(),
                      "--emit-traces", "--beta", "1"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["runs"].size() == 4);
  CHECK(j["crossings"].size() == 1);
  const auto iter_csv = slurp(dir / "curves_iter.csv");
  CHECK(iter_csv.rfind("iter,mu,mue\n", 0) == 0);
  CHECK(std::count(iter_csv.begin(), iter_csv.end(), '\n') == 27);
  CHECK(slurp(dir / "curves_time.csv").rfind("seconds,mu,mue\n", 0) == 0);
  CHECK(fs::exists(dir / "trace_mue_seed1.csv"));
}

TEST_CASE("default synthetic bench: MUe crosses MU's final objective within budget") {
  const auto r = invoke({"bench"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  REQUIRE(j["crossings"].size() == 1);
  const auto& med = j["crossings"][0]["median"];
  REQUIRE(med.is_number());
  CHECK(med.get<double>() < 200);
}
