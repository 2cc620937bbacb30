#include "cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "bmme/errors.hpp"
#include "bmme/matrixio.hpp"

namespace bmme::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Algo parse_algo(std::string_view name) {
  if (name == "mu") return Algo::mu;
  if (name == "mue") return Algo::mue;
  if (name == "minvol") return Algo::minvol;
  if (name == "minvol-e") return Algo::minvol_e;
  throw ParseError("unknown algorithm '" + std::string(name) + "'");
}

std::string_view to_string(Algo a) {
  switch (a) {
    case Algo::mu: return "mu";
    case Algo::mue: return "mue";
    case Algo::minvol: return "minvol";
    case Algo::minvol_e: return "minvol-e";
  }
  return "?";
}

bool is_extrapolated(Algo a) { return a == Algo::mue || a == Algo::minvol_e; }

Algo counterpart(Algo a) {
  if (a == Algo::mue) return Algo::mu;
  if (a == Algo::minvol_e) return Algo::minvol;
  return a;
}

RunOutcome solve_once(const Matrix& X, const ProblemOptions& opts, std::uint64_t seed) {
  if (opts.rank < 1) throw DomainError("rank must be at least 1");
  RunConfig rc;
  rc.max_iter = opts.max_iter;
  rc.max_seconds = opts.max_seconds;
  rc.residual_every = opts.kkt_every;
  rc.record_time = opts.record_time;
  const ExtrapolationConfig ext{is_extrapolated(opts.algo) ? opts.schedule : Schedule::none,
                                opts.safeguard};

  RunOutcome out;
  out.algo = opts.algo;
  out.seed = seed;
  if (opts.algo == Algo::mu || opts.algo == Algo::mue) {
    BetaNmfConfig cfg;
    cfg.beta = Beta(opts.beta);
    cfg.rank = opts.rank;
    cfg.epsilon = opts.epsilon;
    cfg.seed = seed;
    NmfResult r = solve_mue(X, cfg, rc, ext);
    out.kkt_residual = kkt_residual(X, r.factors.W, r.factors.H, cfg.beta, cfg.epsilon);
    out.factors = std::move(r.factors);
    out.trace = std::move(r.trace);
    out.monitor = std::move(r.monitor);
    out.iters = r.iterations;
    out.wall_seconds = r.wall_seconds;
  } else {
    MinVolConfig cfg;
    cfg.lambda_tilde = opts.lambda_tilde;
    cfg.delta = opts.delta;
    cfg.epsilon = opts.epsilon;
    cfg.rank = opts.rank;
    cfg.seed = seed;
    MinVolResult r = solve_minvol(X, cfg, rc, ext);
    out.lambda1 = r.lambda1;
    out.factors = std::move(r.factors);
    out.trace = std::move(r.trace);
    out.monitor = std::move(r.monitor);
    out.iters = r.iterations;
    out.wall_seconds = r.wall_seconds;
  }
  out.final_objective = out.trace.back().objective;
  out.final_rel_objective = out.trace.back().rel_objective;
  return out;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string summary_json(const RunOutcome& r) {
  json j;
  j["algo"] = to_string(r.algo);
  j["seed"] = r.seed;
  j["final_objective"] = number_or_null(r.final_objective);
  j["final_rel_objective"] = number_or_null(r.final_rel_objective);
  j["iters"] = r.iters;
  j["wall_seconds"] = r.wall_seconds;
  j["kkt_residual"] = r.kkt_residual ? number_or_null(*r.kkt_residual) : json(nullptr);
  return j.dump();
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::optional<double> median_reached(std::vector<std::optional<long>> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end(), [](const auto& a, const auto& b) {
    if (!a) return false;
    if (!b) return true;
    return *a < *b;
  });
  const std::size_t n = values.size();
  const auto& hi = values[n / 2];
  if (n % 2) return hi ? std::optional<double>(*hi) : std::nullopt;
  const auto& lo = values[n / 2 - 1];
  if (!lo || !hi) return std::nullopt;
  return 0.5 * static_cast<double>(*lo + *hi);
}

namespace {

// Objective of the last record at or before `t` seconds.
double objective_at_time(const ConvergenceTrace& trace, double t) {
  const auto& recs = trace.records();
  double v = recs.front().objective;
  for (const auto& r : recs) {
    if (r.wall_seconds > t) break;
    v = r.objective;
  }
  return v;
}

}  // namespace

BenchReport run_bench(const Matrix& X, const BenchOptions& opts) {
  if (opts.n_seeds < 1) throw DomainError("bench needs at least one seed");
  if (opts.algos.empty()) throw DomainError("bench needs at least one algorithm");

  struct Job {
    Algo algo;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Algo a : opts.algos) {
    for (std::size_t s = 0; s < opts.n_seeds; ++s) jobs.push_back({a, opts.seed_base + s});
  }

  BenchReport report;
  report.algos = opts.algos;
  report.runs.resize(jobs.size());
  std::size_t workers = opts.jobs ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(jobs.size());
  auto work = [&] {
    if (workers > 1) omp_set_num_threads(1);
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      ProblemOptions p = opts.problem;
      p.algo = jobs[i].algo;
      try {
        report.runs[i] = solve_once(X, p, jobs[i].seed);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error("bench run failed: " + e);
  }

  report.e_min = std::numeric_limits<double>::infinity();
  double t_max = 0.0;
  for (const auto& r : report.runs) {
    report.e_min = std::min(report.e_min, r.final_objective);
    t_max = std::max(t_max, r.trace.back().wall_seconds);
    report.cap_violations += r.monitor.cap_violations();
  }

  const std::size_t k = opts.n_seeds;
  for (std::size_t a = 0; a < opts.algos.size(); ++a) {
    const auto first = report.runs.begin() + static_cast<long>(a * k);
    std::size_t len = first->trace.size();
    for (std::size_t s = 0; s < k; ++s) len = std::min(len, first[s].trace.size());

    Curve iter;
    for (std::size_t idx = 0; idx < len; ++idx) {
      std::vector<double> v;
      for (std::size_t s = 0; s < k; ++s) {
        v.push_back(first[s].trace.records()[idx].objective - report.e_min);
      }
      iter.x.push_back(static_cast<double>(first->trace.records()[idx].iter));
      iter.y.push_back(median(std::move(v)));
    }
    report.iter_curves.push_back(std::move(iter));

    Curve time;
    const std::size_t points = std::max<std::size_t>(opts.time_points, 2);
    for (std::size_t p = 0; p < points; ++p) {
      const double t = t_max * static_cast<double>(p) / static_cast<double>(points - 1);
      std::vector<double> v;
      for (std::size_t s = 0; s < k; ++s) v.push_back(objective_at_time(first[s].trace, t) - report.e_min);
      time.x.push_back(t);
      time.y.push_back(median(std::move(v)));
    }
    report.time_curves.push_back(std::move(time));
  }

  for (std::size_t a = 0; a < opts.algos.size(); ++a) {
    const Algo algo = opts.algos[a];
    if (!is_extrapolated(algo)) continue;
    const auto base_it = std::find(opts.algos.begin(), opts.algos.end(), counterpart(algo));
    if (base_it == opts.algos.end()) continue;
    const std::size_t b = static_cast<std::size_t>(base_it - opts.algos.begin());
    CrossingStat stat;
    stat.algo = algo;
    stat.baseline = counterpart(algo);
    for (std::size_t s = 0; s < k; ++s) {
      const double target = report.runs[b * k + s].final_objective;
      std::optional<long> hit;
      for (const auto& rec : report.runs[a * k + s].trace.records()) {
        if (rec.iter >= 1 && rec.objective < target) {
          hit = rec.iter;
          break;
        }
      }
      stat.per_seed.push_back(hit);
    }
    for (const auto& h : stat.per_seed) {
      if (!h) continue;
      stat.min = stat.min ? std::min(*stat.min, *h) : *h;
    }
    const bool all = std::all_of(stat.per_seed.begin(), stat.per_seed.end(),
                                 [](const auto& h) { return h.has_value(); });
    if (all) {
      stat.max = *std::max_element(stat.per_seed.begin(), stat.per_seed.end());
    }
    stat.median = median_reached(stat.per_seed);
    report.crossings.push_back(std::move(stat));
  }
  return report;
}

std::string bench_report_json(const BenchReport& report) {
  json j;
  j["e_min"] = number_or_null(report.e_min);
  j["cap_violations"] = report.cap_violations;
  json runs = json::array();
  for (const auto& r : report.runs) runs.push_back(json::parse(summary_json(r)));
  j["runs"] = std::move(runs);
  json cross = json::array();
  for (const auto& c : report.crossings) {
    json e;
    e["algo"] = to_string(c.algo);
    e["baseline"] = to_string(c.baseline);
    json per = json::array();
    for (const auto& h : c.per_seed) per.push_back(h ? json(*h) : json("not reached"));
    e["per_seed"] = std::move(per);
    e["min"] = c.min ? json(*c.min) : json("not reached");
    e["median"] = c.median ? json(*c.median) : json("not reached");
    e["max"] = c.max ? json(*c.max) : json("not reached");
    cross.push_back(std::move(e));
  }
  j["crossings"] = std::move(cross);
  return j.dump();
}

void write_curves(const BenchReport& report, const std::vector<Curve>& curves, std::ostream& out,
                  std::string_view x_name) {
  out << x_name;
  for (Algo a : report.algos) out << ',' << to_string(a);
  out << '\n';
  std::size_t len = curves.empty() ? 0 : curves.front().x.size();
  for (const auto& c : curves) len = std::min(len, c.x.size());
  for (std::size_t i = 0; i < len; ++i) {
    out << format_double(curves.front().x[i]);
    for (const auto& c : curves) out << ',' << format_double(c.y[i]);
    out << '\n';
  }
}

namespace {

MatrixFormat format_from(const std::string& flag, const fs::path& path) {
  if (!flag.empty()) return parse_matrix_format(flag);
  const auto ext = path.extension().string();
  if (ext == ".mtx" || ext == ".mm") return MatrixFormat::matrix_market;
  if (ext == ".csv") return MatrixFormat::csv;
  if (ext == ".bin") return MatrixFormat::dense_binary;
  throw ParseError("cannot infer the format of '" + path.string() + "'; pass --format");
}

TraceFormat trace_format_from(const std::string& flag, const fs::path& path) {
  if (!flag.empty()) return parse_trace_format(flag);
  return path.extension() == ".json" ? TraceFormat::json : TraceFormat::csv;
}

const std::vector<std::string> kAlgoNames{"mu", "mue", "minvol", "minvol-e"};
const std::vector<std::string> kFormatNames{"mm", "csv", "bin"};

struct ProblemFlags {
  std::string algo = "mue";
  std::string schedule = "nesterov";
  ProblemOptions opts;
};

void add_problem_flags(CLI::App* cmd, ProblemFlags& f) {
  cmd->add_option("--beta", f.opts.beta, "beta in [1, 2]")->capture_default_str();
  cmd->add_option("--max-iter", f.opts.max_iter, "iteration budget")->capture_default_str();
  cmd->add_option("--max-seconds", f.opts.max_seconds, "wall-time budget (solver loop only)");
  cmd->add_option("--epsilon", f.opts.epsilon, "entry floor")->capture_default_str();
  cmd->add_option("--lambda-tilde", f.opts.lambda_tilde, "min-vol weight")->capture_default_str();
  cmd->add_option("--delta", f.opts.delta, "logdet offset")->capture_default_str();
  cmd->add_option("--schedule", f.schedule, "extrapolation schedule")
      ->check(CLI::IsMember({"nesterov", "classical", "none"}))
      ->capture_default_str();
  cmd->add_option("--c", f.opts.safeguard.c, "safeguard constant c")->capture_default_str();
  cmd->add_option("--q", f.opts.safeguard.q, "safeguard exponent q > 1")->capture_default_str();
  cmd->add_option("--kkt-every", f.opts.kkt_every, "record the KKT residual every N iterations");
  cmd->add_flag_callback("--no-timing", [&f] { f.opts.record_time = false; }, "record wall_seconds as 0");
}

void finish_problem_flags(ProblemFlags& f) {
  f.opts.algo = parse_algo(f.algo);
  f.opts.schedule = parse_schedule(f.schedule);
}

struct SynthFlags {
  SyntheticSpec spec;
  std::string noise = "none";
};

void add_synth_flags(CLI::App* cmd, SynthFlags& f, bool required) {
  auto* m = cmd->add_option("--m", f.spec.m, "rows");
  auto* n = cmd->add_option("--n", f.spec.n, "columns");
  if (required) {
    m->required();
    n->required();
  }
  cmd->add_option("--noise", f.noise, "noise model")
      ->check(CLI::IsMember({"none", "poisson", "gaussian-clipped"}))
      ->capture_default_str();
  cmd->add_option("--scale", f.spec.scale, "factor scale")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Block majorization-minimization with extrapolation for NMF", "bmme"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "factorize a matrix and print a JSON summary");
  ProblemFlags sf;
  std::string data, format, trace, trace_format;
  std::uint64_t seed = 0;
  solve->add_option("--data", data, "input matrix")->required();
  solve->add_option("--format", format, "mm, csv or bin (default: from extension)")
      ->check(CLI::IsMember(kFormatNames));
  solve->add_option("--rank", sf.opts.rank, "factorization rank")->required();
  solve->add_option("--algo", sf.algo, "algorithm")
      ->check(CLI::IsMember(kAlgoNames))
      ->capture_default_str();
  solve->add_option("--seed", seed, "initialization seed")->capture_default_str();
  solve->add_option("--trace", trace, "trace output path");
  solve->add_option("--trace-format", trace_format, "csv or json (default: from extension)")
      ->check(CLI::IsMember({"csv", "json"}));
  add_problem_flags(solve, sf);

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic low-rank matrix");
  SynthFlags yf;
  std::string synth_out, synth_format, w_out, h_out;
  add_synth_flags(synth, yf, true);
  synth->add_option("--rank", yf.spec.r_true, "true rank")->required();
  synth->add_option("--seed", yf.spec.seed, "data seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output path")->required();
  synth->add_option("--format", synth_format, "mm, csv or bin (default: from extension)")
      ->check(CLI::IsMember(kFormatNames));
  synth->add_option("--w-out", w_out, "also write the true W");
  synth->add_option("--h-out", h_out, "also write the true H");

  // bench
  auto* bench = app.add_subcommand("bench", "compare algorithms over several seeds");
  ProblemFlags bf;
  bf.opts.beta = 1.5;
  bf.opts.max_iter = 200;
  bf.opts.rank = 10;
  SynthFlags bsynth;
  bsynth.spec.m = 100;
  bsynth.spec.n = 200;
  bsynth.spec.r_true = 10;
  bsynth.noise = "poisson";
  BenchOptions bo;
  std::vector<std::string> algos{"mu", "mue"};
  std::string bench_data, bench_format, out_dir;
  bool emit_traces = false;
  bench->add_option("--data", bench_data, "input matrix (default: synthetic)");
  bench->add_option("--format", bench_format, "mm, csv or bin")->check(CLI::IsMember(kFormatNames));
  bench->add_option("--rank", bf.opts.rank, "factorization rank")->capture_default_str();
  bench->add_option("--algos", algos, "algorithms")
      ->delimiter(',')
      ->check(CLI::IsMember(kAlgoNames))
      ->capture_default_str();
  bench->add_option("--seeds", bo.n_seeds, "number of seeds")->capture_default_str();
  bench->add_option("--seed-base", bo.seed_base, "first seed")->capture_default_str();
  bench->add_option("--jobs", bo.jobs, "worker threads (0 = all)")->capture_default_str();
  bench->add_option("--time-points", bo.time_points, "time-grid size")->capture_default_str();
  bench->add_option("--out-dir", out_dir, "write curves (and traces) here");
  bench->add_flag("--emit-traces", emit_traces, "write one trace per run into --out-dir");
  add_synth_flags(bench, bsynth, false);
  bench->add_option("--r-true", bsynth.spec.r_true, "synthetic true rank")->capture_default_str();
  bench->add_option("--data-seed", bsynth.spec.seed, "synthetic data seed")->capture_default_str();
  add_problem_flags(bench, bf);

  std::vector<std::string> argv_store{"bmme"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (solve->parsed()) {
      finish_problem_flags(sf);
      const fs::path path(data);
      const Matrix X = read_matrix(path, format_from(format, path));
      const RunOutcome r = solve_once(X, sf.opts, seed);
      if (!trace.empty()) write_trace(r.trace, fs::path(trace), trace_format_from(trace_format, trace));
      out << summary_json(r) << '\n';
      return 0;
    }
    if (synth->parsed()) {
      yf.spec.noise = parse_noise(yf.noise);
      const SyntheticData d = synth_lowrank(yf.spec);
      const fs::path path(synth_out);
      write_matrix(d.X, path, format_from(synth_format, path));
      if (!w_out.empty()) write_matrix(d.W_true, fs::path(w_out), format_from(synth_format, w_out));
      if (!h_out.empty()) write_matrix(d.H_true, fs::path(h_out), format_from(synth_format, h_out));
      return 0;
    }
    if (bench->parsed()) {
      finish_problem_flags(bf);
      bo.problem = bf.opts;
      bo.algos.clear();
      for (const auto& a : algos) bo.algos.push_back(parse_algo(a));
      Matrix X;
      if (!bench_data.empty()) {
        X = read_matrix(fs::path(bench_data), format_from(bench_format, bench_data));
      } else {
        bsynth.spec.noise = parse_noise(bsynth.noise);
        X = synth_lowrank(bsynth.spec).X;
      }
      const BenchReport report = run_bench(X, bo);
      if (!out_dir.empty()) {
        const fs::path dir(out_dir);
        fs::create_directories(dir);
        std::ofstream ci(dir / "curves_iter.csv");
        write_curves(report, report.iter_curves, ci, "iter");
        std::ofstream ct(dir / "curves_time.csv");
        write_curves(report, report.time_curves, ct, "seconds");
        if (!ci || !ct) throw IoError("cannot write curves to " + dir.string());
        if (emit_traces) {
          for (const auto& r : report.runs) {
            const auto name = "trace_" + std::string(to_string(r.algo)) + "_seed" +
                              std::to_string(r.seed) + ".csv";
            write_trace(r.trace, dir / name, TraceFormat::csv);
          }
        }
      }
      out << bench_report_json(report) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace bmme::cli
