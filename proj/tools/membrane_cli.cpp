// Command-line front end. One subcommand per process; reports go to --out as
// JSON (sorted keys, two-space indent) and CSV, with wall-clock metadata kept
// in a separate *.meta.json so that reports themselves are reproducible.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "membrane/membrane.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace membrane;
using lattice::GridSpec;
using lattice::Point;
using lattice::Site;

namespace {

constexpr int kLargeGrid = 48;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string subcommand;
  std::vector<int> ns;
  std::uint64_t seed = 1;
  std::optional<double> tol;
  std::size_t samples = 200;
  std::string out = "reports";
  std::string cache_dir;
  bool keep_fields = false;
  bool allow_large_grids = false;
  std::size_t threads = 0;
  std::vector<int> source;
  bool check_dense = false;
  std::string sol = "sin2";
  std::vector<double> x, y;
  double r = 0.0;
  double K = 2.0;
  double min_r_over_h = 192.0;
  int trials = 8;
  std::vector<std::string> argv;

  double tolerance(double fallback) const { return tol.value_or(fallback); }
};

class Reporter {
 public:
  explicit Reporter(const RunConfig& cfg) : cfg_(cfg), dir_(cfg.out) { fs::create_directories(dir_); }

  void json_report(const std::string& name, json report) const {
    write(name + ".json", report.dump(2) + "\n");
    json meta = {{"report", name + ".json"},
                 {"argv", cfg_.argv},
                 {"written_at_utc", timestamp()},
                 {"threads", cfg_.threads}};
    write(name + ".meta.json", meta.dump(2) + "\n");
  }

  void text(const std::string& file, const std::string& body) const { write(file, body); }

  fs::path path(const std::string& file) const { return dir_ / file; }

 private:
  void write(const std::string& file, const std::string& body) const {
    const fs::path p = dir_ / file;
    const fs::path tmp = p.string() + ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary);
      os << body;
      if (!os) throw std::runtime_error("cannot write " + p.string());
    }
    fs::rename(tmp, p);
  }

  static std::string timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  const RunConfig& cfg_;
  fs::path dir_;
};

std::vector<int> grids(const RunConfig& cfg, std::vector<int> fallback, std::size_t at_least = 1) {
  std::vector<int> ns = cfg.ns.empty() ? std::move(fallback) : cfg.ns;
  if (ns.size() < at_least)
    throw UsageError("--n: " + cfg.subcommand + " needs at least " + std::to_string(at_least) + " grid sizes");
  return ns;
}

void guard_large(const RunConfig& cfg, const std::vector<int>& ns, int factor = 1) {
  for (int n : ns) {
    if (n < 1) throw UsageError("--n " + std::to_string(n) + ": grid size must be positive");
    if (n * factor > kLargeGrid && !cfg.allow_large_grids)
      throw UsageError("--n " + std::to_string(n) + ": grids above n = " + std::to_string(kLargeGrid) +
                       " need --allow-large-grids");
  }
}

Point point_or(const std::vector<double>& v, Point fallback, const char* flag) {
  if (v.empty()) return fallback;
  if (v.size() != 4) throw UsageError(std::string(flag) + ": expected four comma-separated coordinates");
  return {v[0], v[1], v[2], v[3]};
}

json provenance(const RunConfig& cfg, const std::vector<int>& ns, double tol, const greens::GreenCache* cache,
                const std::vector<std::pair<int, std::vector<Site>>>& used = {}) {
  json p = {{"grids", ns}, {"seed", cfg.seed}, {"tolerance", tol}};
  if (cache) {
    json hashes = json::object();
    for (const auto& [n, sites] : used) {
      const json all = cache->hashes(GridSpec(n));
      json pick = json::object();
      for (const Site& s : sites) {
        const std::string k = greens::GreenCache::key(s);
        if (all.contains(k)) pick[k] = all[k];
      }
      hashes["n" + std::to_string(n)] = pick;
    }
    p["cache_hashes"] = hashes;
  }
  return p;
}

std::string site_string(const Site& s) {
  return std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + "," + std::to_string(s[3]);
}

// -- subcommands ------------------------------------------------------------

int run_fullspace(const RunConfig& cfg, const Reporter& out) {
  const auto F = greens::FullSpaceGreen::calibrated(fs::path(cfg.cache_dir));
  json axis = json::array();
  std::vector<double> residuals;
  for (int r : {1, 2, 4, 8, 16, 32, 64}) {
    const Site x{r, 0, 0, 0};
    const auto v = F.evaluate(x, greens::FullSpaceMethod::fourier_quadrature);
    const double e = greens::fullspace_expansion(x);
    residuals.push_back(v.value - e);
    axis.push_back({{"r", r}, {"F", v.value}, {"expansion", e}, {"residual", v.value - e},
                    {"quadrature_error_estimate", v.error_estimate}});
  }
  json ratios = json::array();
  for (std::size_t i = 3; i + 1 < residuals.size(); ++i) ratios.push_back(residuals[i] / residuals[i + 1]);
  json report = {{"normalization", to_json(F.normalization())},
                 {"axis", axis},
                 {"residual_ratios_8_16_32_64", ratios},
                 {"crossover_radius", F.crossover_radius()}};
  if (!cfg.source.empty()) {
    if (cfg.source.size() != 4) throw UsageError("--source: expected a,b,c,d");
    const Site s{cfg.source[0], cfg.source[1], cfg.source[2], cfg.source[3]};
    const auto v = F.evaluate(s);
    report["point"] = {{"x", s}, {"F", v.value}, {"method", greens::to_string(v.method)}};
  }
  out.json_report("fullspace", report);
  std::cout << "fullspace: c0=" << F.c0() << " residual ratios 8/16=" << ratios[0].get<double>()
            << " 16/32=" << ratios[1].get<double>() << "\n";
  return 0;
}

int run_green(const RunConfig& cfg, const Reporter& out, const greens::GreenCache& cache) {
  const auto ns = grids(cfg, {6});
  guard_large(cfg, ns);
  const double tol = cfg.tolerance(1e-8);
  json levels = json::array();
  for (int n : ns) {
    const GridSpec g(n);
    Site s = n % 2 == 0 ? g.center() : Site{n / 2, n / 2, n / 2, n / 2};
    if (!cfg.source.empty()) {
      if (cfg.source.size() != 4) throw UsageError("--source: expected a,b,c,d");
      s = {cfg.source[0], cfg.source[1], cfg.source[2], cfg.source[3]};
    }
    const auto col = greens::green_column(g, s, tol, &cache);
    if (!col.converged) throw SolverError("green column did not converge", col.residual);
    const std::string file = "green_n" + std::to_string(n) + "_" + greens::GreenCache::key(s) + ".mbf";
    {
      std::ostringstream os(std::ios::binary);
      lattice::write_field(os, col.values);
      out.text(file, os.str());
    }
    json level = {{"n", n}, {"source", s}, {"G_source_source", col(s)}, {"iterations", col.iterations},
                  {"residual", col.residual}, {"file", file}};
    std::cout << "green n=" << n << " source=" << site_string(s) << ": G(y,y)=" << col(s)
              << " iterations=" << col.iterations << " residual=" << col.residual;
    if (cfg.check_dense) {
      const auto dense = greens::dense_green_column(g, s);
      double scale = 0.0, worst = 0.0;
      for (std::size_t k = 0; k < g.site_count(); ++k) {
        scale = std::max(scale, std::abs(dense.values()[k]));
        worst = std::max(worst, std::abs(dense.values()[k] - col.values.values()[k]));
      }
      level["dense_max_relative_error"] = worst / scale;
      std::cout << " dense max rel err=" << worst / scale;
    }
    std::cout << "\n";
    levels.push_back(level);
  }
  std::vector<std::pair<int, std::vector<Site>>> used;
  for (const auto& l : levels) used.push_back({l["n"].get<int>(), {l["source"].get<Site>()}});
  out.json_report("green", {{"columns", levels}, {"provenance", provenance(cfg, ns, tol, &cache, used)}});
  return 0;
}

int run_scheme_rate(const RunConfig& cfg, const Reporter& out) {
  const auto ns = grids(cfg, {8, 16, 32}, 3);
  guard_large(cfg, ns);
  const double tol = cfg.tolerance(1e-10);
  const auto sol = scheme::solution_by_id(cfg.sol);
  const auto report = scheme::measure_rate(sol, ns, tol);
  const std::string name = "scheme_rate_" + cfg.sol;
  out.json_report(name, scheme::to_json(report));
  out.text(name + ".csv", scheme::to_csv(report));
  std::cout << "scheme-rate " << sol.id << ": rate=";
  if (report.rate)
    std::cout << *report.rate;
  else
    std::cout << "undefined";
  std::cout << "\n";
  return 0;
}

json batch_json(const SampleBatch& b) {
  return {{"n", b.grid.n()}, {"seed", b.seed}, {"count", b.count()}, {"tolerance", b.tolerance},
          {"max_iterations", b.max_iterations}, {"worst_residual", b.worst_residual}};
}

void write_fields(const Reporter& out, const SampleBatch& b) {
  for (std::size_t i = 0; i < b.fields.size(); ++i) {
    std::ostringstream os(std::ios::binary);
    lattice::write_field(os, b.fields[i]);
    out.text("field_n" + std::to_string(b.grid.n()) + "_" + std::to_string(i) + ".mbf", os.str());
  }
}

int run_sample(const RunConfig& cfg, const Reporter& out) {
  const auto ns = grids(cfg, {16});
  guard_large(cfg, ns);
  const double tol = cfg.tolerance(sampler::kDefaultTolerance);
  json batches = json::array();
  for (int n : ns) {
    const auto b = sampler::sample_batch(GridSpec(n), cfg.seed, cfg.samples, tol, cfg.keep_fields);
    out.text("samples_n" + std::to_string(n) + ".csv", summary_csv(b));
    if (cfg.keep_fields) write_fields(out, b);
    batches.push_back(batch_json(b));
    std::cout << "sample n=" << n << ": " << b.count() << " draws, worst residual " << b.worst_residual << "\n";
  }
  out.json_report("sample", {{"batches", batches}, {"provenance", provenance(cfg, ns, tol, nullptr)}});
  return 0;
}

int run_extremes(const RunConfig& cfg, const Reporter& out) {
  const auto ns = grids(cfg, {16, 32});
  guard_large(cfg, ns);
  const double tol = cfg.tolerance(sampler::kDefaultTolerance);
  std::vector<SampleBatch> batches;
  for (int n : ns) {
    batches.push_back(sampler::sample_batch(GridSpec(n), cfg.seed, cfg.samples, tol, cfg.keep_fields));
    out.text("samples_n" + std::to_string(n) + ".csv", summary_csv(batches.back()));
    if (cfg.keep_fields) write_fields(out, batches.back());
  }
  const auto report = extremes::extremes_report(batches);
  for (std::size_t i = 0; i < ns.size(); ++i)
    out.text("histogram_n" + std::to_string(ns[i]) + ".csv", extremes::histogram_csv(report.histograms[i]));
  json j = extremes::to_json(report);
  json info = json::array();
  for (const auto& b : batches) info.push_back(batch_json(b));
  j["batches"] = info;
  j["provenance"] = provenance(cfg, ns, tol, nullptr);
  out.json_report("extremes", j);
  std::cout << "extremes:";
  for (const auto& l : report.levels) std::cout << " n=" << l.n << " mean(M-m_N)=" << l.mean;
  for (double d : report.ks_consecutive) std::cout << " KS=" << d;
  std::cout << "\n";
  return 0;
}

int run_verify_b0(const RunConfig& cfg, const Reporter& out, const greens::GreenCache& cache) {
  const auto ns = grids(cfg, {8, 16});
  guard_large(cfg, ns);
  const double tol = cfg.tolerance(1e-8);
  const verify::GreenSource green{tol, &cache};
  json levels = json::array();
  std::vector<std::pair<int, std::vector<Site>>> used;
  for (int n : ns) {
    if (n % 2) throw UsageError("--n " + std::to_string(n) + ": verify-b0 needs even grid sizes");
    const GridSpec g(n);
    const Site c = g.center();
    std::vector<Site> sites{c};
    for (int depth : {1, 2, n / 4}) {
      Site s = c;
      s[0] = depth;
      if (std::find(sites.begin(), sites.end(), s) == sites.end()) sites.push_back(s);
    }
    const auto r = verify::check_B0(g, sites, green);
    levels.push_back({{"n", n}, {"result", verify::to_json(r)}});
    used.push_back({n, sites});
    std::cout << "verify-b0 n=" << n << ": alpha_0=" << r.alpha << " (" << r.binding << ")\n";
  }
  out.json_report("verify_b0", {{"levels", levels}, {"provenance", provenance(cfg, ns, tol, &cache, used)}});
  return 0;
}

int run_verify_b1(const RunConfig& cfg, const Reporter& out, const greens::GreenCache& cache) {
  const auto ns = grids(cfg, {16, 32});
  guard_large(cfg, ns);
  const double tol = cfg.tolerance(1e-8);
  const verify::GreenSource green{tol, &cache};
  verify::PairPlan plan;
  plan.seed = cfg.seed;
  json levels = json::array();
  std::vector<std::pair<int, std::vector<Site>>> used;
  for (int n : ns) {
    const GridSpec g(n);
    const auto r = verify::check_B1(g, plan, green);
    std::set<Site> sources;
    for (const auto& p : r.sample.pairs) sources.insert(p.y);
    used.push_back({n, {sources.begin(), sources.end()}});
    levels.push_back({{"n", n}, {"result", verify::to_json(r)}});
    std::cout << "verify-b1 n=" << n << ": alpha_0''=" << r.alpha << " over " << r.pairs << " pairs\n";
  }
  out.json_report("verify_b1", {{"plan", verify::to_json(plan)},
                                {"levels", levels},
                                {"provenance", provenance(cfg, ns, tol, &cache, used)}});
  return 0;
}

int run_near_diagonal(const RunConfig& cfg, const Reporter& out, const greens::GreenCache& cache) {
  const auto ns = grids(cfg, {8, 16, 32}, 2);
  guard_large(cfg, ns);
  const double tol = cfg.tolerance(1e-8);
  const Point x = point_or(cfg.x, {0.5, 0.5, 0.5, 0.5}, "--x");
  const std::vector<verify::OffsetPair> offsets{{{0, 0, 0, 0}, {0, 0, 0, 0}},
                                                {lattice::unit(0), {0, 0, 0, 0}},
                                                {Site{1, 1, 0, 0}, {0, 0, 0, 0}},
                                                {lattice::unit(0, 2), {0, 0, 0, 0}}};
  const auto F = greens::FullSpaceGreen::calibrated(fs::path(cfg.cache_dir));
  const auto r = verify::near_diagonal_limit(x, ns, offsets, {tol, &cache}, F);
  std::vector<std::pair<int, std::vector<Site>>> used;
  for (int n : ns) {
    const Site b = verify::on_grid(GridSpec(n), x);
    used.push_back({n, {b}});
  }
  out.json_report("near_diagonal", {{"regular_part", verify::to_json(r)},
                                    {"c0", F.c0()},
                                    {"provenance", provenance(cfg, ns, tol, &cache, used)}});
  const auto& e = r.entries[0];
  std::cout << "near-diagonal: f1(x) extrapolated=" << e.limit.value << " (residual " << e.limit.residual
            << "), last difference=" << e.differences.back() << "\n";
  return 0;
}

int run_off_diagonal(const RunConfig& cfg, const Reporter& out, const greens::GreenCache& cache) {
  const auto ns = grids(cfg, {8, 16, 32}, 2);
  guard_large(cfg, ns);
  const double tol = cfg.tolerance(1e-8);
  const Point x = point_or(cfg.x, {0.25, 0.5, 0.5, 0.5}, "--x");
  const Point y = point_or(cfg.y, {0.75, 0.5, 0.5, 0.5}, "--y");
  const auto r = verify::off_diagonal_limit(x, y, ns, 16.0, {tol, &cache});
  std::vector<std::pair<int, std::vector<Site>>> used;
  for (int n : ns) used.push_back({n, {verify::on_grid(GridSpec(n), y)}});
  out.json_report("off_diagonal", {{"result", verify::to_json(r)},
                                   {"provenance", provenance(cfg, ns, tol, &cache, used)}});
  std::cout << "off-diagonal: f3(x,y) extrapolated=" << r.limit.value << " (residual " << r.limit.residual << ")\n";
  return 0;
}

int run_inequalities(const RunConfig& cfg, const Reporter& out, const greens::GreenCache& cache) {
  const auto ns = grids(cfg, {16, 32});
  guard_large(cfg, ns);
  const double tol = cfg.tolerance(1e-8);
  const verify::GreenSource green{tol, &cache};
  json levels = json::array();
  std::vector<std::pair<int, std::vector<Site>>> used;
  for (int n : ns) {
    if (n % 2 || n < 4) throw UsageError("--n " + std::to_string(n) + ": inequalities need even n >= 4");
    const GridSpec g(n);
    const auto p = verify::check_poincare(g, n / 2, cfg.trials, cfg.seed);
    const auto ps = verify::check_poincare_sobolev(g, cfg.trials, cfg.seed, green);
    const Site c = g.center();
    std::vector<Site> sources{c, {1, n / 2, n / 2, n / 2}, {n / 4, n / 2, n / 2, n / 2}};
    const auto eb = verify::check_easy_bound(g, sources, green);
    for (int depth : {1, n / 4, n / 2}) {
      Site s = c;
      s[0] = depth;
      sources.push_back(s);
    }
    used.push_back({n, sources});
    levels.push_back({{"n", n},
                      {"poincare", verify::to_json(p)},
                      {"poincare_sobolev", verify::to_json(ps)},
                      {"easy_bound", verify::to_json(eb)}});
    std::cout << "inequalities n=" << n << ": poincare " << p.ratio << " <= " << p.bound << ", poincare-sobolev "
              << ps.constant << " (" << ps.worst << "), easy bound " << eb.constant << "\n";
  }
  out.json_report("inequalities", {{"levels", levels}, {"trials", cfg.trials},
                                   {"provenance", provenance(cfg, ns, tol, &cache, used)}});
  return 0;
}

int run_closeness(const RunConfig& cfg, const Reporter& out, const greens::GreenCache& cache) {
  const auto ns = grids(cfg, {8, 16});
  guard_large(cfg, ns, 2);
  const double tol = cfg.tolerance(1e-8);
  const Point x = point_or(cfg.x, {0.5, 0.5, 0.5, 0.5}, "--x");
  const Point y = point_or(cfg.y, {0.5, 0.5, 0.5, 0.5}, "--y");
  const double r = cfg.r > 0.0 ? cfg.r : verify::boundary_distance(y) / 2.0;
  const auto F = greens::FullSpaceGreen::calibrated(fs::path(cfg.cache_dir));
  const verify::ClosenessOptions opt{cfg.K, cfg.min_r_over_h};
  json levels = json::array();
  std::vector<std::pair<int, std::vector<Site>>> used;
  for (int n : ns) {
    const auto c = verify::check_closeness(x, y, n, r, opt, {tol, &cache}, F);
    levels.push_back(verify::to_json(c));
    used.push_back({n, {verify::on_grid(GridSpec(n), y)}});
    used.push_back({2 * n, {verify::on_grid(GridSpec(2 * n), y)}});
    std::cout << "closeness n=" << n << " vs " << 2 * n << ": " << c.value
              << (c.floor_relaxed ? " (r >= 192h floor relaxed)" : "") << "\n";
  }
  out.json_report("closeness", {{"levels", levels}, {"provenance", provenance(cfg, ns, tol, &cache, used)}});
  return 0;
}

int dispatch(const RunConfig& cfg) {
  const Reporter out(cfg);
  const greens::GreenCache cache{fs::path(cfg.cache_dir)};
  const std::string& s = cfg.subcommand;
  if (s == "fullspace") return run_fullspace(cfg, out);
  if (s == "green") return run_green(cfg, out, cache);
  if (s == "scheme-rate") return run_scheme_rate(cfg, out);
  if (s == "sample") return run_sample(cfg, out);
  if (s == "extremes") return run_extremes(cfg, out);
  if (s == "verify-b0") return run_verify_b0(cfg, out, cache);
  if (s == "verify-b1") return run_verify_b1(cfg, out, cache);
  if (s == "near-diagonal") return run_near_diagonal(cfg, out, cache);
  if (s == "off-diagonal") return run_off_diagonal(cfg, out, cache);
  if (s == "inequalities") return run_inequalities(cfg, out, cache);
  if (s == "closeness") return run_closeness(cfg, out, cache);
  throw UsageError("unknown subcommand " + s);
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  cfg.argv.assign(argv, argv + argc);
  CLI::App app{"Membrane model experiments"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "plain key=value file, lower precedence than flags");
  app.allow_config_extras(false);

  app.add_option("--n", cfg.ns, "grid size; repeat for several");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--tol", cfg.tol, "relative residual tolerance");
  app.add_option("--samples", cfg.samples, "samples per grid")->check(CLI::PositiveNumber);
  app.add_option("--out", cfg.out, "report directory");
  app.add_option("--cache-dir", cfg.cache_dir, "column cache (default: $CACHE_DIR or .membrane_cache)");
  app.add_flag("--keep-fields", cfg.keep_fields, "write sampled fields");
  app.add_flag("--allow-large-grids", cfg.allow_large_grids, "permit n > 48");
  app.add_option("--threads", cfg.threads, "worker cap (0 = all cores)");
  app.add_option("--source", cfg.source, "source site a,b,c,d")->delimiter(',');
  app.add_flag("--check-dense", cfg.check_dense, "compare against a dense factorization");
  app.add_option("--sol", cfg.sol, "manufactured solution: zero, sin2, bump");
  app.add_option("--x", cfg.x, "point x0,x1,x2,x3 in [0,1]^4")->delimiter(',');
  app.add_option("--y", cfg.y, "point y0,y1,y2,y3 in [0,1]^4")->delimiter(',');
  app.add_option("--r", cfg.r, "cutoff radius (default d(y)/2)");
  app.add_option("--K", cfg.K, "window parameter, r >= d(y)/K");
  app.add_option("--min-r-over-h", cfg.min_r_over_h, "floor on r/h; lowering it is recorded in the report");
  app.add_option("--trials", cfg.trials, "random trials for inequalities")->check(CLI::PositiveNumber);

  for (const char* name : {"fullspace", "green", "scheme-rate", "sample", "extremes", "verify-b0", "verify-b1",
                           "near-diagonal", "off-diagonal", "inequalities", "closeness"})
    app.add_subcommand(name, std::string("run ") + name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  if (cfg.cache_dir.empty()) {
    const char* env = std::getenv("CACHE_DIR");
    cfg.cache_dir = env && *env ? env : ".membrane_cache";
  }
  cfg.out = fs::absolute(cfg.out).string();
  cfg.cache_dir = fs::absolute(cfg.cache_dir).string();
  thread_limit() = cfg.threads;

  try {
    return dispatch(cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 1;
  } catch (const QuadratureError& e) {
    std::cerr << "quadrature failure: " << e.what() << "\n";
    return 1;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
