// redsched: redundancy scheduling toolbox.
//
//   design gen | design verify      block design files
//   indicators | sweep-indicators   only-arrival LBF/RDF estimates
//   simulate | sweep                queueing simulation, CSV per point
//
// Exit codes: 0 ok, 1 verification failure, 2 no such design, 64 bad usage.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "redsched/design_io.hpp"
#include "redsched/redsched.hpp"

namespace {

using namespace redsched;
using nlohmann::json;

constexpr int kExitVerification = 1;
constexpr int kExitNoDesign = 2;
constexpr int kExitUsage = 64;

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string iso_now() {
  const std::time_t tt =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects the output body, then lands it on stdout or in a file with a
// manifest sidecar describing the exact run.
class Output {
 public:
  Output(std::string path, std::string command, std::vector<std::string> argv)
      : path_(std::move(path)),
        command_(std::move(command)),
        argv_(std::move(argv)),
        started_(iso_now()) {}

  std::ostringstream& body() { return body_; }

  int finish(const json& params, std::uint64_t seed) {
    if (path_.empty()) {
      std::cout << body_.str();
      return 0;
    }
    std::ofstream out(path_, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write " << path_ << "\n";
      return kExitUsage;
    }
    out << body_.str();
    out.close();

    json manifest;
    manifest["tool"] = "redsched";
    manifest["version"] = std::string(kVersion);
    manifest["command"] = command_;
    manifest["argv"] = argv_;
    manifest["params"] = params;
    manifest["seed"] = seed;
    manifest["started"] = started_;
    manifest["finished"] = iso_now();
    manifest["output"] = path_;
    std::ofstream mf(path_ + ".manifest.json", std::ios::binary);
    mf << manifest.dump(2) << "\n";
    return 0;
  }

 private:
  std::string path_;
  std::string command_;
  std::vector<std::string> argv_;
  std::string started_;
  std::ostringstream body_;
};

std::vector<policies::PolicyKind> parse_policies(const std::string& name) {
  using policies::PolicyKind;
  if (name == "all") {
    return {PolicyKind::Random, PolicyKind::RoundRobin, PolicyKind::Bibd};
  }
  if (name == "random") return {PolicyKind::Random};
  if (name == "round-robin") return {PolicyKind::RoundRobin};
  if (name == "bibd") return {PolicyKind::Bibd};
  throw CLI::ValidationError(
      "--policy", "expected one of random, round-robin, bibd, all");
}

// "lo:hi:step" range (inclusive end, within rounding) or comma list.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> values;
  if (text.find(':') != std::string::npos) {
    double lo = 0, hi = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' ||
        step <= 0 || hi < lo) {
      throw CLI::ValidationError("range", "expected lo:hi:step with step > 0");
    }
    for (double v = lo; v <= hi + 1e-9 * std::max(1.0, std::fabs(hi));
         v += step) {
      values.push_back(v);
    }
  } else {
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
      values.push_back(std::stod(item));
    }
  }
  if (values.empty()) {
    throw CLI::ValidationError("range", "no values given");
  }
  return values;
}

struct DesignOutcome {
  std::optional<designs::BlockDesign> design;
  int exit_code = 0; // nonzero: error already reported on stderr
};

// Design for the BIBD policy: from --design-file (validated) or generated
// for (n, r). A nonexistent design reports exit 2, a bad file exit 1.
DesignOutcome obtain_design(int n, int r, const std::string& file) {
  DesignOutcome out;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) {
      std::cerr << "cannot read " << file << "\n";
      out.exit_code = kExitUsage;
      return out;
    }
    try {
      const io::LoadedDesign loaded = io::design_from_json(json::parse(in));
      const auto report = designs::verify_design(loaded.design);
      if (!report.passed) {
        std::cerr << file << ": design fails verification ("
                  << report.violations.size() << " violation(s))\n";
        out.exit_code = kExitVerification;
        return out;
      }
      if (loaded.design.points != n || loaded.design.block_size() != r) {
        std::cerr << file << ": design is for (n=" << loaded.design.points
                  << ", r=" << loaded.design.block_size()
                  << "), run asks for (n=" << n << ", r=" << r << ")\n";
        out.exit_code = kExitUsage;
        return out;
      }
      out.design = loaded.design;
      return out;
    } catch (const std::exception& e) {
      std::cerr << file << ": " << e.what() << "\n";
      out.exit_code = kExitVerification;
      return out;
    }
  }
  if (r < 2 || n != designs::points_for(r)) {
    std::cerr << "bibd policy without --design-file needs n = r(r-1)+1 and "
                 "r >= 2\n";
    out.exit_code = kExitUsage;
    return out;
  }
  if (auto ds = designs::find_difference_set(r)) {
    out.design = designs::expand_blocks(*ds);
    return out;
  }
  std::cerr << "no (" << n << ", " << r << ", 1) design exists\n";
  out.exit_code = kExitNoDesign;
  return out;
}

// ---------------------------------------------------------------------------
// design gen / design verify

int cmd_design_gen(int r, Output& output) {
  const auto ds = designs::find_difference_set(r);
  if (!ds) {
    std::cerr << "no (" << designs::points_for(r) << ", " << r
              << ", 1) design exists\n";
    return kExitNoDesign;
  }
  const auto design = designs::expand_blocks(*ds);
  output.body() << io::design_to_json(*ds, design).dump(2) << "\n";
  json params;
  params["r"] = r;
  return output.finish(params, 0);
}

std::string describe(const designs::Violation& v) {
  std::ostringstream out;
  if (v.rule == "block-count") {
    out << "block-count: " << v.observed << " blocks, expected n";
  } else if (v.rule == "block-content") {
    out << "block-content: block " << v.a << " is malformed";
  } else if (v.rule == "replication") {
    out << "replication: point " << v.a << " appears in " << v.observed
        << " block(s)";
  } else if (v.rule == "pair-coverage") {
    out << "pair-coverage: pair (" << v.a << "," << v.b << ") covered "
        << v.observed << " time(s)";
  } else if (v.rule == "block-intersection") {
    out << "block-intersection: blocks " << v.a << " and " << v.b << " share "
        << v.observed << " point(s)";
  } else if (v.rule == "residues") {
    out << "residues: stored residues are not a planar difference set";
  } else {
    out << v.rule;
  }
  return out.str();
}

int cmd_design_verify(const std::string& file) {
  std::ifstream in(file);
  if (!in) {
    std::cerr << "cannot read " << file << "\n";
    return kExitUsage;
  }
  io::LoadedDesign loaded;
  try {
    loaded = io::design_from_json(json::parse(in, nullptr, true));
  } catch (const std::exception& e) {
    std::cout << "FAIL: " << e.what() << "\n";
    return kExitVerification;
  }
  auto report = designs::verify_design(loaded.design);

  // The file also carries the generating residues; check them too.
  if (report.passed &&
      !designs::is_planar_difference_set(loaded.difference_set.residues,
                                         loaded.design.points)) {
    report.passed = false;
    report.violations.push_back({"residues", -1, -1, -1});
  }
  if (report.passed) {
    std::cout << "PASS: symmetric (" << loaded.design.points << ", "
              << loaded.design.block_size() << ", " << loaded.design.lambda
              << ") design, " << loaded.design.blocks.size()
              << " blocks verified\n";
    return 0;
  }
  std::cout << "FAIL: " << report.violations.size() << " violation(s)\n";
  for (const auto& v : report.violations) {
    std::cout << "  " << describe(v) << "\n";
  }
  return kExitVerification;
}

// ---------------------------------------------------------------------------
// indicators / sweep-indicators

constexpr const char* kIndicatorHeader =
    "policy,n,r,T,lag,reps,lbf,lbf_ci95,rdf,rdf_ci95";

void indicator_row(std::ostringstream& out, policies::PolicyKind kind, int n,
                   int r, std::int64_t throws, int lag, int reps,
                   const std::optional<urns::IndicatorEstimate>& est) {
  out << policies::to_string(kind) << ',' << n << ',' << r << ',' << throws
      << ',' << lag << ',' << reps << ',';
  if (est) {
    out << fmt(est->lbf) << ',' << fmt(est->lbf_ci95) << ',' << fmt(est->rdf)
        << ',' << fmt(est->rdf_ci95) << "\n";
  } else {
    out << "NoDesign,NoDesign,NoDesign,NoDesign\n";
  }
}

struct IndicatorArgs {
  std::string policy = "all";
  int r = 0;
  int n = 0; // 0: default to r(r-1)+1
  std::int64_t throws = 0;
  int lag = 1;
  int reps = 1000;
  std::uint64_t seed = 1;
  int stride = 1;
  std::string design_file;
  std::string out_path;
};

int cmd_indicators(const IndicatorArgs& args, Output& output) {
  const int n = args.n > 0 ? args.n : designs::points_for(args.r);
  const std::int64_t throws =
      args.throws > 0 ? args.throws : 10 * static_cast<std::int64_t>(n);
  const auto kinds = parse_policies(args.policy);
  const bool single = kinds.size() == 1;

  output.body() << kIndicatorHeader << "\n";
  for (const auto kind : kinds) {
    policies::PolicyConfig cfg;
    cfg.kind = kind;
    cfg.servers = n;
    cfg.redundancy = args.r;
    cfg.stride = args.stride;
    cfg.seed = args.seed;
    if (kind == policies::PolicyKind::Bibd) {
      DesignOutcome got = obtain_design(n, args.r, args.design_file);
      if (!got.design) {
        if (single || got.exit_code != kExitNoDesign) return got.exit_code;
        indicator_row(output.body(), kind, n, args.r, throws, args.lag, 1,
                      std::nullopt);
        continue;
      }
      cfg.design = std::move(got.design);
    }
    const auto est =
        urns::estimate_indicators(cfg, throws, args.lag, args.reps);
    indicator_row(output.body(), kind, n, args.r, throws, args.lag, est.reps,
                  est);
  }

  json params;
  params["policy"] = args.policy;
  params["n"] = n;
  params["r"] = args.r;
  params["T"] = throws;
  params["lag"] = args.lag;
  params["reps"] = args.reps;
  params["seed"] = args.seed;
  params["stride"] = args.stride;
  if (!args.design_file.empty()) params["design_file"] = args.design_file;
  return output.finish(params, args.seed);
}

struct IndicatorSweepArgs {
  std::vector<int> r_values;
  std::int64_t throws = 0;
  int lag = 1;
  int reps = 1000;
  std::uint64_t seed = 1;
  std::string out_path;
};

int cmd_sweep_indicators(const IndicatorSweepArgs& args, Output& output) {
  const auto rows = urns::sweep_indicators(args.r_values, args.throws,
                                           args.lag, args.reps, args.seed);
  output.body() << kIndicatorHeader << "\n";
  for (const auto& row : rows) {
    indicator_row(output.body(), row.kind, row.servers, row.redundancy,
                  row.throws, row.lag,
                  row.estimate ? row.estimate->reps : row.reps, row.estimate);
  }
  json params;
  params["r"] = args.r_values;
  params["T"] = args.throws;
  params["lag"] = args.lag;
  params["reps"] = args.reps;
  params["seed"] = args.seed;
  return output.finish(params, args.seed);
}

// ---------------------------------------------------------------------------
// simulate / sweep

constexpr const char* kSimHeader =
    "policy,n,r,mu1,q,p,lambda,reps,jobs,mean_queue_time,ci95,"
    "mean_response_time,util_mean,seed,unstable";

struct SimArgs {
  std::string policy = "all";
  int r = 0;
  int n = 0;
  double mu1 = 10.0;
  double q = 1.0;
  double p = 0.0;
  double lambda = 0.0;        // simulate
  std::string lambdas, loads; // sweep
  std::int64_t jobs = 2'000'000;
  std::int64_t warmup = -1; // -1: 10% of jobs
  int reps = 10;
  std::uint64_t seed = 1;
  int stride = 1;
  std::string design_file;
  std::string out_path;
};

int run_sim_rows(const SimArgs& args, const std::vector<double>& lambdas,
                 Output& output) {
  const int n = args.n > 0 ? args.n : designs::points_for(args.r);
  const auto kinds = parse_policies(args.policy);

  sim::SimConfig base;
  base.servers = n;
  base.redundancy = args.r;
  base.mu1 = args.mu1;
  base.q = args.q;
  base.p = args.p;
  base.total_jobs = args.jobs;
  base.warmup_jobs = args.warmup >= 0 ? args.warmup : args.jobs / 10;
  base.seed = args.seed;

  const double saturation = sim::saturation_rate(base);
  for (double lambda : lambdas) {
    if (lambda > 0.95 * saturation) {
      std::cerr << "warning: lambda " << fmt(lambda) << " is above 95% of "
                << "the saturation rate " << fmt(saturation) << "\n";
    }
  }

  output.body() << kSimHeader << "\n";
  for (const auto kind : kinds) {
    policies::PolicyConfig pol;
    pol.kind = kind;
    pol.servers = n;
    pol.redundancy = args.r;
    pol.stride = args.stride;
    pol.seed = args.seed;
    if (kind == policies::PolicyKind::Bibd) {
      DesignOutcome got = obtain_design(n, args.r, args.design_file);
      if (!got.design) return got.exit_code;
      pol.design = std::move(got.design);
    }
    for (double lambda : lambdas) {
      sim::SimConfig cfg = base;
      cfg.lambda = lambda;
      const sim::MetricsRecord rec = sim::run_replications(cfg, pol, args.reps);
      output.body() << policies::to_string(kind) << ',' << n << ',' << args.r
                    << ',' << fmt(args.mu1) << ',' << fmt(args.q) << ','
                    << fmt(args.p) << ',' << fmt(lambda) << ',' << args.reps
                    << ',' << args.jobs << ',' << fmt(rec.mean_queue_time)
                    << ',' << fmt(rec.ci95_queue) << ','
                    << fmt(rec.mean_response_time) << ','
                    << fmt(rec.util_mean()) << ',' << args.seed << ','
                    << (rec.unstable ? 1 : 0) << "\n";
    }
  }

  json params;
  params["policy"] = args.policy;
  params["n"] = n;
  params["r"] = args.r;
  params["mu1"] = args.mu1;
  params["q"] = args.q;
  params["p"] = args.p;
  params["lambda"] = lambdas;
  params["jobs"] = args.jobs;
  params["warmup"] = base.warmup_jobs;
  params["reps"] = args.reps;
  params["seed"] = args.seed;
  params["stride"] = args.stride;
  if (!args.design_file.empty()) params["design_file"] = args.design_file;
  return output.finish(params, args.seed);
}

void add_common_sim_options(CLI::App* cmd, SimArgs& args) {
  cmd->add_option("--policy", args.policy, "random | round-robin | bibd | all")
      ->capture_default_str();
  cmd->add_option("--r", args.r, "redundancy level (copies per job)")
      ->required()
      ->check(CLI::Range(1, 64));
  cmd->add_option("--n", args.n, "server count (default r(r-1)+1)")
      ->check(CLI::Range(1, 100000));
  cmd->add_option("--mu1", args.mu1, "regular service rate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--q", args.q, "data-intensive service inflation (>= 1)")
      ->capture_default_str()
      ->check(CLI::Range(1.0, 1e12));
  cmd->add_option("--p", args.p, "data-intensive arrival probability")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--jobs", args.jobs, "arrivals per replication")
      ->capture_default_str()
      ->check(CLI::Range(std::int64_t{1}, std::int64_t{1} << 40));
  cmd->add_option("--warmup", args.warmup,
                  "jobs discarded from statistics (default: 10% of --jobs)")
      ->check(CLI::Range(std::int64_t{0}, std::int64_t{1} << 40));
  cmd->add_option("--reps", args.reps, "independent replications")
      ->capture_default_str()
      ->check(CLI::Range(1, 100000));
  cmd->add_option("--seed", args.seed, "base seed")->capture_default_str();
  cmd->add_option("--stride", args.stride, "round-robin window advance")
      ->capture_default_str()
      ->check(CLI::Range(1, 100000));
  cmd->add_option("--design-file", args.design_file,
                  "block design JSON for the bibd policy");
  cmd->add_option("--out", args.out_path, "CSV output path (default stdout)");
  cmd->set_config("--config", "",
                  "key=value file; command-line flags take precedence");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"redundancy scheduling toolbox: block designs, only-arrival "
               "indicators, and a cancel-on-start queueing simulator"};
  app.require_subcommand(1);
  const std::vector<std::string> argv_copy(argv, argv + argc);

  // design gen | verify
  auto* design =
      app.add_subcommand("design", "generate or verify block design files");
  design->require_subcommand(1);
  int gen_r = 0;
  std::string gen_out;
  auto* gen = design->add_subcommand(
      "gen", "find the (r(r-1)+1, r, 1) design for a redundancy level");
  gen->add_option("--r", gen_r, "redundancy level (block size)")
      ->required()
      ->check(CLI::Range(2, 8));
  gen->add_option("--out", gen_out, "write JSON here instead of stdout");
  std::string verify_file;
  auto* verify = design->add_subcommand("verify", "check a design file");
  verify->add_option("--file", verify_file, "design JSON file")->required();

  // indicators
  IndicatorArgs ind;
  auto* indicators = app.add_subcommand(
      "indicators", "LBF/RDF estimates for one redundancy level");
  indicators
      ->add_option("--policy", ind.policy, "random | round-robin | bibd | all")
      ->capture_default_str();
  indicators->add_option("--r", ind.r, "redundancy level")
      ->required()
      ->check(CLI::Range(1, 64));
  indicators->add_option("--n", ind.n, "urn count (default r(r-1)+1)")
      ->check(CLI::Range(1, 100000));
  indicators->add_option("--T", ind.throws, "balls to throw (default 10n)")
      ->check(CLI::Range(std::int64_t{2}, std::int64_t{1} << 40));
  indicators->add_option("--lag", ind.lag, "overlap lag between jobs")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  indicators->add_option("--reps", ind.reps, "Monte Carlo replications")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  indicators->add_option("--seed", ind.seed, "base seed")
      ->capture_default_str();
  indicators->add_option("--stride", ind.stride, "round-robin window advance")
      ->capture_default_str()
      ->check(CLI::Range(1, 100000));
  indicators->add_option("--design-file", ind.design_file,
                         "block design JSON for the bibd policy");
  indicators->add_option("--out", ind.out_path,
                         "CSV output path (default stdout)");
  indicators->set_config("--config", "",
                         "key=value file; command-line flags take precedence");

  // sweep-indicators
  IndicatorSweepArgs isw;
  auto* sweep_ind = app.add_subcommand(
      "sweep-indicators",
      "LBF/RDF for all policies over redundancy levels, n = r(r-1)+1");
  sweep_ind->add_option("--r", isw.r_values, "redundancy levels, e.g. 3,4,5,6")
      ->required()
      ->delimiter(',')
      ->check(CLI::Range(2, 8));
  sweep_ind->add_option("--T", isw.throws, "balls to throw (default 10n)")
      ->check(CLI::Range(std::int64_t{2}, std::int64_t{1} << 40));
  sweep_ind->add_option("--lag", isw.lag, "overlap lag between jobs")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  sweep_ind->add_option("--reps", isw.reps, "Monte Carlo replications")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  sweep_ind->add_option("--seed", isw.seed, "base seed")
      ->capture_default_str();
  sweep_ind->add_option("--out", isw.out_path,
                        "CSV output path (default stdout)");
  sweep_ind->set_config("--config", "",
                        "key=value file; command-line flags take precedence");

  // simulate
  SimArgs siml;
  auto* simulate =
      app.add_subcommand("simulate", "queueing simulation at one arrival rate");
  add_common_sim_options(simulate, siml);
  simulate->add_option("--lambda", siml.lambda, "Poisson arrival rate")
      ->required()
      ->check(CLI::PositiveNumber);

  // sweep
  SimArgs swp;
  auto* sweep = app.add_subcommand(
      "sweep", "queueing simulation over an arrival-rate grid");
  add_common_sim_options(sweep, swp);
  auto* lam_opt = sweep->add_option(
      "--lambdas", swp.lambdas, "absolute rates, lo:hi:step or comma list");
  auto* load_opt = sweep->add_option(
      "--loads", swp.loads,
      "fractions of the saturation rate n/E[S], lo:hi:step or comma list");
  lam_opt->excludes(load_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      Output output(gen_out, "design gen", argv_copy);
      return cmd_design_gen(gen_r, output);
    }
    if (verify->parsed()) {
      return cmd_design_verify(verify_file);
    }
    if (indicators->parsed()) {
      Output output(ind.out_path, "indicators", argv_copy);
      return cmd_indicators(ind, output);
    }
    if (sweep_ind->parsed()) {
      Output output(isw.out_path, "sweep-indicators", argv_copy);
      return cmd_sweep_indicators(isw, output);
    }
    if (simulate->parsed()) {
      Output output(siml.out_path, "simulate", argv_copy);
      return run_sim_rows(siml, {siml.lambda}, output);
    }
    if (sweep->parsed()) {
      if (swp.lambdas.empty() && swp.loads.empty()) {
        std::cerr << "sweep needs --lambdas or --loads\n";
        return kExitUsage;
      }
      std::vector<double> grid;
      if (!swp.lambdas.empty()) {
        grid = parse_grid(swp.lambdas);
      } else {
        sim::SimConfig probe;
        probe.servers = swp.n > 0 ? swp.n : designs::points_for(swp.r);
        probe.mu1 = swp.mu1;
        probe.q = swp.q;
        probe.p = swp.p;
        const double saturation = sim::saturation_rate(probe);
        for (double load : parse_grid(swp.loads)) {
          grid.push_back(load * saturation);
        }
      }
      for (double lambda : grid) {
        if (lambda <= 0) {
          std::cerr << "arrival rates must be positive\n";
          return kExitUsage;
        }
      }
      Output output(swp.out_path, "sweep", argv_copy);
      return run_sim_rows(swp, grid, output);
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
