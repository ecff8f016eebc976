#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "spheresel/error.hpp"
#include "spheresel/eta.hpp"
#include "spheresel/harness.hpp"
#include "spheresel/procedures.hpp"
#include "spheresel/rng.hpp"
#include "spheresel/samplers.hpp"
#include "spheresel/schedule_io.hpp"

namespace spheresel::cli {

namespace {

namespace fs = std::filesystem;
using procedures::Procedure;

struct Options {
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  bool verbose = false;

  std::vector<int> ks{16};
  double alpha = 0.1;
  double delta = 1.0;
  long long n0 = 30;
  long long reps = 10'000;
  std::uint64_t seed = 20'150'611;
  std::string scenario = "SC-Equal";
  std::vector<std::string> procedures{"DK1"};

  std::string fit = "auto";
  eta::SolverSettings settings;
  std::string eta2_rule = "neg-log-two-beta";
  std::string gumbel = "trapezoid";

  std::string schedule = "auto";
  std::string cache_dir = ".spheresel-cache";
  std::string out;
  std::string out_dir = ".";
  std::string replay;
  std::string record;
  long long rep = 0;
  std::string level_profile;
  bool print_table = false;
  std::string compare;

  double eta = 0.0;
  double step = 1e-3;
  double sigma = 1.0;
};

eta::BetaFit resolve_fit(const Options& o) {
  if (o.fit == "auto") return eta::default_fit(o.alpha);
  if (o.fit == "alpha05") return eta::kFitAlpha05;
  if (o.fit == "alpha10") return eta::kFitAlpha10;
  if (o.fit == "uniform") return eta::kUniformFit;
  throw ConfigError("unknown fit '" + o.fit + "' (auto, alpha05, alpha10, uniform)");
}

eta::SolverSettings resolve_settings(const Options& o) {
  eta::SolverSettings s = o.settings;
  if (o.eta2_rule == "neg-log-two-beta") {
    s.two_system_rule = eta::TwoSystemRule::NegLogTwoBeta;
  } else if (o.eta2_rule == "exact-hitting") {
    s.two_system_rule = eta::TwoSystemRule::ExactHitting;
  } else {
    throw ConfigError("unknown eta2 rule '" + o.eta2_rule + "'");
  }
  if (o.gumbel == "trapezoid") {
    s.gumbel_expectation = eta::GumbelExpectation::Trapezoid;
  } else if (o.gumbel == "monte-carlo") {
    s.gumbel_expectation = eta::GumbelExpectation::MonteCarlo;
  } else {
    throw ConfigError("unknown gumbel expectation '" + o.gumbel + "'");
  }
  s.validate();
  return s;
}

std::string comment_block(const std::string& config) {
  std::ostringstream ss;
  std::istringstream lines(config);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) ss << "# " << line << '\n';
  }
  return ss.str();
}

std::string format_alpha(double alpha) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", alpha);
  return buf;
}

std::uint64_t schedule_key(const eta::SolverSettings& s, const eta::BetaFit& fit) {
  std::uint64_t h = s.hash();
  h = rng::derive_seed(h, std::hash<double>{}(fit.a_exponent));
  h = rng::derive_seed(h, std::hash<double>{}(fit.b_exponent));
  return h;
}

// Rounds η to the file precision so that freshly built and cached schedules
// drive identical runs.
eta::EtaSchedule through_file_format(const eta::EtaSchedule& schedule) {
  std::stringstream ss;
  eta::write_schedule_csv(ss, schedule);
  return eta::read_schedule_csv(ss);
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int main(int argc, const char* const* argv);

 private:
  void define(CLI::App& app);
  int eta_table();
  int run_experiment();
  int sweep();
  int oracle();

  eta::EtaSchedule obtain_schedule(long long k, double alpha);
  harness::ScenarioConfig scenario_for(int k) const;
  void log(const std::string& msg) {
    if (opt_.verbose) err_ << msg << '\n';
  }

  std::ostream& out_;
  std::ostream& err_;
  Options opt_;
  std::string echoed_;
};

void Cli::define(CLI::App& app) {
  app.set_config("--config", "", "Flat key=value configuration file");
  app.add_option("--threads", opt_.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", opt_.verbose, "Progress messages on stderr");

  app.add_option("--k", opt_.ks, "Number of systems (comma-separated list for eta-table/sweep)")
      ->delimiter(',');
  app.add_option("--alpha", opt_.alpha, "1 - target PCS");
  app.add_option("--delta", opt_.delta, "Indifference-zone parameter");
  app.add_option("--n0", opt_.n0, "First-stage sample size (DK2, DK3, KN-UNK)");
  app.add_option("--reps", opt_.reps, "Macro replications (or oracle paths)");
  app.add_option("--seed", opt_.seed, "Master seed for experiments and the oracle");
  app.add_option("--scenario", opt_.scenario,
                 "SC-Equal, MDM-Equal, SC-INC, SC-DEC, MDM-INC, MDM-DEC");
  app.add_option("--procedure", opt_.procedures, "DK1, DK2, DK3, KN, KN-UNK (list for sweep)")
      ->delimiter(',');

  app.add_option("--fit", opt_.fit, "Level-target fit: auto, alpha05, alpha10, uniform");
  app.add_option("--solver-seed", opt_.settings.rng_seed, "Seed of the eta solvers");
  app.add_option("--intervals", opt_.settings.integration_intervals, "Trapezoid intervals");
  app.add_option("--mc-samples", opt_.settings.mc_sample_count, "Monte Carlo samples per estimate");
  app.add_option("--batch-size", opt_.settings.batch_size, "Sign-test batch size");
  app.add_option("--max-batches", opt_.settings.max_batches, "Sign-test batch limit");
  app.add_option("--small-set-threshold", opt_.settings.small_set_threshold,
                 "Smallest set size solved by integration");
  app.add_option("--eta-tolerance", opt_.settings.deterministic_tolerance,
                 "Bisection width for the integration solver");
  app.add_option("--mc-tolerance", opt_.settings.stochastic_stop_tolerance,
                 "Bisection width for the Monte Carlo solver");
  app.add_option("--eta2-rule", opt_.eta2_rule, "neg-log-two-beta or exact-hitting");
  app.add_option("--gumbel", opt_.gumbel, "trapezoid or monte-carlo");

  app.add_option("--schedule", opt_.schedule, "Schedule CSV, or 'auto' to build and cache");
  app.add_option("--cache-dir", opt_.cache_dir, "Schedule cache directory ('' disables)");
  app.add_option("--out", opt_.out, "Results CSV (default: stdout)");
  app.add_option("--out-dir", opt_.out_dir, "Directory for eta-table files");
  app.add_option("--replay", opt_.replay, "Run one replication from recorded observations");
  app.add_option("--record", opt_.record, "Record one live replication to this file");
  app.add_option("--rep", opt_.rep, "Replication index used by --record");
  app.add_option("--level-profile", opt_.level_profile, "Write per-level ICS counts here");
  app.add_flag("--print-table", opt_.print_table, "Print the schedules side by side");
  app.add_option("--compare", opt_.compare, "Reference table (k,s,eta) to diff against");

  app.add_option("--eta", opt_.eta, "Threshold multiplier for the oracle");
  app.add_option("--step", opt_.step, "Oracle time step");
  app.add_option("--sigma", opt_.sigma, "Oracle noise standard deviation");

  app.add_subcommand("eta-table", "Solve and write eta schedules")->fallthrough();
  app.add_subcommand("run", "Run one macro experiment")->fallthrough();
  app.add_subcommand("sweep", "Run every (k, procedure) cell")->fallthrough();
  app.add_subcommand("oracle", "Compare the Brownian oracle with both evaluators")->fallthrough();
  app.require_subcommand(1);
}

int Cli::main(int argc, const char* const* argv) {
  CLI::App app{"Sequential ranking and selection with spherical continuation regions",
               "spheresel"};
  define(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out_, err_);
    return code == 0 ? kExitOk : kExitConfig;
  }
  const auto* sub = app.get_subcommands().front();
  echoed_ = "spheresel " + sub->get_name() + "\n" + app.config_to_str(true, false);

  try {
    if (sub->get_name() == "eta-table") return eta_table();
    if (sub->get_name() == "run") return run_experiment();
    if (sub->get_name() == "sweep") return sweep();
    return oracle();
  } catch (const ConfigError& e) {
    err_ << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SolverError& e) {
    err_ << "solver failure: " << e.what() << " (best iterate " << e.best_iterate() << ")\n";
    return kExitSolver;
  } catch (const DomainError& e) {
    err_ << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err_ << "replication failure: " << e.what() << '\n';
    return kExitReplication;
  }
}

eta::EtaSchedule Cli::obtain_schedule(long long k, double alpha) {
  if (opt_.schedule != "auto") {
    auto schedule = eta::read_schedule_file(opt_.schedule);
    if (schedule.k != k || schedule.alpha != alpha) {
      throw ConfigError("schedule '" + opt_.schedule + "' is for k=" +
                        std::to_string(schedule.k) + ", alpha=" + format_alpha(schedule.alpha) +
                        " but the experiment uses k=" + std::to_string(k) +
                        ", alpha=" + format_alpha(alpha));
    }
    return schedule;
  }
  const auto settings = resolve_settings(opt_);
  const auto fit = resolve_fit(opt_);
  fs::path cached;
  if (!opt_.cache_dir.empty()) {
    cached = fs::path(opt_.cache_dir) / schedule_cache_name(k, alpha, schedule_key(settings, fit));
    if (fs::exists(cached)) {
      log("using cached schedule " + cached.string());
      return eta::read_schedule_file(cached.string());
    }
  }
  log("building schedule for k=" + std::to_string(k));
  const auto built = eta::build_schedule(k, alpha, fit, settings, opt_.threads);
  for (const auto& w : built.warnings) err_ << "warning: " << w << '\n';
  if (!cached.empty()) {
    fs::create_directories(cached.parent_path());
    eta::write_schedule_file(cached.string(), built, settings.canonical_string());
  }
  return through_file_format(built);
}

harness::ScenarioConfig Cli::scenario_for(int k) const {
  harness::ScenarioOverrides o;
  o.delta = opt_.delta;
  o.alpha = opt_.alpha;
  o.n0 = opt_.n0;
  o.macro_reps = opt_.reps;
  o.seed = opt_.seed;
  return harness::make_scenario(opt_.scenario, k, o);
}

int Cli::eta_table() {
  const auto settings = resolve_settings(opt_);
  const auto fit = resolve_fit(opt_);
  std::map<int, eta::EtaSchedule> built;
  fs::create_directories(opt_.out_dir);
  for (int k : opt_.ks) {
    if (k < 2) throw ConfigError("k must be >= 2");
    eta::ScheduleProgress progress;
    if (opt_.verbose) {
      progress = [this, k](long long level, long long s, double eta) {
        err_ << "k=" << k << " level " << level << " s=" << s << " eta=" << eta << '\n';
      };
    }
    auto schedule = eta::build_schedule(k, opt_.alpha, fit, settings, opt_.threads, progress);
    for (const auto& w : schedule.warnings) err_ << "warning: k=" << k << ": " << w << '\n';
    const auto path =
        fs::path(opt_.out_dir) / ("eta_k" + std::to_string(k) + "_a" + format_alpha(opt_.alpha) + ".csv");
    eta::write_schedule_file(path.string(), schedule, echoed_);
    out_ << path.string() << '\n';
    built.emplace(k, std::move(schedule));
  }

  if (opt_.print_table) {
    out_ << "|I|";
    for (auto it = built.rbegin(); it != built.rend(); ++it) out_ << "\tk=" << it->first;
    out_ << '\n';
    const int top = built.rbegin()->first;
    for (int s = top; s >= 2; --s) {
      out_ << s;
      for (auto it = built.rbegin(); it != built.rend(); ++it) {
        out_ << '\t';
        if (s <= it->first) out_ << std::fixed << std::setprecision(5) << it->second.eta(s);
      }
      out_ << '\n';
    }
  }

  if (!opt_.compare.empty()) {
    std::ifstream in(opt_.compare);
    if (!in) throw ConfigError("cannot open reference table '" + opt_.compare + "'");
    std::string line;
    int compared = 0, off = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("k,", 0) == 0) continue;
      int k = 0;
      long long s = 0;
      double ref = 0.0;
      char c1 = 0, c2 = 0;
      std::istringstream ss(line);
      ss >> k >> c1 >> s >> c2 >> ref;
      auto it = built.find(k);
      if (ss.fail() || it == built.end()) continue;
      const double got = it->second.eta(s);
      ++compared;
      if (std::abs(got - ref) > 0.05) {
        ++off;
        out_ << "diff k=" << k << " s=" << s << " reference=" << ref << " computed=" << got
             << '\n';
      }
    }
    out_ << "compared " << compared << " entries, " << off << " beyond 0.05\n";
  }
  return kExitOk;
}

int Cli::run_experiment() {
  if (opt_.ks.size() != 1) throw ConfigError("run takes exactly one --k");
  if (opt_.procedures.size() != 1) throw ConfigError("run takes exactly one --procedure");
  const int k = opt_.ks.front();
  const auto procedure = procedures::procedure_from_string(opt_.procedures.front());
  const auto scenario = scenario_for(k);
  if (scenario.outside_iz) {
    err_ << "warning: best system does not beat the others by delta\n";
  }
  eta::EtaSchedule schedule;
  if (procedures::uses_schedule(procedure)) schedule = obtain_schedule(k, opt_.alpha);
  // Pairing errors surface here, before any sampling.
  const auto cfg = harness::make_procedure_config(scenario, procedure, &schedule);

  if (!opt_.replay.empty() || !opt_.record.empty()) {
    if (!opt_.replay.empty() && !opt_.record.empty()) {
      throw ConfigError("--replay and --record are mutually exclusive");
    }
    procedures::RunOutcome outcome;
    if (!opt_.replay.empty()) {
      auto sampler = samplers::ReplaySampler::from_file(opt_.replay, k);
      outcome = procedures::run_procedure(procedure, cfg, sampler);
    } else {
      samplers::GaussianSampler live(scenario.means, scenario.variances,
                                     rng::derive_seed(scenario.seed, static_cast<std::uint64_t>(opt_.rep)));
      samplers::RecordingSampler recorder(live);
      outcome = procedures::run_procedure(procedure, cfg, recorder);
      recorder.write_file(opt_.record, echoed_);
    }
    out_ << "selected,total_observations,stages,eliminations\n";
    out_ << outcome.selected + 1 << ',' << outcome.total_observations << ',' << outcome.stages
         << ',';
    for (std::size_t i = 0; i < outcome.elimination_order.size(); ++i) {
      const auto& e = outcome.elimination_order[i];
      out_ << (i ? ";" : "") << e.system + 1 << ':' << e.level << ':' << e.stage;
    }
    out_ << '\n';
    return kExitOk;
  }

  harness::ExperimentOptions eo;
  eo.threads = opt_.threads;
  const auto summary = harness::run_macro_experiment(scenario, procedure, &schedule, eo);
  log("wall time " + std::to_string(summary.wall_time) + " s");

  std::ostringstream row;
  harness::write_results_row(row, scenario, procedure, cfg.n0, summary);
  if (opt_.out.empty()) {
    out_ << comment_block(echoed_) << harness::kResultsHeader << '\n' << row.str();
  } else {
    const bool fresh = !fs::exists(opt_.out) || fs::file_size(opt_.out) == 0;
    std::ofstream f(opt_.out, std::ios::app | std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + opt_.out + "'");
    f << comment_block(echoed_);
    if (fresh) f << harness::kResultsHeader << '\n';
    f << row.str();
  }
  if (!opt_.level_profile.empty()) {
    std::ofstream f(opt_.level_profile, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + opt_.level_profile + "'");
    f << comment_block(echoed_);
    harness::write_level_profile(f, harness::profile_from_summary(summary, k));
  }
  return kExitOk;
}

int Cli::sweep() {
  std::ostringstream body;
  body << comment_block(echoed_) << harness::kResultsHeader << '\n';
  int status = kExitOk;
  for (int k : opt_.ks) {
    for (const auto& name : opt_.procedures) {
      try {
        const auto procedure = procedures::procedure_from_string(name);
        const auto scenario = scenario_for(k);
        eta::EtaSchedule schedule;
        if (procedures::uses_schedule(procedure)) schedule = obtain_schedule(k, opt_.alpha);
        const auto cfg = harness::make_procedure_config(scenario, procedure, &schedule);
        harness::ExperimentOptions eo;
        eo.threads = opt_.threads;
        const auto summary = harness::run_macro_experiment(scenario, procedure, &schedule, eo);
        harness::write_results_row(body, scenario, procedure, cfg.n0, summary);
        log("k=" + std::to_string(k) + " " + name + " done");
      } catch (const std::exception& e) {
        err_ << "cell k=" << k << " procedure=" << name << " failed: " << e.what() << '\n';
        int code = kExitReplication;
        if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) {
          code = kExitConfig;
        } else if (dynamic_cast<const SolverError*>(&e)) {
          code = kExitSolver;
        }
        if (status == kExitOk) status = code;
      }
    }
  }
  if (opt_.out.empty()) {
    out_ << body.str();
  } else {
    std::ofstream f(opt_.out, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + opt_.out + "'");
    f << body.str();
  }
  return status;
}

int Cli::oracle() {
  if (opt_.ks.size() != 1) throw ConfigError("oracle takes exactly one --k");
  const int k = opt_.ks.front();
  if (k < 3 || k > 6) throw ConfigError("oracle needs 3 <= k <= 6");
  if (!(opt_.eta > 0.0)) throw ConfigError("oracle needs --eta > 0");
  const auto settings = resolve_settings(opt_);

  const auto bm = harness::bm_first_elimination_oracle(k, opt_.eta, opt_.delta, opt_.sigma,
                                                       opt_.step, opt_.reps, opt_.seed, opt_.threads);
  const std::uint64_t mc_key = rng::derive_seed(settings.rng_seed, static_cast<std::uint64_t>(k));
  rng::NormalStream stream(mc_key);
  const auto mc = eta::level1_prob_mc(k, opt_.eta, settings, stream);
  const auto approx = eta::level1_prob_approx_detail(k, opt_.eta, settings);
  const double combined = std::sqrt(bm.standard_error * bm.standard_error +
                                    mc.standard_error * mc.standard_error);

  out_ << comment_block(echoed_);
  out_ << std::setprecision(8);
  out_ << "k: " << k << "\neta: " << opt_.eta << "\nstep: " << opt_.step
       << "\nseed: " << opt_.seed << "\nmc_key: " << mc_key << '\n';
  out_ << "oracle: " << bm.probability << " se " << bm.standard_error << " (reps " << bm.reps
       << ", mean steps " << bm.mean_steps << ")\n";
  out_ << "exact_mc: " << mc.probability << " se " << mc.standard_error << " (samples "
       << mc.samples << ")\n";
  out_ << "asymptotic: " << approx.probability
       << (approx.dropped_lower_term ? " (lower term dropped)" : "") << '\n';
  out_ << "oracle_minus_exact: " << bm.probability - mc.probability << " ("
       << (bm.probability - mc.probability) / combined << " combined se)\n";
  out_ << "asymptotic_minus_exact: " << approx.probability - mc.probability << " ("
       << (approx.probability - mc.probability) / mc.probability * 100.0 << "% relative)\n";
  return kExitOk;
}

}  // namespace

std::string schedule_cache_name(long long k, double alpha, unsigned long long key) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "eta_k%lld_a%s_%016llx.csv", k, format_alpha(alpha).c_str(), key);
  return buf;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Cli cli(out, err);
  return cli.main(argc, argv);
}

}  // namespace spheresel::cli
