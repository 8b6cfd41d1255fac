// ustatlab: command-line front end for the checks, pipelines and oracles.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ustat/decomp.hpp"
#include "ustat/error.hpp"
#include "ustat/experiment.hpp"
#include "ustat/instances.hpp"
#include "ustat/interp.hpp"
#include "ustat/oracles.hpp"
#include "ustat/report.hpp"
#include "ustat/verify.hpp"

using namespace ustat;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string format = "jsonl";
  unsigned threads = 1;
  bool exact = false;
  std::uint64_t mc = 0;
  double tol = 1e-8;
  bool tol_set = false;
  bool timing = false;
};

// Optional per-subcommand overrides of config keys.
struct Overrides {
  nlohmann::json values = nlohmann::json::object();

  template <class T>
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<T>(flag, [this, key](const T& v) { values[key] = v; }, help);
  }
};

void add_instance_options(CLI::App* app, Overrides& ov) {
  ov.bind<std::size_t>(app, "--n", "n", "coordinates / variables");
  ov.bind<std::size_t>(app, "--omega,--atoms", "atoms", "atoms of the base space");
  ov.bind<std::size_t>(app, "--m", "m", "arity");
  ov.bind<std::size_t>(app, "--I", "I", "weighted check: |I|");
  ov.bind<std::size_t>(app, "--J", "J", "weighted check: |J|");
  ov.bind<std::size_t>(app, "--value-dim", "value_dim", "Hilbert value axis dimension");
  ov.bind<std::size_t>(app, "--level,--M", "level", "Hoeffding level");
  ov.bind<double>(app, "--p", "p", "exponent p");
  ov.bind<double>(app, "--q", "q", "exponent q");
  ov.bind<double>(app, "--kappa", "kappa", "threshold kappa");
  ov.bind<double>(app, "--eps", "eps", "floor epsilon");
  ov.bind<double>(app, "--theta", "theta", "interpolation parameter");
  ov.bind<double>(app, "--t", "t", "K-functional parameter");
  ov.bind<std::size_t>(app, "--count", "count", "number of instances");
  ov.bind<bool>(app, "--binary", "binary", "binary weights");
  ov.bind<bool>(app, "--uniform", "uniform", "uniform base space");
  ov.bind<double>(app, "--cap", "cap", "constructive-direction cap");
  ov.bind<std::size_t>(app, "--max-iters", "max_iters", "solver iteration cap");
  ov.bind<std::size_t>(app, "--patience", "patience", "solver patience window");
  ov.bind<std::size_t>(app, "--budget", "budget", "search evaluations");
}

ExperimentConfig build_config(const Globals& g, const Overrides& ov, const std::string& check) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
  if (!check.empty()) c.check = check;
  for (auto it = ov.values.begin(); it != ov.values.end(); ++it) apply_config_value(c, it.key(), it.value());
  if (g.seed_set) c.seed = g.seed;
  if (!g.out.empty()) c.out = g.out;
  c.format = g.format;
  c.threads = g.threads;
  if (g.exact) c.mc_samples = 0;
  if (g.mc > 0) c.mc_samples = g.mc;
  if (g.tol_set) c.tol = g.tol;
  if (g.timing) c.timing = true;
  return c;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      raise(ErrorKind::BadConfig, "cannot parse number '" + tok + "'");
    }
  }
  return out;
}

double parse_exponent(std::string s) {
  if (!s.empty() && (s[0] == 'L' || s[0] == 'l')) s = s.substr(1);
  if (s == "inf" || s == "infty") return kInf;
  const auto v = parse_list(s);
  if (v.size() != 1 || !(v[0] >= 1.0)) raise(ErrorKind::BadConfig, "bad exponent '" + s + "'");
  return v[0];
}

Couple parse_couple(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) raise(ErrorKind::BadConfig, "couple must look like L1,L2");
  return Couple{NormSpec::lp(parse_exponent(s.substr(0, comma)), {0}),
                NormSpec::lp(parse_exponent(s.substr(comma + 1)), {0})};
}

// One-axis field from --atoms/--mass(es)/--value(s).
struct FieldArgs {
  std::size_t atoms = 1;
  double mass = 1.0;
  std::string masses;
  double value = 0.0;
  std::string values;

  void add(CLI::App* app) {
    app->add_option("--atoms", atoms, "number of atoms");
    app->add_option("--mass", mass, "mass of every atom");
    app->add_option("--masses", masses, "comma-separated atom masses");
    app->add_option("--value", value, "value at every atom");
    app->add_option("--values", values, "comma-separated values");
  }

  TensorField field() const {
    std::vector<double> w = masses.empty() ? std::vector<double>(atoms, mass) : parse_list(masses);
    std::vector<double> v = values.empty() ? std::vector<double>(w.size(), value) : parse_list(values);
    if (v.size() != w.size()) raise(ErrorKind::BadConfig, "values and masses differ in length");
    double total = 0.0;
    for (double x : w) total += x;
    const SpaceKind kind = std::abs(total - 1.0) <= 1e-12 ? SpaceKind::probability : SpaceKind::sigma_finite;
    return TensorField({make_space(std::move(w), kind)}, std::move(v));
  }
};

std::ostream& output(const Globals& g, std::ofstream& file) {
  if (g.out.empty()) return std::cout;
  file.open(g.out);
  if (!file) raise(ErrorKind::BadConfig, "cannot write '" + g.out + "'");
  return file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ustatlab: moment inequalities for nonnegative U-statistics on finite spaces"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "flat JSON config file");
  app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { g.seed = s, g.seed_set = true; },
                                         "master seed");
  app.add_option("--out", g.out, "output path (stdout if omitted)");
  app.add_option("--format", g.format, "jsonl, csv or both")->check(CLI::IsMember({"jsonl", "csv", "both"}));
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  auto* exact = app.add_flag("--exact", g.exact, "exact enumeration (default)");
  app.add_option("--mc", g.mc, "Monte Carlo with N samples")->excludes(exact);
  app.add_option_function<double>("--tol", [&](const double& t) { g.tol = t, g.tol_set = true; }, "solver tolerance");
  app.add_flag("--timing", g.timing, "record runtime_ms in reports");
  app.fallthrough();

  int code = kExitPass;
  auto finish_run = [&](const ExperimentConfig& c) {
    const RunSummary s = run(c, &std::cout);
    code = s.exit_code();
    std::cerr << s.reports.size() << " reports, " << s.asserted << " asserted, " << s.failed << " failed, "
              << s.errors << " errors\n";
  };

  // check <name>
  Overrides check_ov;
  std::string check_name;
  auto* check = app.add_subcommand("check", "run a named check over seeded instances");
  check->add_option("name", check_name, "check name")->required();
  add_instance_options(check, check_ov);
  check->callback([&] { finish_run(build_config(g, check_ov, check_name)); });

  // run --config
  Overrides run_ov;
  auto* runc = app.add_subcommand("run", "run the experiment described by --config");
  add_instance_options(runc, run_ov);
  runc->callback([&] {
    if (g.config.empty()) raise(ErrorKind::BadConfig, "run needs --config");
    finish_run(build_config(g, run_ov, ""));
  });

  // decouple
  Overrides dec_ov;
  auto* dec = app.add_subcommand("decouple", "coupled vs decoupled moments of random kernel families");
  add_instance_options(dec, dec_ov);
  bool dec_disjoint = false;
  dec->add_flag("--disjoint", dec_disjoint, "coordinate-disjoint index tuples");
  dec->callback([&] { finish_run(build_config(g, dec_ov, dec_disjoint ? "decoupling_disjoint" : "decoupling")); });

  // decompose <pipeline>
  Overrides dcp_ov;
  std::string pipeline;
  bool mean_zero = false;
  auto* dcp = app.add_subcommand("decompose", "run a decomposition pipeline on a random family");
  dcp->add_option("pipeline", pipeline, "js, four-summand or multilevel")
      ->required()
      ->check(CLI::IsMember({"js", "four-summand", "multilevel"}));
  add_instance_options(dcp, dcp_ov);
  dcp->add_flag("--mean-zero", mean_zero, "center the family and apply the mean-zero postprocess");
  dcp->callback([&] {
    ExperimentConfig c = build_config(g, dcp_ov, "decomposition_js");
    c.validate();
    CounterRng rng(instance_seed(c.seed, 0));
    const Space base = random_probability_space(rng, c.atoms, c.uniform);
    const std::size_t m = pipeline == "js" ? 1 : (pipeline == "four-summand" ? 2 : c.m);
    TensorField fbar = random_family_field(rng, base, c.n, m, 0.2);
    if (mean_zero)
      for (std::size_t a = 0; a < m; ++a) fbar = center_blocks(fbar, a);
    Decomposition d = pipeline == "js"             ? js_decompose(fbar, c.p)
                      : pipeline == "four-summand" ? four_summand(fbar, c.p)
                                                   : multilevel_decompose(fbar, c.p);
    const double cap = c.cap > 0.0 ? c.cap : decomposition_cap(m);
    const CheckReport rep = check_decomposition(d, cap);
    nlohmann::ordered_json j = to_json(d);
    if (mean_zero) {
      const Decomposition z = mean_zero_postprocess(d);
      j["mean_zero"] = to_json(z, false);
      j["mean_zero"]["reconstruction_error"] = json_number(z.reconstruction_error());
    }
    j["seed"] = c.seed;
    j["cap"] = cap;
    j["checks"] = {{"reconstruction", d.reconstruction_error() <= 1e-12},
                   {"disjoint", d.supports_disjoint()},
                   {"trivial_direction", rep.rhs >= rep.lhs * (1.0 - 1e-12)},
                   {"constructive_direction", rep.rhs <= cap * rep.lhs * (1.0 + 1e-12)},
                   {"pass", rep.pass}};
    std::ofstream file;
    output(g, file) << j.dump(2) << '\n';
    code = rep.pass ? kExitPass : kExitFail;
  });

  // kfun / thetaq
  FieldArgs kf_args;
  double kf_t = 1.0;
  std::string kf_couple = "L1,L2";
  bool kf_json = false;
  auto* kf = app.add_subcommand("kfun", "K-functional of a one-axis field");
  kf_args.add(kf);
  kf->add_option("--t", kf_t, "parameter t")->check(CLI::PositiveNumber);
  kf->add_option("--couple", kf_couple, "couple, e.g. L1,L2");
  kf->add_flag("--json", kf_json, "print the full result");
  kf->callback([&] {
    const TensorField f = kf_args.field();
    SolverOptions o;
    o.tol = g.tol;
    const KResult k = k_functional(f, kf_t, parse_couple(kf_couple), {}, o);
    std::ofstream file;
    std::ostream& os = output(g, file);
    if (!kf_json) {
      os << format_double(k.value) << '\n';
    } else {
      nlohmann::ordered_json j;
      j["value"] = json_number(k.value);
      j["dual"] = json_number(k.dual);
      j["gap"] = json_number(k.gap);
      j["iterations"] = k.iterations;
      j["part0"] = std::vector<double>(k.part0.values().begin(), k.part0.values().end());
      j["part1"] = std::vector<double>(k.part1.values().begin(), k.part1.values().end());
      os << j.dump() << '\n';
    }
    code = std::isfinite(k.gap) ? kExitPass : kExitFail;
  });

  FieldArgs tq_args;
  double tq_theta = 0.5, tq_q = 2.0;
  std::string tq_couple = "L1,L2";
  auto* tq = app.add_subcommand("thetaq", "(theta, q) interpolation norm of a one-axis field");
  tq_args.add(tq);
  tq->add_option("--theta", tq_theta, "theta in (0,1)");
  tq->add_option("--q", tq_q, "q >= 1");
  tq->add_option("--couple", tq_couple, "couple, e.g. L1,L2");
  tq->callback([&] {
    if (!(tq_theta > 0.0 && tq_theta < 1.0) || !(tq_q >= 1.0)) raise(ErrorKind::BadConfig, "need 0<theta<1, q>=1");
    ThetaQOptions o;
    o.threads = g.threads;
    o.solver.tol = g.tol;
    const double v = theta_q_norm(tq_args.field(), parse_couple(tq_couple), tq_theta, tq_q, o);
    std::ofstream file;
    output(g, file) << format_double(v) << '\n';
  });

  // search <check>
  Overrides se_ov;
  std::string se_check;
  auto* se = app.add_subcommand("search", "hill-climbing search for adverse instances");
  se->add_option("check", se_check, "weighted_lower_bound, decoupling, rosenthal or mz")->required();
  add_instance_options(se, se_ov);
  se->callback([&] {
    ExperimentConfig c = build_config(g, se_ov, se_check);
    SearchParams sp;
    sp.n = c.n;
    sp.m = c.m;
    sp.atoms = c.atoms;
    sp.I = c.I;
    sp.J = c.J;
    sp.p = c.p;
    sp.q = c.q_value();
    sp.kappa = c.kappa;
    sp.eps = c.eps;
    sp.binary = c.binary;
    sp.solver = c.solver();
    CheckReport r = extremal_search(se_check, sp, c.budget, c.seed);
    emit_reports({r}, c.format, c.out, std::cout);
    code = r.asserted && !r.pass ? kExitFail : kExitPass;
  });

  // oracle <name>
  Overrides or_ov;
  std::string or_name;
  FieldArgs or_args;
  double or_t = 1.0;
  std::string or_couple = "L1,L2";
  std::string or_set = "0";
  auto* orc = app.add_subcommand("oracle", "brute-force reference computations");
  orc->add_option("name", or_name, "kfun-grid, kfun-truncation, bucket, inclusion-exclusion, family-lhs")
      ->required()
      ->check(CLI::IsMember({"kfun-grid", "kfun-truncation", "bucket", "inclusion-exclusion", "family-lhs"}));
  or_args.add(orc);
  orc->add_option("--t", or_t, "parameter t")->check(CLI::PositiveNumber);
  orc->add_option("--couple", or_couple, "couple, e.g. L1,L2");
  orc->add_option("--set", or_set, "coordinate set A, e.g. 0,2");
  or_ov.bind<std::size_t>(orc, "--n", "n", "coordinates");
  or_ov.bind<std::size_t>(orc, "--omega", "atoms", "atoms of the base space");
  or_ov.bind<std::size_t>(orc, "--m", "m", "arity");
  or_ov.bind<double>(orc, "--p", "p", "exponent p");
  orc->callback([&] {
    nlohmann::ordered_json j;
    j["oracle"] = or_name;
    if (or_name == "kfun-grid" || or_name == "kfun-truncation") {
      const TensorField f = or_args.field();
      const Couple c = parse_couple(or_couple);
      if (or_name == "kfun-grid") {
        j["value"] = json_number(oracle::kfun_grid(f, or_t, c));
      } else {
        const double p0 = c.spec0.levels()[0].p, p1 = c.spec1.levels()[0].p;
        if (p0 != 1.0) raise(ErrorKind::BadConfig, "truncation oracle needs X0 = L1");
        j["value"] = json_number(oracle::kfun_truncation(f, or_t, p1, 0));
      }
    } else {
      ExperimentConfig c = build_config(g, or_ov, "decomposition_js");
      CounterRng rng(instance_seed(c.seed, 0));
      const Space base = random_probability_space(rng, c.atoms, true);
      if (or_name == "bucket" || or_name == "family-lhs") {
        const TensorField fbar = random_family_field(rng, base, c.n, c.m, 0.2);
        j["m"] = c.m;
        j["lhs"] = json_number(oracle::family_lhs_direct(fbar, c.p));
        if (or_name == "bucket") j["optimum"] = json_number(oracle::bucket_optimum(fbar, c.p));
        j["field"] = to_json(fbar);
      } else {
        const TensorField f = random_field(rng, product_axes(base, c.n), false);
        std::vector<std::size_t> coords;
        for (double v : parse_list(or_set)) coords.push_back(static_cast<std::size_t>(v));
        const CoordSet a = CoordSet::of(coords);
        const TensorField ie = oracle::project_inclusion_exclusion(f, a);
        j["set"] = coords;
        j["projection"] = std::vector<double>(ie.values().begin(), ie.values().end());
        j["max_diff_tensor_formula"] = max_abs_diff(ie, hoeffding_project(f, a));
      }
    }
    std::ofstream file;
    output(g, file) << j.dump() << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::BadConfig || e.kind() == ErrorKind::Parse ? kExitUsage : kExitFail;
  }
  return code;
}
