#include "ustat/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "ustat/decomp.hpp"
#include "ustat/error.hpp"
#include "ustat/instances.hpp"
#include "ustat/interp.hpp"
#include "ustat/report.hpp"

namespace ustat {

namespace {

[[noreturn]] void bad(const std::string& what) { raise(ErrorKind::BadConfig, what); }

}  // namespace

void ExperimentConfig::validate() const {
  if (check.empty()) bad("missing check");
  const auto& names = known_checks();
  if (std::find(names.begin(), names.end(), check) == names.end()) bad("unknown check '" + check + "'");
  if (atoms == 0 || atoms > 64) bad("atoms must be in [1, 64]");
  if (n == 0 || n > 16) bad("n must be in [1, 16]");
  if (m == 0 || m > kMaxMultilevelArity) bad("m must be in [1, 3]");
  if (I == 0 || J == 0) bad("I and J must be positive");
  if (!(p > 0.0) || !std::isfinite(p)) bad("p must be a positive real");
  const double q = q_value();
  if (!(q > 0.0) || !std::isfinite(q)) bad("q must be a positive real");
  if (!(eps >= 0.0 && eps < kappa && kappa <= 1.0)) bad("need 0 <= eps < kappa <= 1");
  if (!(theta > 0.0 && theta < 1.0)) bad("theta must lie in (0, 1)");
  if (!(t > 0.0) || !std::isfinite(t)) bad("t must be a positive real");
  if (count == 0) bad("count must be positive");
  if (threads == 0) bad("threads must be positive");
  if (!(tol > 0.0)) bad("tol must be positive");
  if (max_iters == 0 || patience == 0) bad("solver caps must be positive");
  if (cap < 0.0) bad("cap must be nonnegative");
  if (budget == 0) bad("budget must be positive");
  if (format != "jsonl" && format != "csv" && format != "both") bad("format must be jsonl, csv or both");
  const bool needs_p1 = check != "decoupling" && check != "decoupling_disjoint" && check != "square_function" &&
                        check != "euler";
  if (needs_p1 && p < 1.0) bad("p must be >= 1 for " + check);
  if ((check == "decoupling" || check == "decoupling_disjoint") && q > 1.0) bad("decoupling needs q <= 1");
  if (check == "thetaq" && q < 1.0) bad("thetaq needs q >= 1");
  if (check == "duality" && q <= 1.0) bad("duality needs q > 1");
  if (check == "mz" && n > 12) bad("mz enumerates signs for n <= 12");
}

double ExperimentConfig::q_value() const {
  if (q) return *q;
  return check == "decoupling" || check == "decoupling_disjoint" ? 0.5 : 2.0;
}

SolverOptions ExperimentConfig::solver() const {
  SolverOptions s;
  s.max_iters = max_iters;
  s.tol = tol;
  s.patience = patience;
  return s;
}

namespace {

template <class T>
T as_uint(const std::string& key, const nlohmann::json& v) {
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0 && !v.is_number_unsigned()))
    bad("'" + key + "' must be a nonnegative integer");
  return static_cast<T>(v.get<std::uint64_t>());
}

double as_real(const std::string& key, const nlohmann::json& v) {
  if (!v.is_number()) bad("'" + key + "' must be a number");
  return v.get<double>();
}

bool as_bool(const std::string& key, const nlohmann::json& v) {
  if (!v.is_boolean()) bad("'" + key + "' must be true or false");
  return v.get<bool>();
}

std::string as_string(const std::string& key, const nlohmann::json& v) {
  if (!v.is_string()) bad("'" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

void apply_config_value(ExperimentConfig& c, const std::string& key, const nlohmann::json& v) {
  if (v.is_object() || v.is_array()) bad("config is flat; '" + key + "' is nested");
  if (key == "check" || key == "pipeline") c.check = as_string(key, v);
  else if (key == "atoms" || key == "omega") c.atoms = as_uint<std::size_t>(key, v);
  else if (key == "n") c.n = as_uint<std::size_t>(key, v);
  else if (key == "m") c.m = as_uint<std::size_t>(key, v);
  else if (key == "I") c.I = as_uint<std::size_t>(key, v);
  else if (key == "J") c.J = as_uint<std::size_t>(key, v);
  else if (key == "value_dim") c.value_dim = as_uint<std::size_t>(key, v);
  else if (key == "level" || key == "M") c.level = as_uint<std::size_t>(key, v);
  else if (key == "p") c.p = as_real(key, v);
  else if (key == "q") c.q = as_real(key, v);
  else if (key == "kappa") c.kappa = as_real(key, v);
  else if (key == "eps") c.eps = as_real(key, v);
  else if (key == "theta") c.theta = as_real(key, v);
  else if (key == "t") c.t = as_real(key, v);
  else if (key == "binary") c.binary = as_bool(key, v);
  else if (key == "uniform") c.uniform = as_bool(key, v);
  else if (key == "count") c.count = as_uint<std::size_t>(key, v);
  else if (key == "seed") c.seed = as_uint<std::uint64_t>(key, v);
  else if (key == "method") {
    const std::string m = as_string(key, v);
    if (m == "exact") c.mc_samples = 0;
    else if (m != "mc") bad("method must be exact or mc");
  } else if (key == "mc_samples") c.mc_samples = as_uint<std::uint64_t>(key, v);
  else if (key == "threads") c.threads = as_uint<unsigned>(key, v);
  else if (key == "tol") c.tol = as_real(key, v);
  else if (key == "max_iters") c.max_iters = as_uint<std::size_t>(key, v);
  else if (key == "patience") c.patience = as_uint<std::size_t>(key, v);
  else if (key == "cap") c.cap = as_real(key, v);
  else if (key == "budget") c.budget = as_uint<std::size_t>(key, v);
  else if (key == "out") c.out = as_string(key, v);
  else if (key == "format") c.format = as_string(key, v);
  else if (key == "timing") c.timing = as_bool(key, v);
  else bad("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("config must be a JSON object");
  ExperimentConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) apply_config_value(c, it.key(), it.value());
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["check"] = c.check;
  j["atoms"] = c.atoms;
  j["n"] = c.n;
  j["m"] = c.m;
  j["I"] = c.I;
  j["J"] = c.J;
  j["value_dim"] = c.value_dim;
  j["level"] = c.level;
  j["p"] = c.p;
  j["q"] = c.q_value();
  j["kappa"] = c.kappa;
  j["eps"] = c.eps;
  j["theta"] = c.theta;
  j["t"] = c.t;
  j["binary"] = c.binary;
  j["uniform"] = c.uniform;
  j["count"] = c.count;
  j["seed"] = c.seed;
  j["mc_samples"] = c.mc_samples;
  j["threads"] = c.threads;
  j["tol"] = c.tol;
  j["max_iters"] = c.max_iters;
  j["patience"] = c.patience;
  j["cap"] = c.cap;
  j["budget"] = c.budget;
  j["format"] = c.format;
  return j;
}

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{
      "rosenthal",          "weighted_lower_bound",   "decoupling",
      "decoupling_disjoint", "square_function",       "mz",
      "euler",              "duality",                "trivial_direction_js",
      "trivial_direction_4sum", "trivial_direction_multilevel", "decomposition_js",
      "decomposition_4sum", "decomposition_multilevel", "kfun",
      "thetaq",             "k_closedness"};
  return names;
}

namespace {

Space make_base(const ExperimentConfig& c, CounterRng& rng) { return random_probability_space(rng, c.atoms, c.uniform); }

NormSpec random_fiber_spec(CounterRng& rng, std::size_t rank) {
  static const double exps[] = {1.0, 1.5, 2.0, 3.0};
  if (rank == 1) return NormSpec::lp(exps[rng.below(4)], {0});
  return NormSpec::mixed(exps[rng.below(4)], {1}, exps[rng.below(4)], {0});
}

CheckReport decomposition_report(const ExperimentConfig& c, CounterRng& rng, const std::string& which,
                                 bool trivial_only) {
  const Space base = make_base(c, rng);
  Decomposition d;
  std::size_t m = 1;
  if (which == "js") {
    d = js_decompose(random_family_field(rng, base, c.n, 1, 0.2), c.p);
  } else if (which == "4sum") {
    m = 2;
    d = four_summand(random_family_field(rng, base, c.n, 2, 0.2), c.p);
  } else {
    m = c.m;
    d = multilevel_decompose(random_family_field(rng, base, c.n, m, 0.2), c.p);
  }
  const double cap = trivial_only ? 0.0 : (c.cap > 0.0 ? c.cap : decomposition_cap(m));
  CheckReport r = check_decomposition(d, cap);
  r.check = (trivial_only ? "trivial_direction_" : "decomposition_") + which;
  r.params["n"] = c.n;
  r.params["atoms"] = c.atoms;
  r.params["m"] = m;
  return r;
}

CheckReport run_check(const ExperimentConfig& c, CounterRng& rng) {
  const std::string& ck = c.check;
  if (ck == "rosenthal") {
    std::vector<TensorField> fs;
    for (std::size_t i = 0; i < c.n; ++i)
      fs.push_back(random_field(rng, {make_base(c, rng)}, true, 0.3));
    return check_rosenthal(fs, c.p);
  }
  if (ck == "weighted_lower_bound") {
    WeightedInstance inst = random_weighted_instance(rng, c.I, c.J, c.atoms, c.binary);
    return check_weighted_lower_bound(inst, c.p, c.kappa, c.eps, c.solver());
  }
  if (ck == "decoupling" || ck == "decoupling_disjoint") {
    const Space base = make_base(c, rng);
    const KernelFamily k = ck == "decoupling" ? random_kernel_family(rng, base, c.n, c.m)
                                              : disjoint_kernel_family(rng, base, c.n, c.m);
    std::optional<McOptions> mc;
    if (c.mc_samples > 0) mc = McOptions{c.mc_samples, rng.next(), c.threads};
    CheckReport r = check_decoupling(k, c.q_value(), mc);
    r.check = ck;
    return r;
  }
  if (ck == "square_function") {
    const Space base = make_base(c, rng);
    return check_square_function(random_low_level_field(rng, base, c.n, std::min(c.level, c.n)), c.p,
                                 std::min(c.level, c.n));
  }
  if (ck == "mz") {
    const Space base = make_base(c, rng);
    return check_mz(random_mean_zero_fields(rng, base, c.n, c.value_dim), c.p);
  }
  if (ck == "euler") {
    const std::size_t rank = c.value_dim > 0 ? 2 : 1;
    std::vector<Space> axes{make_base(c, rng)};
    if (rank == 2) axes.push_back(value_axis(c.value_dim));
    const NormSpec spec = random_fiber_spec(rng, rank);
    const TensorField x = random_field(rng, axes, false);
    CheckReport r;
    r.check = "euler";
    r.params["spec"] = spec.describe();
    r.lhs = euler_check(spec, x);
    r.rhs = 1e-6;
    r.constant = 1e-6;
    r.ratio = r.lhs / r.rhs;
    r.pass = r.lhs <= 1e-6;
    return r;
  }
  if (ck == "duality") {
    const Space base = make_base(c, rng);
    const std::size_t lvl = std::min(c.level, c.n);
    const TensorField f = random_low_level_field(rng, base, c.n, lvl, std::max<std::size_t>(c.value_dim, 2));
    const NormSpec spec = random_fiber_spec(rng, 1);
    const Projector proj = [lvl](const TensorField& g) { return hoeffding_up_to(g, lvl); };
    CheckReport r;
    r.check = "duality";
    r.params["spec"] = spec.describe();
    r.params["q"] = c.q_value();
    r.params["level"] = lvl;
    r.lhs = duality_identity_check(f, c.q_value(), spec, proj, 1);
    r.rhs = 1e-5;
    r.constant = 1e-5;
    r.ratio = r.lhs / r.rhs;
    r.pass = r.lhs <= 1e-5;
    return r;
  }
  if (ck.starts_with("trivial_direction_")) return decomposition_report(c, rng, ck.substr(18), true);
  if (ck.starts_with("decomposition_")) return decomposition_report(c, rng, ck.substr(14), false);
  if (ck == "kfun") {
    const Space base = make_base(c, rng);
    std::vector<Space> axes{base};
    if (c.value_dim > 0) axes.push_back(value_axis(c.value_dim));
    const TensorField f = random_field(rng, axes, false);
    const Couple cp = c.value_dim > 0 ? Couple{NormSpec::mixed(2.0, {1}, 1.0, {0}), NormSpec::mixed(2.0, {1}, c.p, {0})}
                                      : Couple{NormSpec::lp(1.0, {0}), NormSpec::lp(c.p, {0})};
    const KResult k = k_functional(f, c.t, cp, {}, c.solver());
    CheckReport r;
    r.check = "kfun";
    r.params["t"] = c.t;
    r.params["p"] = c.p;
    r.params["gap"] = json_number(k.gap);
    r.params["iterations"] = k.iterations;
    r.lhs = k.value;
    r.rhs = k.dual;
    r.constant = 1.0;
    r.ratio = k.dual > 0.0 ? k.value / k.dual : 1.0;
    r.pass = std::isfinite(k.gap) && k.dual <= k.value * (1.0 + 1e-12) + 1e-300;
    return r;
  }
  if (ck == "thetaq") {
    const TensorField f = random_field(rng, {make_base(c, rng)}, false);
    const NormSpec x = NormSpec::lp(c.p, {0});
    ThetaQOptions o;
    o.solver = c.solver();
    const double q = c.q_value();
    const double val = theta_q_norm(f, Couple{x, x}, c.theta, q, o);
    const double closed = norm(f, x) * std::pow(1.0 / ((1.0 - c.theta) * q) + 1.0 / (c.theta * q), 1.0 / q);
    CheckReport r;
    r.check = "thetaq";
    r.params["theta"] = c.theta;
    r.params["q"] = q;
    r.lhs = val;
    r.rhs = closed;
    r.constant = 1e-3;
    r.ratio = closed > 0.0 ? val / closed : 1.0;
    r.pass = std::abs(r.ratio - 1.0) <= 1e-3;
    return r;
  }
  if (ck == "k_closedness") {
    const Space base = make_base(c, rng);
    const std::size_t lvl = std::min(c.level, c.n);
    const TensorField f = random_low_level_field(rng, base, c.n, lvl, c.value_dim);
    Couple couple{NormSpec::lp_all(1.0, c.n), NormSpec::lp_all(2.0, c.n)};
    if (c.value_dim > 0) {
      std::vector<std::size_t> coords(c.n);
      for (std::size_t k = 0; k < c.n; ++k) coords[k] = k;
      couple = Couple{NormSpec::mixed(2.0, {c.n}, 1.0, coords), NormSpec::mixed(2.0, {c.n}, 2.0, coords)};
    }
    const Projector proj = [lvl](const TensorField& g) { return hoeffding_up_to(g, lvl); };
    const ClosednessResult res = k_closedness(f, c.t, couple, proj, c.solver());
    CheckReport r;
    r.check = "k_closedness";
    r.params["t"] = c.t;
    r.params["level"] = lvl;
    r.lhs = res.constrained.value;
    r.rhs = res.unconstrained.value;
    r.constant = 1.0;
    r.ratio = res.ratio;
    r.asserted = true;
    r.pass = res.ratio >= 1.0 - 1e-9;
    return r;
  }
  bad("unknown check '" + ck + "'");
}

}  // namespace

CheckReport run_instance(const ExperimentConfig& c, std::size_t k) {
  const std::uint64_t seed = instance_seed(c.seed, k);
  CounterRng rng(seed);
  const auto start = std::chrono::steady_clock::now();
  CheckReport r;
  try {
    r = run_check(c, rng);
  } catch (const Error& e) {
    r = CheckReport{};
    r.check = c.check;
    r.pass = false;
    r.asserted = false;
    r.lhs = r.rhs = r.ratio = r.constant = std::numeric_limits<double>::quiet_NaN();
    r.note = e.what();
  }
  r.seed = seed;
  r.params["instance_index"] = k;
  if (c.timing)
    r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void emit_reports(const std::vector<CheckReport>& reports, const std::string& format, const std::string& path,
                  std::ostream& fallback) {
  auto write_jsonl_to = [&](std::ostream& os) {
    for (const CheckReport& r : reports) write_jsonl(os, r);
  };
  auto write_csv_to = [&](std::ostream& os) {
    os << csv_header() << '\n';
    for (const CheckReport& r : reports) os << to_csv_row(r) << '\n';
  };
  auto open = [](const std::string& p) {
    std::ofstream os(p);
    if (!os) raise(ErrorKind::BadConfig, "cannot write '" + p + "'");
    return os;
  };
  if (path.empty()) {
    if (format != "csv") write_jsonl_to(fallback);
    if (format != "jsonl") write_csv_to(fallback);
    return;
  }
  if (format == "jsonl") {
    auto os = open(path);
    write_jsonl_to(os);
  } else if (format == "csv") {
    auto os = open(path);
    write_csv_to(os);
  } else {
    auto a = open(path + ".jsonl");
    write_jsonl_to(a);
    auto b = open(path + ".csv");
    write_csv_to(b);
  }
}

RunSummary run(const ExperimentConfig& c, std::ostream* out) {
  c.validate();
  RunSummary s;
  s.reports.resize(c.count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < c.count; k = next++) s.reports[k] = run_instance(c, k);
  };
  const unsigned workers = std::min<unsigned>(c.threads, static_cast<unsigned>(c.count));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const CheckReport& r : s.reports) {
    if (r.asserted) {
      ++s.asserted;
      if (!r.pass) ++s.failed;
    } else if (!r.note.empty() && !r.pass) {
      ++s.errors;
    }
  }
  if (out) emit_reports(s.reports, c.format, c.out, *out);
  return s;
}

}  // namespace ustat
