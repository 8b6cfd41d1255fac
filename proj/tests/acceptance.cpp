// Acceptance suite: one PASS/FAIL line per criterion, details in
// acceptance_report.json. Reference values come from the brute-force oracles
// or from loops written here, never from the code paths under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ustat/decomp.hpp"
#include "ustat/hoeffding.hpp"
#include "ustat/instances.hpp"
#include "ustat/interp.hpp"
#include "ustat/oracles.hpp"
#include "ustat/verify.hpp"

using namespace ustat;
using Json = nlohmann::ordered_json;

namespace {

struct Outcome {
  bool pass = true;
  std::string summary;
  Json details = Json::object();
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::size_t pick(CounterRng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1)) % (hi - lo + 1);
}

template <class T>
T pick(CounterRng& rng, const std::vector<T>& v) {
  return v[pick(rng, 0, v.size() - 1)];
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(q * static_cast<double>(v.size() - 1))];
}

Json distribution(const std::vector<double>& v) {
  return {{"count", v.size()},
          {"min", quantile(v, 0.0)},
          {"q10", quantile(v, 0.1)},
          {"median", quantile(v, 0.5)},
          {"q90", quantile(v, 0.9)},
          {"max", quantile(v, 1.0)}};
}

TensorField random_on(CounterRng& rng, std::size_t atoms, std::size_t n) {
  return random_field(rng, product_axes(random_probability_space(rng, atoms, false), n), false);
}

// ---------------------------------------------------------------------------

Outcome hoeffding_suite() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  CounterRng rng(101);
  double idem = 0, ortho = 0, partial = 0, total = 0, adjoint = 0, meanzero = 0, ie = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = pick(rng, 1, 5), atoms = pick(rng, 1, 3);
    const Space base = random_probability_space(rng, atoms, false);
    const TensorField f = random_field(rng, product_axes(base, n), false);
    const TensorField g = random_field(rng, product_axes(base, n), false);
    const auto parts = hoeffding_decompose(f);
    TensorField sum = TensorField::filled(f.axes(), 0.0);
    for (const auto& p : parts) sum = sum + p;
    total = std::max(total, max_abs_diff(sum, f));
    for (std::uint32_t a = 0; a < parts.size(); ++a) {
      const CoordSet A(a);
      const TensorField pa = hoeffding_project(f, A);
      idem = std::max(idem, max_abs_diff(hoeffding_project(pa, A), pa));
      ie = std::max(ie, max_abs_diff(pa, oracle::project_inclusion_exclusion(f, A)));
      adjoint = std::max(adjoint, std::abs(inner_product(pa, g) - inner_product(f, hoeffding_project(g, A))));
      for (std::size_t j : A.elements()) meanzero = std::max(meanzero, max_abs(average_along(pa, j)));
      TensorField sub = TensorField::filled(f.axes(), 0.0);
      for (std::uint32_t b = 0; b < parts.size(); ++b) {
        if (CoordSet(b).subset_of(A)) sub = sub + parts[b];
        if (b > a) ortho = std::max(ortho, std::abs(inner_product(parts[a], parts[b])));
      }
      partial = std::max(partial, max_abs_diff(sub, oracle::cond_expect_direct(f, A)));
    }
  }
  const double secs = seconds_since(t0);
  out.details = {{"instances", 200},        {"idempotence", idem},   {"orthogonality", ortho},
                 {"partial_sums", partial}, {"completeness", total}, {"self_adjointness", adjoint},
                 {"mean_zero", meanzero},   {"vs_inclusion_exclusion", ie}, {"seconds", secs}};
  out.pass = idem <= 1e-12 && ortho <= 1e-10 && partial <= 1e-12 && total <= 1e-12 && adjoint <= 1e-12 &&
             meanzero <= 1e-12 && ie <= 1e-12 && secs < 10.0;
  out.summary = "200 fields, worst orthogonality " + fmt(ortho) + ", worst sum identity " + fmt(std::max(partial, total)) +
                ", " + fmt(secs) + " s";
  return out;
}

// ---------------------------------------------------------------------------

double certificate_oracle(const TensorField& part, CoordSet lp_axes, double p) {
  std::vector<std::size_t> inner, outer;
  for (std::size_t a = 0; a < part.rank(); ++a) (lp_axes.contains(a) ? inner : outer).push_back(a);
  return oracle::nested_norm(part, NormSpec::mixed(p, inner, 1.0, outer));
}

struct Split {
  std::vector<std::pair<CoordSet, TensorField>> parts;
};

// Every pipeline output, and a random nonnegative split over all 2^m buckets.
Split random_split(CounterRng& rng, const TensorField& fbar) {
  const std::size_t m = fbar.rank(), buckets = std::size_t{1} << m;
  std::vector<std::vector<double>> vals(buckets, std::vector<double>(fbar.size()));
  for (std::size_t k = 0; k < fbar.size(); ++k) {
    std::vector<double> u(buckets);
    double s = 0.0;
    for (double& x : u) s += (x = rng.uniform() < 0.3 ? 0.0 : rng.uniform());
    if (s == 0.0) u[0] = s = 1.0;
    double used = 0.0;
    for (std::size_t b = 0; b + 1 < buckets; ++b) used += (vals[b][k] = fbar[k] * u[b] / s);
    vals[buckets - 1][k] = fbar[k] - used;
  }
  Split sp;
  for (std::size_t b = 0; b < buckets; ++b)
    sp.parts.emplace_back(CoordSet(static_cast<std::uint32_t>(b)), fbar.with_values(vals[b]));
  return sp;
}

Outcome trivial_direction() {
  Outcome out;
  CounterRng rng(202);
  const std::vector<double> ps = {1.0, 1.5, 2.0, 3.0};
  double worst = kInf, worst_recon = 0.0;
  std::size_t checked = 0, violations = 0;
  std::map<std::string, std::size_t> per_pipeline;
  for (int rep = 0; rep < 500; ++rep) {
    const std::string pipe = std::vector<std::string>{"js", "four-summand", "multilevel"}[rep % 3];
    const std::size_t m = pipe == "js" ? 1 : pipe == "four-summand" ? 2 : pick(rng, 2, 3);
    const std::size_t n = pick(rng, 1, 3), atoms = pick(rng, 1, m == 3 ? 2 : 3);
    const double p = ps[rep % 4];
    const Space base = random_probability_space(rng, atoms, false);
    const TensorField fbar = random_family_field(rng, base, n, m, 0.2);
    const double lhs = oracle::family_lhs_direct(fbar, p);
    const Decomposition d = pipe == "js" ? js_decompose(fbar, p)
                            : pipe == "four-summand" ? four_summand(fbar, p)
                                                     : multilevel_decompose(fbar, p);
    worst_recon = std::max(worst_recon, d.reconstruction_error());
    Split sp;
    for (const auto& part : d.parts) sp.parts.emplace_back(part.lp_axes, part.field);
    for (const Split& s : {sp, random_split(rng, fbar)}) {
      double certs = 0.0;
      TensorField sum = TensorField::filled(fbar.axes(), 0.0);
      for (const auto& [J, part] : s.parts) {
        certs += certificate_oracle(part, J, p);
        sum = sum + part;
      }
      worst_recon = std::max(worst_recon, max_abs_diff(sum, fbar));
      const double ratio = lhs == 0.0 ? kInf : certs / lhs;
      worst = std::min(worst, ratio);
      if (certs < lhs * (1.0 - 1e-12)) ++violations;
      ++checked;
    }
    ++per_pipeline[pipe];
  }
  out.details = {{"decompositions", checked},
                 {"per_pipeline", per_pipeline},
                 {"violations", violations},
                 {"min_certificates_over_lhs", worst},
                 {"max_reconstruction_error", worst_recon}};
  out.pass = violations == 0 && worst_recon <= 1e-12;
  out.summary = std::to_string(checked) + " decompositions of 500 families, " + std::to_string(violations) +
                " violations, min ratio " + fmt(worst);
  return out;
}

// ---------------------------------------------------------------------------

// Threshold, LHS and RHS of the weighted inequality computed by direct loops.
struct WeightedReference {
  double lhs = 0.0;
  TensorField g;
};

WeightedReference weighted_reference(const WeightedInstance& inst, double p, double kappa, double eps) {
  const std::size_t a = inst.base.size(), I = inst.I, J = inst.J;
  std::size_t total = 1;
  for (std::size_t i = 0; i < I; ++i) total *= a;
  std::vector<std::size_t> x(I);
  auto decode = [&](std::size_t flat, double& weight) {
    weight = 1.0;
    for (std::size_t i = I; i-- > 0;) {
      x[i] = flat % a;
      flat /= a;
      weight *= inst.base.weight(x[i]);
    }
  };
  WeightedReference ref;
  // avg[i][j][xi] = E over the other coordinates of (w_ij v eps) at x_i = xi.
  std::vector<double> avg(I * J * a, 0.0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    double weight;
    decode(flat, weight);
    double inner = 0.0;
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t j = 0; j < J; ++j) {
        const double w = std::max(inst.w[i * J + j][flat], eps);
        inner += std::pow(std::abs(w * inst.f[(i * a + x[i]) * J + j]), p);
        avg[(i * J + j) * a + x[i]] += weight / inst.base.weight(x[i]) * w;
      }
    ref.lhs += weight * std::pow(inner, 1.0 / p);
  }
  std::vector<double> g(inst.f.size());
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t xi = 0; xi < a; ++xi)
      for (std::size_t j = 0; j < J; ++j) {
        const bool keep = avg[(i * J + j) * a + xi] >= kappa - 1e-12;
        g[(i * a + xi) * J + j] = keep ? inst.f[(i * a + xi) * J + j] : 0.0;
      }
  ref.g = inst.f.with_values(std::move(g));
  return ref;
}

Outcome weighted_lower_bound() {
  Outcome out;
  CounterRng rng(303);
  const std::vector<double> ps = {1.0, 1.5, 2.0};
  std::size_t violations = 0, library_failures = 0, solver_mismatch = 0, grid_checked = 0, grid_mismatch = 0;
  double worst_margin = kInf, worst_solver = 0.0, worst_grid = 0.0;
  std::map<std::string, double> min_ratio;
  for (int rep = 0; rep < 10000; ++rep) {
    const std::size_t I = pick(rng, 1, 3), J = pick(rng, 1, 3), atoms = pick(rng, 2, 4);
    const double p = ps[rep % 3];
    const double kappa = std::vector<double>{1.0, 0.75, 0.5}[(rep / 3) % 3];
    const double eps = (rep / 9) % 2 ? 0.25 * kappa : 0.0;
    const WeightedInstance inst = random_weighted_instance(rng, I, J, atoms, true);
    const WeightedReference ref = weighted_reference(inst, p, kappa, eps);
    const double rhs = max_abs(ref.g) == 0.0 ? 0.0 : oracle::kfun_truncation(ref.g, 1.0, p, 1);
    const double c = std::pow(kappa - eps, 2.0 - 1.0 / p) * std::pow(2.0, -(1.0 - 1.0 / p));
    if (ref.lhs < c * rhs * (1.0 - 1e-8)) ++violations;
    if (rhs > 0.0) {
      worst_margin = std::min(worst_margin, ref.lhs / (c * rhs));
      auto& slot = min_ratio["p=" + fmt(p)];
      slot = slot == 0.0 ? ref.lhs / rhs : std::min(slot, ref.lhs / rhs);
    }
    const CheckReport r = check_weighted_lower_bound(inst, p, kappa, eps);
    if (!r.pass) ++library_failures;
    const double se = rhs == 0.0 ? std::abs(r.rhs) : rel_err(r.rhs, rhs);
    worst_solver = std::max(worst_solver, se);
    if (se > 1e-4) ++solver_mismatch;
    if (I * atoms * J <= 4 && grid_checked < 60 && rhs > 0.0) {
      const double grid = oracle::kfun_grid(ref.g, 1.0, weighted_couple(p));
      const double ge = rel_err(r.rhs, grid);
      worst_grid = std::max(worst_grid, ge);
      if (ge > 1e-4) ++grid_mismatch;
      ++grid_checked;
    }
  }
  // Singleton J, unit weights, kappa = 1, eps = 0: LHS >= RHS / 2.
  std::size_t half_violations = 0;
  double half_min = kInf;
  for (int rep = 0; rep < 1000; ++rep) {
    WeightedInstance inst = random_weighted_instance(rng, pick(rng, 1, 3), 1, pick(rng, 2, 4), true);
    for (TensorField& w : inst.w) w = TensorField::filled(w.axes(), 1.0);
    const double p = ps[rep % 3];
    const WeightedReference ref = weighted_reference(inst, p, 1.0, 0.0);
    const double rhs = oracle::kfun_truncation(ref.g, 1.0, p, 1);
    if (ref.lhs < 0.5 * rhs * (1.0 - 1e-8)) ++half_violations;
    half_min = std::min(half_min, ref.lhs / rhs);
  }
  out.details = {{"instances", 10000},
                 {"violations", violations},
                 {"library_check_failures", library_failures},
                 {"min_lhs_over_constant_rhs", worst_margin},
                 {"min_lhs_over_rhs", min_ratio},
                 {"solver_vs_exact_max_rel", worst_solver},
                 {"solver_mismatches", solver_mismatch},
                 {"grid_checked", grid_checked},
                 {"solver_vs_grid_max_rel", worst_grid},
                 {"grid_mismatches", grid_mismatch},
                 {"singleton_instances", 1000},
                 {"singleton_violations_of_half", half_violations},
                 {"singleton_min_ratio", half_min}};
  out.pass = violations == 0 && library_failures == 0 && solver_mismatch == 0 && grid_mismatch == 0 &&
             half_violations == 0;
  out.summary = "10000 instances, " + std::to_string(violations) + " violations, min LHS/(C RHS) " +
                fmt(worst_margin) + ", singleton min ratio " + fmt(half_min) + ", solver/grid agree to " +
                fmt(std::max(worst_solver, worst_grid));
  return out;
}

// ---------------------------------------------------------------------------

Outcome decomposition_pipelines() {
  Outcome out;
  CounterRng rng(404);
  const std::vector<double> ps = {1.0, 1.5, 2.0, 3.0};
  std::size_t bad_recon = 0, bad_disjoint = 0, below = 0, above = 0;
  Json calibration = Json::object();
  std::map<std::string, double> max_ratio;
  for (int rep = 0; rep < 1000; ++rep) {
    const bool four = rep % 2 == 0;
    const std::size_t m = four ? 2 : 1 + (rep / 2) % 3;
    const std::size_t n = pick(rng, 1, 3), atoms = pick(rng, 1, m == 3 ? 2 : 3);
    const double p = ps[(rep / 6) % 4];
    const TensorField fbar = random_family_field(rng, random_probability_space(rng, atoms, false), n, m, 0.2);
    const Decomposition d = four ? four_summand(fbar, p) : multilevel_decompose(fbar, p);
    const double lhs = oracle::family_lhs_direct(fbar, p);
    double certs = 0.0;
    for (const auto& part : d.parts) certs += certificate_oracle(part.field, part.lp_axes, p);
    if (d.reconstruction_error() > 1e-12) ++bad_recon;
    if (!d.supports_disjoint()) ++bad_disjoint;
    const double cap = decomposition_cap(m);
    if (certs < lhs * (1.0 - 1e-9)) ++below;
    if (certs > cap * lhs * (1.0 + 1e-12)) ++above;
    if (lhs > 0.0) {
      const std::string key = std::string(four ? "four_summand" : "multilevel") + " m=" + std::to_string(m) +
                              " p=" + fmt(p);
      max_ratio[key] = std::max(max_ratio[key], certs / lhs);
    }
  }
  for (const auto& [k, v] : max_ratio) calibration[k] = v;
  out.details = {{"instances", 1000},
                 {"reconstruction_failures", bad_recon},
                 {"disjointness_failures", bad_disjoint},
                 {"below_lhs", below},
                 {"above_cap", above},
                 {"caps", {decomposition_cap(1), decomposition_cap(2), decomposition_cap(3)}},
                 {"max_certificate_ratio", calibration}};
  double overall = 0.0;
  for (const auto& [k, v] : max_ratio) overall = std::max(overall, v);
  out.pass = bad_recon == 0 && bad_disjoint == 0 && below == 0 && above == 0;
  out.summary = "1000 decompositions, exact and disjoint, certificate/LHS max " + fmt(overall) +
                " within caps 64/1024/2^20";
  return out;
}

// ---------------------------------------------------------------------------

Outcome kfunctional_solver() {
  Outcome out;
  CounterRng rng(505);
  std::size_t over = 0, dual_violations = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int kind = rep % 5;
    TensorField f;
    Couple c;
    if (kind < 4) {
      const std::size_t atoms = pick(rng, 1, 4);
      const Space s = rep % 2 ? random_probability_space(rng, atoms, false) : counting_space(atoms);
      f = random_field(rng, {s}, rep % 3 == 0);
      const double p0 = kind == 3 ? 1.5 : 1.0;
      const double p1 = std::vector<double>{2.0, 3.0, 1.5, 3.0}[kind];
      c = {NormSpec::lp(p0, {0}), NormSpec::lp(p1, {0})};
    } else {
      f = random_field(rng, {random_probability_space(rng, 2, false), value_axis(2)}, false);
      c = {NormSpec::mixed(2.0, {1}, 1.0, {0}), NormSpec::mixed(2.0, {1}, 2.0, {0})};
    }
    const double t = std::exp(rng.uniform(-2.0, 2.0));
    const KResult k = k_functional(f, t, c);
    const double ref = oracle::kfun_grid(f, t, c);
    const double e = rel_err(k.value, ref);
    worst = std::max(worst, e);
    if (e > 1e-4) ++over;
    if (k.dual > ref * (1.0 + 1e-12)) ++dual_violations;
  }
  // t -> K(f, t) on 33 equally spaced points.
  std::size_t monotone_fail = 0, concave_fail = 0;
  double worst_second = -kInf;
  for (int rep = 0; rep < 10; ++rep) {
    const TensorField f = random_field(rng, {random_probability_space(rng, 4, false)}, false);
    const Couple c{NormSpec::lp(1.0, {0}), NormSpec::lp(rep % 2 ? 3.0 : 2.0, {0})};
    std::vector<double> k;
    for (int j = 1; j <= 33; ++j) k.push_back(k_functional(f, 0.125 * j, c).value);
    for (std::size_t j = 1; j < k.size(); ++j)
      if (k[j] < k[j - 1] - 1e-8) ++monotone_fail;
    for (std::size_t j = 1; j + 1 < k.size(); ++j) {
      const double second = k[j + 1] - 2.0 * k[j] + k[j - 1];
      worst_second = std::max(worst_second, second);
      if (second > 1e-8) ++concave_fail;
    }
  }
  out.details = {{"instances", 100},
                 {"max_rel_error_vs_grid", worst},
                 {"over_tolerance", over},
                 {"dual_exceeds_reference", dual_violations},
                 {"t_grid_curves", 10},
                 {"monotonicity_failures", monotone_fail},
                 {"concavity_failures", concave_fail},
                 {"max_second_difference", worst_second}};
  out.pass = over == 0 && dual_violations == 0 && monotone_fail == 0 && concave_fail == 0;
  out.summary = "100 instances, max rel error " + fmt(worst) + " vs grid, max second difference " +
                fmt(worst_second) + ", dual bound never above reference";
  return out;
}

// ---------------------------------------------------------------------------

Outcome theta_q() {
  Outcome out;
  CounterRng rng(606);
  double worst = 0.0;
  Json rows = Json::array();
  for (auto [theta, q] : {std::pair{0.25, 1.0}, {0.5, 2.0}, {0.75, 2.0}}) {
    for (int rep = 0; rep < 5; ++rep) {
      const TensorField f = random_field(rng, {random_probability_space(rng, 3, false), counting_space(2)}, false);
      const NormSpec x = rep % 2 ? NormSpec::mixed(2.0, {1}, 1.5, {0}) : NormSpec::lp_all(3.0, 2);
      const double closed =
          oracle::nested_norm(f, x) * std::pow(1.0 / ((1.0 - theta) * q) + 1.0 / (theta * q), 1.0 / q);
      const double e = rel_err(theta_q_norm(f, {x, x}, theta, q), closed);
      worst = std::max(worst, e);
      rows.push_back({{"theta", theta}, {"q", q}, {"rel_error", e}});
    }
  }
  out.details = {{"cases", rows}, {"max_rel_error", worst}};
  out.pass = worst <= 1e-3;
  out.summary = "15 fields over 3 (theta, q) pairs, max rel error " + fmt(worst);
  return out;
}

// ---------------------------------------------------------------------------

Outcome decoupling() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  CounterRng rng(707);
  std::size_t failures = 0, disjoint_fail = 0, oracle_mismatch = 0;
  double worst_invariance = 0.0, worst_disjoint = 0.0;
  std::map<double, std::vector<double>> ratios;
  for (double q : {0.5, 1.0}) {
    for (int rep = 0; rep < 300; ++rep) {
      const Space base = random_probability_space(rng, 2, rep % 2 == 0);
      const KernelFamily k = random_kernel_family(rng, base, 4, 2, rep % 3 ? 1.0 : 0.5);
      const CheckReport r = check_decoupling(k, q);
      if (!r.pass) ++failures;
      const double c = oracle::ustat_moment_direct(k, q, false), d = oracle::ustat_moment_direct(k, q, true);
      if (rel_err(r.ratio, c / d) > 1e-12) ++oracle_mismatch;
      ratios[q].push_back(c / d);
      const double rev = oracle::ustat_moment_direct(reverse_family(k), q, false) /
                         oracle::ustat_moment_direct(reverse_family(k), q, true);
      const double perm = oracle::ustat_moment_direct(permute_atoms(k), q, false) /
                          oracle::ustat_moment_direct(permute_atoms(k), q, true);
      worst_invariance = std::max({worst_invariance, std::abs(rev - c / d), std::abs(perm - c / d)});

      const KernelFamily dk = disjoint_kernel_family(rng, base, 4, 2);
      const double dr = oracle::ustat_moment_direct(dk, q, false) / oracle::ustat_moment_direct(dk, q, true);
      worst_disjoint = std::max(worst_disjoint, std::abs(dr - 1.0));
      if (std::abs(dr - 1.0) > 1e-12 || !check_decoupling(dk, q).pass) ++disjoint_fail;
    }
  }
  const double secs = seconds_since(t0);
  out.details = {{"instances_per_q", 300},
                 {"check_failures", failures},
                 {"oracle_mismatches", oracle_mismatch},
                 {"max_invariance_deviation", worst_invariance},
                 {"max_disjoint_deviation", worst_disjoint},
                 {"ratio_q_0.5", distribution(ratios[0.5])},
                 {"ratio_q_1", distribution(ratios[1.0])},
                 {"seconds", secs}};
  out.pass = failures == 0 && oracle_mismatch == 0 && disjoint_fail == 0 && worst_invariance <= 1e-10 && secs < 60.0;
  out.summary = "600 families, q=1/2 ratio in [" + fmt(quantile(ratios[0.5], 0)) + ", " +
                fmt(quantile(ratios[0.5], 1)) + "], disjoint deviation " + fmt(worst_disjoint) + ", invariance " +
                fmt(worst_invariance) + ", " + fmt(secs) + " s";
  return out;
}

// ---------------------------------------------------------------------------

NormSpec random_spec(CounterRng& rng, std::size_t rank) {
  const std::vector<double> exps = {1.0, 1.5, 2.0, 3.0};
  std::vector<std::size_t> axes(rank);
  for (std::size_t a = 0; a < rank; ++a) axes[a] = a;
  for (std::size_t a = rank; a-- > 1;) std::swap(axes[a], axes[pick(rng, 0, a)]);
  std::vector<NormLevel> levels;
  std::size_t pos = 0;
  while (pos < rank) {
    const std::size_t take = pick(rng, 1, rank - pos);
    levels.push_back({pick(rng, exps), std::vector<std::size_t>(axes.begin() + pos, axes.begin() + pos + take)});
    pos += take;
  }
  return NormSpec(levels);
}

Outcome calculus_lemmas() {
  Outcome out;
  CounterRng rng(808);
  double worst_euler = 0.0, worst_duality = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t rank = pick(rng, 1, 3);
    std::vector<Space> axes;
    for (std::size_t a = 0; a < rank; ++a)
      axes.push_back(rng.coin() ? random_probability_space(rng, pick(rng, 1, 3), false) : counting_space(pick(rng, 1, 3)));
    TensorField x = random_field(rng, axes, false, 0.2);
    if (max_abs(x) == 0.0) x = TensorField::filled(axes, 1.0);
    worst_euler = std::max(worst_euler, euler_check(random_spec(rng, rank), x));
  }
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = pick(rng, 1, 3), level = pick(rng, 0, n), vdim = pick(rng, 1, 3);
    const Space base = random_probability_space(rng, 2, false);
    TensorField f = random_low_level_field(rng, base, n, level, vdim);
    const Projector proj = [level](const TensorField& g) { return hoeffding_up_to(g, level); };
    const double q = pick(rng, std::vector<double>{1.5, 2.0, 3.0});
    const NormSpec x = NormSpec::lp(pick(rng, std::vector<double>{1.0, 1.5, 2.0, 3.0}), {0});
    worst_duality = std::max(worst_duality, duality_identity_check(f, q, x, proj, 1));
  }
  out.details = {{"euler_instances", 100},
                 {"max_euler_residual", worst_euler},
                 {"duality_instances", 100},
                 {"max_duality_residual", worst_duality}};
  out.pass = worst_euler <= 1e-6 && worst_duality <= 1e-5;
  out.summary = "Euler residual " + fmt(worst_euler) + ", duality residual " + fmt(worst_duality) + " over 100 + 100";
  return out;
}

// ---------------------------------------------------------------------------

// E || sum_i s_i X_i ||_p over the product space and (optionally) signs.
double expected_sum_norm(const std::vector<TensorField>& x, double p, bool signs) {
  const std::size_t n = x.size(), a = x[0].axis(0).size(), v = x[0].rank() > 1 ? x[0].axis(1).size() : 1;
  std::size_t points = 1;
  for (std::size_t i = 0; i < n; ++i) points *= a;
  const std::size_t sign_count = signs ? std::size_t{1} << n : 1;
  double total = 0.0;
  for (std::size_t s = 0; s < sign_count; ++s)
    for (std::size_t flat = 0; flat < points; ++flat) {
      std::size_t rem = flat;
      double weight = 1.0;
      std::vector<double> sum(v, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t xi = rem % a;
        rem /= a;
        weight *= x[i].axis(0).weight(xi);
        const double sign = signs && ((s >> i) & 1U) ? -1.0 : 1.0;
        for (std::size_t k = 0; k < v; ++k) sum[k] += sign * x[i][xi * v + k];
      }
      double nv = 0.0;
      for (double c : sum) nv += std::pow(std::abs(c), p);
      total += weight * std::pow(nv, 1.0 / p) / static_cast<double>(sign_count);
    }
  return total;
}

Outcome mz_khintchine() {
  Outcome out;
  // Four sign patterns of r1 + r2: |2|, |0|, |0|, |-2| -> mean 1, against sqrt 2.
  const double expected = (2.0 + 0.0 + 0.0 + 2.0) / 4.0 / std::sqrt(2.0);
  const double k = khintchine_ratio({1.0, 1.0}, 1.0);
  CounterRng rng(909);
  std::size_t failures = 0, mismatch = 0;
  double lo = kInf, hi = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = pick(rng, 1, 4), atoms = pick(rng, 2, 3), vdim = rep % 3 == 0 ? 2 : 0;
    const double p = std::vector<double>{1.0, 1.5, 2.0, 3.0}[rep % 4];
    const auto fields = random_mean_zero_fields(rng, random_probability_space(rng, atoms, false), n, vdim);
    const CheckReport r = check_mz(fields, p);
    if (!r.pass) ++failures;
    const double plain = expected_sum_norm(fields, p, false), sym = expected_sum_norm(fields, p, true);
    const double s = plain / sym;
    if (rel_err(r.params["symmetrization_ratio"].get<double>(), s) > 1e-12) ++mismatch;
    if (s < 0.5 || s > 2.0) ++failures;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  out.details = {{"khintchine_z11_p1", k},
                 {"expected", expected},
                 {"symmetrization_instances", 100},
                 {"symmetrization_min", lo},
                 {"symmetrization_max", hi},
                 {"failures", failures},
                 {"enumeration_mismatches", mismatch}};
  out.pass = std::abs(k - expected) <= 1e-12 && failures == 0 && mismatch == 0;
  out.summary = "Khintchine ratio " + fmt(k) + " (2^-1/2 expected), symmetrization in [" + fmt(lo) + ", " + fmt(hi) +
                "] over 100";
  return out;
}

// ---------------------------------------------------------------------------

struct ClosednessBatch {
  double max_required = 0.0;
  double max_extra = 0.0;
  double min_ratio = kInf;
  std::size_t unresolved = 0;
};

ClosednessBatch closedness_batch(std::uint64_t seed) {
  CounterRng rng(seed);
  ClosednessBatch b;
  const Couple c4{NormSpec::lp_all(1, 4), NormSpec::lp_all(2, 4)};
  const Couple c3{NormSpec::lp_all(1, 3), NormSpec::lp_all(2, 3)};
  const Projector proj = [](const TensorField& g) { return hoeffding_up_to(g, 2); };
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = rep % 2 ? 4 : 3;
    const TensorField f = random_low_level_field(rng, random_probability_space(rng, 2, rep % 4 < 2), n, 2);
    for (double t : {0.25, 1.0, 4.0, 0.35, 0.5, 0.7}) {
      const ClosednessResult r = k_closedness(f, t, n == 4 ? c4 : c3, proj);
      if (!std::isfinite(r.constrained.gap) || !std::isfinite(r.unconstrained.gap)) ++b.unresolved;
      b.min_ratio = std::min(b.min_ratio, r.ratio);
      const bool required = t == 0.25 || t == 1.0 || t == 4.0;
      (required ? b.max_required : b.max_extra) = std::max(required ? b.max_required : b.max_extra, r.ratio);
    }
  }
  return b;
}

Outcome k_closedness_experiment() {
  Outcome out;
  const ClosednessBatch a = closedness_batch(1001), b = closedness_batch(2002);
  const double min_ratio = std::min(a.min_ratio, b.min_ratio);
  const double drift = std::abs(a.max_required - b.max_required) / std::max(a.max_required, b.max_required);
  const double drift_extra = std::abs(a.max_extra - b.max_extra) / std::max(a.max_extra, b.max_extra);
  out.details = {{"batches", 2},
                 {"instances_per_batch", 200},
                 {"t_required", {0.25, 1.0, 4.0}},
                 {"max_ratio_required", {a.max_required, b.max_required}},
                 {"relative_drift_required", drift},
                 {"t_extra", {0.35, 0.5, 0.7}},
                 {"max_ratio_extra", {a.max_extra, b.max_extra}},
                 {"relative_drift_extra", drift_extra},
                 {"min_ratio", min_ratio},
                 {"unresolved_solves", a.unresolved + b.unresolved}};
  out.pass = min_ratio >= 1.0 - 1e-9 && drift <= 0.05;
  out.summary = "2 x 200 fields in V<=2, max ratio " + fmt(a.max_required) + " / " + fmt(b.max_required) +
                " at t in {1/4,1,4}, " + fmt(a.max_extra) + " / " + fmt(b.max_extra) + " at t in {0.35,0.5,0.7}";
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"hoeffding algebra", hoeffding_suite},
      {"trivial direction", trivial_direction},
      {"weighted lower bound", weighted_lower_bound},
      {"decomposition pipelines", decomposition_pipelines},
      {"k-functional solver", kfunctional_solver},
      {"theta-q norm", theta_q},
      {"decoupling", decoupling},
      {"calculus lemmas", calculus_lemmas},
      {"mz and khintchine", mz_khintchine},
      {"k-closedness", k_closedness_experiment},
  };
  Json report = Json::object();
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    o.details["wall_seconds"] = seconds_since(t0);
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << " (" << criteria[k].first
              << "): " << o.summary << std::endl;
    report[std::to_string(k + 1)] = {{"name", criteria[k].first}, {"pass", o.pass}, {"details", o.details}};
  }
  std::ofstream("acceptance_report.json") << report.dump(2) << '\n';
  return failed == 0 ? 0 : 1;
}
