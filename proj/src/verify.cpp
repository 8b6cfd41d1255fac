#include "ustat/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ustat/error.hpp"

namespace ustat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_ratio(double a, double b) {
  if (a == 0.0 && b == 0.0) return 1.0;
  if (b == 0.0) return kInf;
  return a / b;
}

std::size_t checked_product(const std::vector<std::size_t>& sizes, std::size_t guard) {
  std::size_t total = 1;
  for (std::size_t s : sizes) {
    if (s != 0 && total > guard / s) raise(ErrorKind::TooLarge, "enumeration exceeds the element guard");
    total *= s;
  }
  return total;
}

// Odometer over sizes; fn(index) for every multi-index in row-major order.
template <class Fn>
void odometer(const std::vector<std::size_t>& sizes, Fn&& fn) {
  std::vector<std::size_t> idx(sizes.size(), 0);
  for (std::size_t s : sizes)
    if (s == 0) return;
  while (true) {
    fn(idx);
    std::size_t k = sizes.size();
    while (k > 0) {
      --k;
      if (++idx[k] < sizes[k]) break;
      idx[k] = 0;
      if (k == 0) return;
    }
    if (sizes.empty()) return;
  }
}

struct Kahan {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double y = v - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

double lp_of(const TensorField& f, double p) { return norm(f, NormSpec::lp_all(p, f.rank())); }

void require_p(double p, double lo = 1.0) {
  if (!(p >= lo) || !std::isfinite(p)) raise(ErrorKind::BadInstance, "exponent out of range");
}

}  // namespace

CheckReport check_rosenthal(const std::vector<TensorField>& fields, double p) {
  require_p(p);
  if (fields.empty()) raise(ErrorKind::BadInstance, "no variables");
  std::vector<std::size_t> sizes;
  for (const TensorField& f : fields) {
    if (f.rank() != 1) raise(ErrorKind::BadAxis, "each variable is a field on one space");
    if (!f.axis(0).is_probability()) raise(ErrorKind::NotProbability, "variables live on probability spaces");
    for (double v : f.values())
      if (v < 0.0) raise(ErrorKind::NotNonnegative, "variables must be nonnegative");
    sizes.push_back(f.size());
  }
  checked_product(sizes, kDefaultElementGuard);

  Kahan acc;
  odometer(sizes, [&](const std::vector<std::size_t>& idx) {
    double s = 0.0, w = 1.0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      s += fields[i][idx[i]];
      w *= fields[i].weight(idx[i]);
    }
    acc.add(w * std::pow(s, p));
  });
  double l1 = 0.0, lpp = 0.0;
  for (const TensorField& f : fields) {
    l1 += lp_of(f, 1.0);
    lpp += std::pow(lp_of(f, p), p);
  }

  CheckReport r;
  r.check = "rosenthal";
  r.params["n"] = fields.size();
  r.params["p"] = p;
  r.lhs = std::pow(acc.sum, 1.0 / p);
  r.rhs = std::max(l1, std::pow(lpp, 1.0 / p));
  r.constant = 1.0;
  r.ratio = safe_ratio(r.lhs, r.rhs);
  r.pass = r.lhs >= r.rhs * (1.0 - 1e-12);
  return r;
}

double weighted_constant(double p, double kappa, double eps, bool binary) {
  const double inv_pprime = 1.0 - 1.0 / p;
  if (binary) return std::pow(kappa - eps, 2.0 - 1.0 / p) * std::pow(2.0, -inv_pprime);
  return std::pow(kappa, p) * std::pow(2.0, -inv_pprime);
}

Couple weighted_couple(double p) {
  return Couple{NormSpec::mixed(p, {1}, 1.0, {0}), NormSpec::mixed(p, {1}, p, {0})};
}

namespace {

void validate_instance(const WeightedInstance& inst) {
  if (inst.I == 0 || inst.J == 0) raise(ErrorKind::BadInstance, "index sets must be nonempty");
  if (!inst.base.is_probability()) raise(ErrorKind::NotProbability, "base space must be a probability space");
  const std::size_t a = inst.base.size();
  if (inst.f.rank() != 2 || inst.f.axis(0).size() != inst.I * a || inst.f.axis(1).size() != inst.J)
    raise(ErrorKind::BadInstance, "f must live on [I copies of the base, J]");
  if (inst.w.size() != inst.I * inst.J) raise(ErrorKind::BadInstance, "need one weight per (i, j)");
  const std::vector<Space> waxes(inst.I, inst.base);
  for (const TensorField& w : inst.w) {
    if (w.axes() != waxes) raise(ErrorKind::BadInstance, "weights must live on base^I");
    for (double v : w.values())
      if (!(v >= 0.0 && v <= 1.0)) raise(ErrorKind::BadInstance, "weights must take values in [0,1]");
  }
}

bool all_binary(const WeightedInstance& inst) {
  for (const TensorField& w : inst.w)
    for (double v : w.values())
      if (v != 0.0 && v != 1.0) return false;
  return true;
}

}  // namespace

TensorField thresholded_family(const WeightedInstance& inst, double kappa, double eps) {
  validate_instance(inst);
  const std::size_t a = inst.base.size();
  std::vector<double> out(inst.f.size(), 0.0);
  std::vector<std::size_t> idx(inst.I, 0);
  for (std::size_t i = 0; i < inst.I; ++i) {
    for (std::size_t j = 0; j < inst.J; ++j) {
      const TensorField ind = threshold_weights(inst.w[i * inst.J + j], kappa, eps, {i});
      for (std::size_t x = 0; x < a; ++x) {
        std::fill(idx.begin(), idx.end(), 0);
        idx[i] = x;
        const std::size_t e = (i * a + x) * inst.J + j;
        if (ind.at(idx) != 0.0) out[e] = inst.f[e];
      }
    }
  }
  return inst.f.with_values(std::move(out));
}

double weighted_lhs(const WeightedInstance& inst, double p, double eps) {
  validate_instance(inst);
  const std::size_t a = inst.base.size();
  const std::vector<std::size_t> sizes(inst.I, a);
  checked_product(sizes, kDefaultElementGuard);
  Kahan acc;
  std::size_t flat = 0;
  odometer(sizes, [&](const std::vector<std::size_t>& x) {
    double mu = 1.0;
    for (std::size_t i = 0; i < inst.I; ++i) mu *= inst.base.weight(x[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < inst.I; ++i)
      for (std::size_t j = 0; j < inst.J; ++j) {
        const double w = std::max(inst.w[i * inst.J + j][flat], eps);
        s += std::pow(std::abs(w * inst.f[(i * a + x[i]) * inst.J + j]), p);
      }
    acc.add(mu * std::pow(s, 1.0 / p));
    ++flat;
  });
  return acc.sum;
}

CheckReport check_weighted_lower_bound(const WeightedInstance& inst, double p, double kappa, double eps,
                                       const SolverOptions& solver) {
  require_p(p);
  if (!(eps >= 0.0 && eps < kappa && kappa <= 1.0))
    raise(ErrorKind::BadThreshold, "need 0 <= eps < kappa <= 1");
  const bool binary = all_binary(inst);
  const TensorField g = thresholded_family(inst, kappa, eps);

  CheckReport r;
  r.check = "weighted_lower_bound";
  r.params["I"] = inst.I;
  r.params["J"] = inst.J;
  r.params["atoms"] = inst.base.size();
  r.params["p"] = p;
  r.params["kappa"] = kappa;
  r.params["eps"] = eps;
  r.params["binary"] = binary;
  r.lhs = weighted_lhs(inst, p, eps);
  r.constant = weighted_constant(p, kappa, eps, binary);
  if (max_abs(g) == 0.0) {
    r.rhs = 0.0;
    r.params["dual"] = 0.0;
    r.params["gap"] = 0.0;
    r.ratio = safe_ratio(r.lhs, 0.0);
    r.pass = true;
    return r;
  }
  const KResult k = k_functional(g, 1.0, weighted_couple(p), {}, solver);
  r.rhs = k.value;
  r.params["dual"] = k.dual;
  r.params["gap"] = std::isfinite(k.gap) ? nlohmann::ordered_json(k.gap) : nlohmann::ordered_json(nullptr);
  r.params["iterations"] = k.iterations;
  r.ratio = safe_ratio(r.lhs, r.rhs);
  r.pass = std::isfinite(k.gap) && r.lhs >= r.constant * k.dual * (1.0 - 1e-8);
  if (!std::isfinite(k.gap)) r.note = "solver did not certify the right side";
  return r;
}

CheckReport check_decomposition(const Decomposition& d, double cap) {
  CheckReport r;
  r.check = "decomposition";
  r.params["pipeline"] = d.pipeline;
  r.params["p"] = d.p;
  r.params["parts"] = d.parts.size();
  const double err = d.reconstruction_error();
  const bool disjoint_ok = !d.disjoint || d.supports_disjoint();
  r.lhs = d.lhs;
  r.rhs = d.certificate_sum();
  r.constant = cap > 0.0 ? cap : 1.0;
  r.ratio = safe_ratio(r.rhs, r.lhs);
  r.params["reconstruction_error"] = err;
  r.params["disjoint"] = d.disjoint;
  const bool trivial = r.rhs >= r.lhs * (1.0 - 1e-12);
  const bool constructive = !(cap > 0.0) || r.rhs <= cap * r.lhs * (1.0 + 1e-12);
  r.pass = err <= 1e-12 && disjoint_ok && trivial && constructive;
  if (!trivial) r.note = "certificate sum below the left side";
  else if (!constructive) r.note = "certificate sum above cap";
  else if (!disjoint_ok) r.note = "supports overlap";
  else if (err > 1e-12) r.note = "reconstruction mismatch";
  return r;
}

KernelFamily reverse_family(const KernelFamily& k) {
  const std::size_t m = k.arity();
  const std::size_t n = k.coordinates();
  std::vector<Kernel> out;
  for (const Kernel& ker : k.kernels()) {
    std::vector<std::size_t> idx(m);
    for (std::size_t c = 0; c < m; ++c) idx[c] = n - 1 - ker.index[m - 1 - c];
    // Argument c of the new kernel is argument m-1-c of the old one.
    const TensorField& f = ker.field;
    TensorField g = TensorField::generate(f.axes(), [&](std::span<const std::size_t> x) {
      std::vector<std::size_t> y(x.begin(), x.end());
      std::reverse(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(m));
      return f.at(y);
    });
    out.push_back({std::move(idx), std::move(g)});
  }
  return KernelFamily(m, n, k.base(), k.value_space(), std::move(out), k.order());
}

KernelFamily permute_atoms(const KernelFamily& k) {
  const Space& base = k.base();
  const std::size_t a = base.size();
  // Cycle each class of equal-weight atoms by one step.
  std::vector<std::size_t> sigma(a);
  std::iota(sigma.begin(), sigma.end(), 0);
  std::vector<bool> seen(a, false);
  for (std::size_t x = 0; x < a; ++x) {
    if (seen[x]) continue;
    std::vector<std::size_t> cls;
    for (std::size_t y = x; y < a; ++y)
      if (!seen[y] && base.weight(y) == base.weight(x)) {
        cls.push_back(y);
        seen[y] = true;
      }
    for (std::size_t t = 0; t < cls.size(); ++t) sigma[cls[t]] = cls[(t + 1) % cls.size()];
  }
  const std::size_t m = k.arity();
  std::vector<Kernel> out;
  for (const Kernel& ker : k.kernels()) {
    const TensorField& f = ker.field;
    TensorField g = TensorField::generate(f.axes(), [&](std::span<const std::size_t> x) {
      std::vector<std::size_t> y(x.begin(), x.end());
      for (std::size_t c = 0; c < m; ++c) y[c] = sigma[y[c]];
      return f.at(y);
    });
    out.push_back({ker.index, std::move(g)});
  }
  return KernelFamily(m, k.coordinates(), base, k.value_space(), std::move(out), k.order());
}

namespace {

bool coordinate_disjoint(const KernelFamily& k) {
  std::vector<int> used(k.coordinates(), 0);
  for (const Kernel& ker : k.kernels()) {
    std::vector<std::size_t> idx = ker.index;
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) return false;
    for (std::size_t i : idx)
      if (used[i]++) return false;
  }
  return true;
}

double moment_ratio(const KernelFamily& k, double q, const std::optional<McOptions>& mc, double* coupled,
                    double* decoupled) {
  const double c = ustat_moment(k, 1.0, q, Coupling::coupled, mc).value;
  const double d = ustat_moment(k, 1.0, q, Coupling::decoupled, mc).value;
  if (coupled) *coupled = c;
  if (decoupled) *decoupled = d;
  return safe_ratio(c, d);
}

}  // namespace

CheckReport check_decoupling(const KernelFamily& k, double q, const std::optional<McOptions>& mc) {
  if (!(q > 0.0 && q <= 1.0)) raise(ErrorKind::BadInstance, "decoupling needs 0 < q <= 1");
  CheckReport r;
  r.check = "decoupling";
  r.params["m"] = k.arity();
  r.params["n"] = k.coordinates();
  r.params["atoms"] = k.base().size();
  r.params["q"] = q;
  r.params["kernels"] = k.kernels().size();
  r.constant = kNaN;
  r.ratio = moment_ratio(k, q, mc, &r.lhs, &r.rhs);

  // Invariances hold exactly only for exact evaluation.
  const double tol = mc ? kInf : 1e-10;
  const double rev = moment_ratio(reverse_family(k), q, mc, nullptr, nullptr);
  const double perm = moment_ratio(permute_atoms(k), q, mc, nullptr, nullptr);
  const double dev = std::max(std::abs(rev - r.ratio), std::abs(perm - r.ratio));
  r.params["invariance_deviation"] = dev;
  const bool disjoint = coordinate_disjoint(k);
  r.params["coordinate_disjoint"] = disjoint;

  const bool positive = (r.lhs == 0.0 && r.rhs == 0.0) || (r.ratio > 0.0 && std::isfinite(r.ratio));
  const bool invariant = dev <= tol;
  const bool unit = !disjoint || mc || std::abs(r.ratio - 1.0) <= 1e-12;
  r.pass = positive && invariant && unit;
  if (!positive) r.note = "ratio not positive and finite";
  else if (!invariant) r.note = "ratio changed under relabeling";
  else if (!unit) r.note = "ratio differs from 1 on a coordinate-disjoint family";
  return r;
}

CheckReport check_square_function(const TensorField& f, double p, std::size_t M) {
  require_p(p, 0.0);
  const ProductLayout lay = product_layout(f);
  CheckReport r;
  r.check = "square_function";
  r.params["n"] = lay.n;
  r.params["atoms"] = lay.base.size();
  r.params["p"] = p;
  r.params["M"] = M;
  const TensorField s = square_function(f, M);
  r.lhs = lp_of(f, p);
  r.rhs = lp_of(s, p);
  r.ratio = safe_ratio(r.lhs, r.rhs);

  std::size_t components = 0;
  if (lay.n <= kMaxDecomposeCoordinates) {
    const double floor = 1e-12 * std::max(1.0, max_abs(f));
    for (const TensorField& c : hoeffding_decompose(f))
      if (max_abs(c) > floor) ++components;
  }
  r.params["components"] = components;
  const bool exact = M == 0 || p == 2.0 || components <= 1;
  r.asserted = exact;
  r.constant = exact ? 1.0 : kNaN;
  r.pass = exact ? std::abs(r.ratio - 1.0) <= 1e-10 : (r.ratio > 0.0 && std::isfinite(r.ratio));
  return r;
}

double khintchine_ratio(const std::vector<double>& z, double p) {
  require_p(p, 0.0);
  const std::size_t n = z.size();
  if (n > 30) raise(ErrorKind::TooLarge, "too many signs to enumerate");
  double z2 = 0.0;
  for (double v : z) z2 += v * v;
  if (z2 == 0.0) raise(ErrorKind::Undefined, "ratio undefined for z = 0");
  Kahan acc;
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t s = 0; s < patterns; ++s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += ((s >> i) & 1U) ? -z[i] : z[i];
    acc.add(std::pow(std::abs(sum), p));
  }
  return std::pow(acc.sum / static_cast<double>(patterns), 1.0 / p) / std::sqrt(z2);
}

CheckReport check_mz(const std::vector<TensorField>& fields, double p) {
  require_p(p);
  const std::size_t n = fields.size();
  if (n == 0) raise(ErrorKind::BadInstance, "no variables");
  if (n > 12) raise(ErrorKind::TooLarge, "sign enumeration is limited to n <= 12");
  const std::size_t vdim = fields[0].rank() == 2 ? fields[0].axis(1).size() : 1;
  std::vector<std::size_t> sizes;
  for (const TensorField& f : fields) {
    if (f.rank() < 1 || f.rank() > 2) raise(ErrorKind::BadAxis, "variables are fields on one space (+ value axis)");
    if (!f.axis(0).is_probability()) raise(ErrorKind::NotProbability, "variables live on probability spaces");
    const std::size_t d = f.rank() == 2 ? f.axis(1).size() : 1;
    if (d != vdim) raise(ErrorKind::BadAxis, "value dimensions differ");
    const TensorField mean = average_along(f, 0);
    if (max_abs(mean) > 1e-10 * std::max(1.0, max_abs(f))) raise(ErrorKind::NotCanonical, "variables must be mean zero");
    sizes.push_back(f.axis(0).size());
  }
  const std::size_t atoms = checked_product(sizes, kDefaultElementGuard);
  checked_product({atoms, std::size_t{1} << n, vdim}, kDefaultElementGuard);

  auto lp_vec = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::pow(std::abs(x), p);
    return std::pow(s, 1.0 / p);
  };
  Kahan plain, square, sym;
  std::vector<double> sum(vdim), sq(vdim), ssum(vdim);
  const std::uint64_t patterns = std::uint64_t{1} << n;
  odometer(sizes, [&](const std::vector<std::size_t>& x) {
    double mu = 1.0;
    for (std::size_t i = 0; i < n; ++i) mu *= fields[i].axis(0).weight(x[i]);
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sq.begin(), sq.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t v = 0; v < vdim; ++v) {
        const double val = fields[i][x[i] * vdim + v];
        sum[v] += val;
        sq[v] += val * val;
      }
    for (double& v : sq) v = std::sqrt(v);
    plain.add(mu * lp_vec(sum));
    square.add(mu * lp_vec(sq));
    Kahan inner;
    for (std::uint64_t s = 0; s < patterns; ++s) {
      std::fill(ssum.begin(), ssum.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double sign = ((s >> i) & 1U) ? -1.0 : 1.0;
        for (std::size_t v = 0; v < vdim; ++v) ssum[v] += sign * fields[i][x[i] * vdim + v];
      }
      inner.add(lp_vec(ssum));
    }
    sym.add(mu * inner.sum / static_cast<double>(patterns));
  });

  CheckReport r;
  r.check = "mz";
  r.params["n"] = n;
  r.params["p"] = p;
  r.params["value_dim"] = vdim;
  r.lhs = plain.sum;
  r.rhs = square.sum;
  r.ratio = safe_ratio(r.lhs, r.rhs);
  const double sym_ratio = safe_ratio(plain.sum, sym.sum);
  r.params["symmetrized"] = sym.sum;
  r.params["symmetrization_ratio"] = sym_ratio;
  r.constant = 2.0;
  r.pass = sym_ratio >= 0.5 * (1.0 - 1e-12) && sym_ratio <= 2.0 * (1.0 + 1e-12) && std::isfinite(r.ratio) &&
           (r.ratio > 0.0 || r.lhs == 0.0);
  return r;
}

double euler_check(const NormSpec& spec, const TensorField& x) {
  const double scale = max_abs(x);
  if (scale == 0.0) raise(ErrorKind::Undefined, "Euler identity is checked away from 0");
  const CompiledNorm phi(x.axes(), spec);
  const double h = 1e-5 * scale;
  std::vector<double> v(x.values().begin(), x.values().end());
  const double base = phi.value(v);
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double xk = v[k];
    if (xk == 0.0) continue;
    const double hk = std::min(h, std::abs(xk) / 2.0);
    v[k] = xk + hk;
    const double up = phi.value(v);
    v[k] = xk - hk;
    const double dn = phi.value(v);
    v[k] = xk;
    s += xk * (up - dn) / (2.0 * hk);
  }
  return std::abs(s - base) / base;
}

double duality_identity_check(const TensorField& f, double q, const NormSpec& x_spec, const Projector& projector,
                              std::size_t fiber_rank) {
  if (!(q > 1.0) || !std::isfinite(q)) raise(ErrorKind::BadInstance, "duality identity needs q > 1");
  if (fiber_rank == 0 || fiber_rank >= f.rank()) raise(ErrorKind::BadAxis, "need leading and fiber axes");
  if (max_abs(f) == 0.0) raise(ErrorKind::Undefined, "identity is checked for f != 0");
  if (projector && max_abs_diff(projector(f), f) > 1e-9 * std::max(1.0, max_abs(f)))
    raise(ErrorKind::BadInstance, "f is not in the subspace");

  const std::size_t lead = f.rank() - fiber_rank;
  const std::vector<Space> fiber_axes(f.axes().begin() + static_cast<std::ptrdiff_t>(lead), f.axes().end());
  const CompiledNorm X(fiber_axes, x_spec);
  const std::size_t N = X.size();
  const std::size_t outer = f.size() / N;

  std::vector<double> G(f.size(), 0.0);
  Kahan lhs;
  std::vector<double> fib(N);
  for (std::size_t o = 0; o < outer; ++o) {
    const double mu = f.weight(o * N) / X.entry_weights()[0];
    std::copy_n(f.values().begin() + static_cast<std::ptrdiff_t>(o * N), N, fib.begin());
    const double nx = X.value(fib);
    lhs.add(mu * std::pow(nx, q));
    if (nx == 0.0) continue;
    const double h = 1e-5 * *std::max_element(fib.begin(), fib.end(), [](double a, double b) {
      return std::abs(a) < std::abs(b);
    });
    const double amp = std::pow(nx, q - 1.0);
    for (std::size_t k = 0; k < N; ++k) {
      const double xk = fib[k];
      if (xk == 0.0) continue;  // kink: gradient extended by 0
      const double hk = std::min(std::abs(h), std::abs(xk) / 2.0);
      fib[k] = xk + hk;
      const double up = X.value(fib);
      fib[k] = xk - hk;
      const double dn = X.value(fib);
      fib[k] = xk;
      G[o * N + k] = amp * (up - dn) / (2.0 * hk);
    }
  }
  TensorField g = f.with_values(std::move(G));
  if (projector) g = projector(g);
  // Pairing: expectation over the leading axes, plain sum over the fiber.
  Kahan rhs;
  for (std::size_t o = 0; o < outer; ++o) {
    const double mu = f.weight(o * N) / X.entry_weights()[0];
    double s = 0.0;
    for (std::size_t k = 0; k < N; ++k) s += f[o * N + k] * g[o * N + k];
    rhs.add(mu * s);
  }
  return std::abs(lhs.sum - rhs.sum) / lhs.sum;
}

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

Space search_space(std::size_t atoms) { return uniform_space(atoms); }

}  // namespace

SearchProblem make_search_problem(const std::string& check, const SearchParams& sp) {
  SearchProblem pr;
  pr.check = check;
  const Space base = search_space(sp.atoms);
  const std::size_t a = sp.atoms;
  auto unit_clamp = [](std::vector<double>& v) {
    for (double& x : v) x = clamp01(x);
  };

  if (check == "weighted_lower_bound") {
    const std::size_t nf = sp.I * a * sp.J;
    std::size_t aI = 1;
    for (std::size_t i = 0; i < sp.I; ++i) aI *= a;
    const std::size_t nw = sp.I * sp.J * aI;
    pr.sample = [=](CounterRng& rng) {
      std::vector<double> v(nf + nw);
      for (std::size_t k = 0; k < nf; ++k) v[k] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
      for (std::size_t k = nf; k < v.size(); ++k) v[k] = rng.uniform();
      return v;
    };
    pr.clamp = unit_clamp;
    pr.evaluate = [=](const std::vector<double>& v) {
      WeightedInstance inst;
      inst.base = base;
      inst.I = sp.I;
      inst.J = sp.J;
      inst.f = TensorField({disjoint_union_copies(base, sp.I), counting_space(sp.J)},
                           std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nf)));
      const std::vector<Space> waxes(sp.I, base);
      for (std::size_t k = 0; k < sp.I * sp.J; ++k) {
        std::vector<double> w(v.begin() + static_cast<std::ptrdiff_t>(nf + k * aI),
                              v.begin() + static_cast<std::ptrdiff_t>(nf + (k + 1) * aI));
        if (sp.binary)
          for (double& x : w) x = x >= 0.5 ? 1.0 : 0.0;
        inst.w.emplace_back(waxes, std::move(w));
      }
      return check_weighted_lower_bound(inst, sp.p, sp.kappa, sp.eps, sp.solver);
    };
    pr.adverse = [](const CheckReport& r) {
      const double dual = r.params.value("dual", 0.0);
      if (dual <= 0.0) return 0.0;
      return r.constant * dual / std::max(r.lhs, 1e-300);
    };
    return pr;
  }
  if (check == "decoupling") {
    std::vector<std::vector<std::size_t>> tuples;
    std::vector<std::size_t> t(sp.m);
    auto rec = [&](auto&& self, std::size_t pos, std::size_t start) -> void {
      if (pos == sp.m) {
        tuples.push_back(t);
        return;
      }
      for (std::size_t i = start; i < sp.n; ++i) {
        t[pos] = i;
        self(self, pos + 1, i + 1);
      }
    };
    rec(rec, 0, 0);
    std::size_t am = 1;
    for (std::size_t c = 0; c < sp.m; ++c) am *= a;
    pr.sample = [=](CounterRng& rng) {
      std::vector<double> v(tuples.size() * am);
      for (double& x : v) x = rng.uniform();
      return v;
    };
    pr.clamp = unit_clamp;
    pr.evaluate = [=](const std::vector<double>& v) {
      std::vector<Kernel> ks;
      const std::vector<Space> axes(sp.m, base);
      for (std::size_t k = 0; k < tuples.size(); ++k)
        ks.push_back({tuples[k], TensorField(axes, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(k * am),
                                                                     v.begin() + static_cast<std::ptrdiff_t>((k + 1) * am)))});
      return check_decoupling(KernelFamily(sp.m, sp.n, base, std::nullopt, std::move(ks)), sp.q);
    };
    pr.adverse = [](const CheckReport& r) {
      return std::isfinite(r.ratio) && r.ratio > 0.0 ? std::abs(std::log(r.ratio)) : 0.0;
    };
    return pr;
  }
  if (check == "rosenthal") {
    pr.sample = [=](CounterRng& rng) {
      std::vector<double> v(sp.n * a);
      for (double& x : v) x = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
      return v;
    };
    pr.clamp = unit_clamp;
    pr.evaluate = [=](const std::vector<double>& v) {
      std::vector<TensorField> fs;
      for (std::size_t i = 0; i < sp.n; ++i)
        fs.emplace_back(std::vector<Space>{base}, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(i * a),
                                                                      v.begin() + static_cast<std::ptrdiff_t>((i + 1) * a)));
      return check_rosenthal(fs, sp.p);
    };
    pr.adverse = [](const CheckReport& r) { return std::isfinite(r.ratio) ? r.ratio : 0.0; };
    return pr;
  }
  if (check == "mz") {
    pr.sample = [=](CounterRng& rng) {
      std::vector<double> v(sp.n * a);
      for (double& x : v) x = rng.uniform(-1.0, 1.0);
      return v;
    };
    pr.clamp = [](std::vector<double>& v) {
      for (double& x : v) x = std::min(1.0, std::max(-1.0, x));
    };
    pr.evaluate = [=](const std::vector<double>& v) {
      std::vector<TensorField> fs;
      for (std::size_t i = 0; i < sp.n; ++i) {
        TensorField f(std::vector<Space>{base}, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(i * a),
                                                                    v.begin() + static_cast<std::ptrdiff_t>((i + 1) * a)));
        fs.push_back(f - average_along(f, 0));
      }
      return check_mz(fs, sp.p);
    };
    pr.adverse = [](const CheckReport& r) {
      return std::isfinite(r.ratio) && r.ratio > 0.0 ? std::abs(std::log(r.ratio)) : 0.0;
    };
    return pr;
  }
  raise(ErrorKind::BadCheck, "unknown check '" + check + "'");
}

CheckReport extremal_search(const SearchProblem& pr, std::size_t budget, std::uint64_t seed) {
  if (budget == 0) raise(ErrorKind::BadConfig, "search budget must be at least 1");
  CounterRng rng(seed, 0x5EA4C4ULL);
  std::size_t used = 0;
  std::optional<CheckReport> worst;
  std::vector<double> worst_x;
  double worst_score = -kInf;

  auto consider = [&](const std::vector<double>& x, CheckReport r) {
    ++used;
    const double score = pr.adverse(r);
    if (!worst || score > worst_score) {
      worst_score = score;
      worst = std::move(r);
      worst_x = x;
    }
    return score;
  };

  const std::size_t per_restart = std::max<std::size_t>(1, std::min<std::size_t>(budget, 50));
  while (used < budget) {
    std::vector<double> x = pr.sample(rng);
    pr.clamp(x);
    double score = consider(x, pr.evaluate(x));
    double step = 0.25;
    for (std::size_t s = 1; s < per_restart && used < budget; ++s) {
      std::vector<double> y = x;
      const std::size_t k = rng.below(y.size());
      y[k] += step * rng.normal();
      pr.clamp(y);
      const double sy = consider(y, pr.evaluate(y));
      if (sy > score) {
        x = std::move(y);
        score = sy;
        step = std::min(0.5, step * 1.5);
      } else {
        step = std::max(1e-3, step * 0.7);
      }
    }
  }
  CheckReport r = std::move(*worst);
  r.seed = seed;
  r.params["search"] = {{"budget", budget}, {"adverse", worst_score}};
  r.params["instance"] = worst_x;
  return r;
}

CheckReport extremal_search(const std::string& check, const SearchParams& params, std::size_t budget,
                            std::uint64_t seed) {
  return extremal_search(make_search_problem(check, params), budget, seed);
}

}  // namespace ustat
