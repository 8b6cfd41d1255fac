#include "ustat/decomp.hpp"

#include <algorithm>
#include <cmath>

#include "ustat/error.hpp"

namespace ustat {

namespace {

constexpr double kSlack = 1e-12;

std::size_t ipow(std::size_t base, std::size_t e, std::size_t guard) {
  std::size_t out = 1;
  for (std::size_t k = 0; k < e; ++k) {
    if (base != 0 && out > guard / base) raise(ErrorKind::TooLarge, "enumeration exceeds the element guard");
    out *= base;
  }
  return out;
}

void check_p(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) raise(ErrorKind::BadSpec, "decompositions need 1 <= p < inf");
}

struct Ctx {
  Space bar;           // Omegabar
  Space base;          // Omega
  std::size_t n = 0;   // copies
  std::size_t a = 0;   // atoms of Omega
  std::size_t nb = 0;  // n * a
  double p = 1.0;
  std::size_t guard = kDefaultElementGuard;
};

// 1 where the entry belongs to the L^1 side of the level cut at the LHS.
std::vector<std::uint8_t> js_l1_side(const Ctx& ctx, const std::vector<double>& absf) {
  const TensorField fld({ctx.bar}, absf);
  const double lambda = family_lhs(fld, ctx.p, ctx.guard);
  std::vector<std::uint8_t> out(absf.size(), 0);
  if (lambda > 0.0)
    for (std::size_t e = 0; e < absf.size(); ++e) out[e] = absf[e] >= lambda ? 1 : 0;
  return out;
}

// Odometer over y in Omega^n with weight prod mu(y_l).
template <class Fn>
void for_each_y(const Ctx& ctx, Fn&& fn) {
  const std::size_t count = ipow(ctx.a, ctx.n, ctx.guard);
  std::vector<std::size_t> y(ctx.n, 0);
  for (std::size_t c = 0; c < count; ++c) {
    double mu = 1.0;
    for (std::size_t l = 0; l < ctx.n; ++l) mu *= ctx.base.weight(y[l]);
    fn(std::as_const(y), mu);
    for (std::size_t l = ctx.n; l-- > 0;) {
      if (++y[l] < ctx.a) break;
      y[l] = 0;
    }
  }
}

double powp(double v, double p) { return p == 1.0 ? v : std::pow(v, p); }
double rootp(double v, double p) { return p == 1.0 ? v : std::pow(v, 1.0 / p); }

// Labels J (bitmask over axes 0..m-1) of the 2^m-summand decomposition of
// |f| on Omegabar^m.
std::vector<std::uint32_t> multilevel_labels(const Ctx& ctx, const std::vector<double>& absf, std::size_t m) {
  if (m == 1) {
    const auto l1 = js_l1_side(ctx, absf);
    std::vector<std::uint32_t> out(absf.size());
    for (std::size_t e = 0; e < absf.size(); ++e) out[e] = l1[e] ? 0U : 1U;
    return out;
  }
  const std::size_t nb = ctx.nb;
  const std::size_t mold = absf.size() / nb;
  const std::size_t nJ = std::size_t{1} << (m - 1);
  const std::uint32_t newbit = std::uint32_t{1} << (m - 1);
  const double p = ctx.p;

  // acc[J][e_old][k a + u] = E_k 1{label_y(e_old) = J} at y_k = u.
  std::vector<double> acc(nJ * mold * nb, 0.0);
  std::vector<double> fy(mold);
  for_each_y(ctx, [&](const std::vector<std::size_t>& y, double mu) {
    for (std::size_t eo = 0; eo < mold; ++eo) {
      double s = 0.0;
      for (std::size_t k = 0; k < ctx.n; ++k) s += powp(absf[eo * nb + k * ctx.a + y[k]], p);
      fy[eo] = rootp(s, p);
    }
    const auto labels = multilevel_labels(ctx, fy, m - 1);
    for (std::size_t eo = 0; eo < mold; ++eo)
      for (std::size_t k = 0; k < ctx.n; ++k)
        acc[(labels[eo] * mold + eo) * nb + k * ctx.a + y[k]] += mu / ctx.base.weight(y[k]);
  });
  const double threshold = 1.0 / static_cast<double>(nJ) - kSlack;

  std::vector<std::uint32_t> cand(absf.size(), 0);
  std::vector<std::size_t> shape(m - 1, nb);
  std::vector<double> phi(nb);
  for (std::uint32_t J = 0; J < nJ; ++J) {
    const CoordSet js(J);
    std::vector<std::size_t> in_axes, out_axes;
    for (std::size_t ax = 0; ax + 1 < m; ++ax) (js.contains(ax) ? in_axes : out_axes).push_back(ax);
    const std::size_t n_in = ipow(nb, in_axes.size(), ctx.guard);
    const std::size_t n_out = ipow(nb, out_axes.size(), ctx.guard);
    std::vector<std::size_t> idx(m - 1, 0);
    auto old_flat = [&](std::size_t o, std::size_t i, double* weight) {
      std::size_t r = o;
      for (std::size_t q = out_axes.size(); q-- > 0;) {
        idx[out_axes[q]] = r % nb;
        r /= nb;
      }
      r = i;
      double w = 1.0;
      for (std::size_t q = in_axes.size(); q-- > 0;) {
        idx[in_axes[q]] = r % nb;
        w *= ctx.bar.weight(r % nb);
        r /= nb;
      }
      if (weight) *weight = w;
      std::size_t flat = 0;
      for (std::size_t ax = 0; ax + 1 < m; ++ax) flat = flat * nb + idx[ax];
      return flat;
    };
    for (std::size_t o = 0; o < n_out; ++o) {
      std::fill(phi.begin(), phi.end(), 0.0);
      for (std::size_t i = 0; i < n_in; ++i) {
        double w = 1.0;
        const std::size_t eo = old_flat(o, i, &w);
        for (std::size_t ku = 0; ku < nb; ++ku) {
          if (acc[(J * mold + eo) * nb + ku] < threshold) continue;
          phi[ku] += w * powp(absf[eo * nb + ku], p);
        }
      }
      for (double& v : phi) v = rootp(v, p);
      const auto l1 = js_l1_side(ctx, phi);
      for (std::size_t i = 0; i < n_in; ++i) {
        const std::size_t eo = old_flat(o, i, nullptr);
        for (std::size_t ku = 0; ku < nb; ++ku) {
          if (acc[(J * mold + eo) * nb + ku] < threshold) continue;
          const std::uint32_t label = l1[ku] ? J : (J | newbit);
          cand[eo * nb + ku] |= std::uint32_t{1} << label;
        }
      }
    }
  }
  std::vector<std::uint32_t> out(absf.size(), 0);
  for (std::size_t e = 0; e < absf.size(); ++e) {
    if (cand[e] == 0) {
      // Rounding left no threshold met; use the largest average.
      const std::size_t eo = e / nb, ku = e % nb;
      std::uint32_t bestJ = 0;
      for (std::uint32_t J = 1; J < nJ; ++J)
        if (acc[(J * mold + eo) * nb + ku] > acc[(bestJ * mold + eo) * nb + ku]) bestJ = J;
      out[e] = bestJ | newbit;
      continue;
    }
    out[e] = static_cast<std::uint32_t>(std::countr_zero(cand[e]));
  }
  return out;
}

Ctx make_ctx(const TensorField& fbar, double p, std::size_t guard) {
  const FamilyLayout layout = family_layout(fbar);
  Ctx ctx;
  ctx.bar = fbar.axis(0);
  ctx.base = layout.base;
  ctx.n = layout.n;
  ctx.a = layout.base.size();
  ctx.nb = ctx.n * ctx.a;
  ctx.p = p;
  ctx.guard = guard;
  return ctx;
}

std::vector<double> abs_values(const TensorField& f) {
  std::vector<double> out(f.size());
  for (std::size_t e = 0; e < f.size(); ++e) out[e] = std::abs(f[e]);
  return out;
}

DecompositionPart make_part(const TensorField& f, const std::vector<std::uint32_t>& labels, std::uint32_t label,
                            std::string name, CoordSet lp_axes, double p, std::string stage) {
  std::vector<double> v(f.size(), 0.0);
  for (std::size_t e = 0; e < f.size(); ++e)
    if (labels[e] == label) v[e] = f[e];
  DecompositionPart part;
  part.name = std::move(name);
  part.lp_axes = lp_axes;
  part.field = f.with_values(std::move(v));
  part.certificate = mixed_certificate(part.field, lp_axes, p);
  part.stage = std::move(stage);
  return part;
}

}  // namespace

WeightFamily WeightFamily::make(std::vector<TensorField> weights) {
  WeightFamily out;
  out.binary = true;
  for (const TensorField& w : weights)
    for (double v : w.values()) {
      if (!(v >= 0.0 && v <= 1.0)) raise(ErrorKind::BadInstance, "weight outside [0,1]");
      if (v != 0.0 && v != 1.0) out.binary = false;
    }
  out.weights = std::move(weights);
  return out;
}

TensorField threshold_weights(const TensorField& w, double kappa, double eps,
                              const std::vector<std::size_t>& retained) {
  if (!(eps >= 0.0) || !(kappa > eps) || !(kappa <= 1.0))
    raise(ErrorKind::BadThreshold, "need 0 <= eps < kappa <= 1");
  for (double v : w.values())
    if (!(v >= 0.0 && v <= 1.0)) raise(ErrorKind::BadInstance, "weight outside [0,1]");
  std::vector<bool> keep(w.rank(), false);
  for (std::size_t a : retained) {
    if (a >= w.rank()) raise(ErrorKind::BadAxis, "retained axis out of range");
    keep[a] = true;
  }
  TensorField avg = map(w, [eps](double v) { return std::max(v, eps); });
  for (std::size_t a = 0; a < w.rank(); ++a)
    if (!keep[a]) avg = average_along(avg, a);
  return map(avg, [kappa](double v) { return v >= kappa - kSlack ? 1.0 : 0.0; });
}

WeightFamily threshold_weights(const WeightFamily& w, double kappa, double eps,
                               const std::vector<std::size_t>& retained) {
  WeightFamily out;
  out.binary = true;
  for (const TensorField& f : w.weights) out.weights.push_back(threshold_weights(f, kappa, eps, retained));
  return out;
}

std::pair<TensorField, TensorField> level_cut(const TensorField& f, double lambda) {
  if (!(lambda > 0.0)) raise(ErrorKind::BadLevel, "level must be positive");
  std::vector<double> g(f.size(), 0.0), h(f.size(), 0.0);
  for (std::size_t e = 0; e < f.size(); ++e) {
    if (f[e] < 0.0) raise(ErrorKind::NotNonnegative, "level cut needs f >= 0");
    (f[e] >= lambda ? g : h)[e] = f[e];
  }
  return {f.with_values(std::move(g)), f.with_values(std::move(h))};
}

std::pair<TensorField, TensorField> disjointize(const TensorField& f, const TensorField& g, const TensorField& h) {
  if (!f.same_axes(g) || !f.same_axes(h)) raise(ErrorKind::NotADecomposition, "parts on different axes");
  const double tol = 1e-12 * std::max(1.0, max_abs(f));
  std::vector<double> gt(f.size(), 0.0), ht(f.size(), 0.0);
  for (std::size_t e = 0; e < f.size(); ++e) {
    if (std::abs(g[e] + h[e] - f[e]) > tol) raise(ErrorKind::NotADecomposition, "g + h differs from f");
    (g[e] >= h[e] ? gt : ht)[e] = f[e];
  }
  return {f.with_values(std::move(gt)), f.with_values(std::move(ht))};
}

double Decomposition::certificate_sum() const {
  double s = 0.0;
  for (const auto& part : parts) s += part.certificate;
  return s;
}

TensorField Decomposition::reconstruct() const {
  TensorField out = target.with_values(std::vector<double>(target.size(), 0.0));
  for (const auto& part : parts) out = out + part.field;
  return out;
}

double Decomposition::reconstruction_error() const { return max_abs_diff(reconstruct(), target); }

bool Decomposition::supports_disjoint() const {
  for (std::size_t e = 0; e < target.size(); ++e) {
    int nonzero = 0;
    for (const auto& part : parts) nonzero += part.field[e] != 0.0;
    if (nonzero > 1) return false;
  }
  return true;
}

const DecompositionPart& Decomposition::part(const std::string& name) const {
  for (const auto& p : parts)
    if (p.name == name) return p;
  raise(ErrorKind::BadSpec, "no part named " + name);
}

double mixed_certificate(const TensorField& part, CoordSet lp_axes, double p) {
  std::vector<std::size_t> in, out;
  for (std::size_t ax = 0; ax < part.rank(); ++ax) (lp_axes.contains(ax) ? in : out).push_back(ax);
  return norm(part, NormSpec::mixed(p, in, 1.0, out));
}

double level_cut_constant(double p) {
  check_p(p);
  return p * std::pow(2.0, 1.0 - 1.0 / p) + std::pow(4.0, p - 1.0);
}

double level_cut_functional(const Decomposition& d) {
  if (d.lhs <= 0.0) return 0.0;
  const TensorField& g = d.part("g").field;
  const TensorField& h = d.part("h").field;
  double s = 0.0;
  for (std::size_t e = 0; e < g.size(); ++e) {
    const double w = g.weight(e);
    s += w * std::abs(g[e]) / d.lhs + w * std::pow(std::abs(h[e]) / d.lhs, d.p);
  }
  return s;
}

TensorField family_of(const std::vector<TensorField>& fields) {
  if (fields.empty()) raise(ErrorKind::BadInstance, "empty family");
  const Space base = fields[0].axis(0);
  std::vector<double> values;
  for (const TensorField& f : fields) {
    if (f.rank() != 1 || !(f.axis(0) == base)) raise(ErrorKind::BadAxis, "family members must share one axis");
    values.insert(values.end(), f.values().begin(), f.values().end());
  }
  return TensorField({disjoint_union_copies(base, fields.size())}, std::move(values));
}

Decomposition js_decompose(const TensorField& fbar, double p) {
  check_p(p);
  if (fbar.rank() != 1) raise(ErrorKind::BadAxis, "js_decompose takes a field on one disjoint-union axis");
  family_layout(fbar);
  Decomposition d;
  d.pipeline = "js";
  d.p = p;
  d.target = fbar;
  d.lhs = family_lhs(fbar, p);
  const TensorField absf = map(fbar, [](double v) { return std::abs(v); });
  TensorField g = absf.with_values(std::vector<double>(fbar.size(), 0.0));
  TensorField h = absf;
  if (d.lhs > 0.0) std::tie(g, h) = level_cut(absf, d.lhs);
  std::tie(g, h) = disjointize(absf, g, h);
  std::vector<std::uint32_t> labels(fbar.size());
  for (std::size_t e = 0; e < fbar.size(); ++e) labels[e] = g[e] != 0.0 ? 0U : 1U;
  d.parts.push_back(make_part(fbar, labels, 0, "g", CoordSet(0), p, "level-cut"));
  d.parts.push_back(make_part(fbar, labels, 1, "h", CoordSet(1), p, "level-cut"));
  return d;
}

Decomposition four_summand(const TensorField& fbar, double p, std::size_t guard) {
  check_p(p);
  if (fbar.rank() != 2) raise(ErrorKind::BadAxis, "four_summand takes a field on two disjoint-union axes");
  const Ctx ctx = make_ctx(fbar, p, guard);
  const std::size_t nb = ctx.nb;
  const std::size_t a = ctx.a;
  ipow(ipow(ctx.a, ctx.n, guard), 2, guard);
  const std::vector<double> absf = abs_values(fbar);

  // (1) binary w_i(xi, y) from the level cut over i at each y; accumulate E_j w.
  std::vector<double> ejw(nb * nb, 0.0);
  std::vector<double> F(nb);
  for_each_y(ctx, [&](const std::vector<std::size_t>& y, double mu) {
    for (std::size_t r = 0; r < nb; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < ctx.n; ++j) s += powp(absf[r * nb + j * a + y[j]], p);
      F[r] = rootp(s, p);
    }
    const auto w = js_l1_side(ctx, F);
    for (std::size_t r = 0; r < nb; ++r) {
      if (!w[r]) continue;
      for (std::size_t j = 0; j < ctx.n; ++j) ejw[r * nb + j * a + y[j]] += mu / ctx.base.weight(y[j]);
    }
  });
  // (2) W = 1{E_j w >= 1/2}.
  std::vector<std::uint8_t> W(nb * nb);
  for (std::size_t e = 0; e < W.size(); ++e) W[e] = ejw[e] >= 0.5 - kSlack ? 1 : 0;

  std::vector<std::uint32_t> labels(nb * nb, 0);
  constexpr std::uint32_t kA = 0, kB = 3, kC = 2, kD = 1;  // labels are the J bitmasks
  // (3) per row (i, xi): level cut over j of W f.
  std::vector<double> row(nb);
  for (std::size_t r = 0; r < nb; ++r) {
    for (std::size_t c = 0; c < nb; ++c) row[c] = W[r * nb + c] ? absf[r * nb + c] : 0.0;
    const auto u = js_l1_side(ctx, row);
    for (std::size_t c = 0; c < nb; ++c)
      if (W[r * nb + c]) labels[r * nb + c] = u[c] ? kA : kC;
  }
  // (4) reduced family over j of (1 - W) f, L^p over (i, xi).
  std::vector<double> psi(nb, 0.0);
  for (std::size_t r = 0; r < nb; ++r)
    for (std::size_t c = 0; c < nb; ++c)
      if (!W[r * nb + c]) psi[c] += ctx.bar.weight(r) * powp(absf[r * nb + c], p);
  for (double& v : psi) v = rootp(v, p);
  const auto s = js_l1_side(ctx, psi);
  for (std::size_t r = 0; r < nb; ++r)
    for (std::size_t c = 0; c < nb; ++c)
      if (!W[r * nb + c]) labels[r * nb + c] = s[c] ? kD : kB;

  Decomposition d;
  d.pipeline = "four-summand";
  d.p = p;
  d.target = fbar;
  d.lhs = family_lhs(fbar, p, guard);
  d.parts.push_back(make_part(fbar, labels, kA, "a", CoordSet(kA), p, "row-cut"));
  d.parts.push_back(make_part(fbar, labels, kB, "b", CoordSet(kB), p, "column-cut"));
  d.parts.push_back(make_part(fbar, labels, kC, "c", CoordSet(kC), p, "row-cut"));
  d.parts.push_back(make_part(fbar, labels, kD, "d", CoordSet(kD), p, "column-cut"));
  return d;
}

Decomposition multilevel_decompose(const TensorField& fbar, double p, std::size_t max_arity, std::size_t guard) {
  check_p(p);
  const std::size_t m = fbar.rank();
  if (m == 0) raise(ErrorKind::BadAxis, "multilevel_decompose needs at least one axis");
  if (m > max_arity) raise(ErrorKind::TooLarge, "arity " + std::to_string(m) + " exceeds the recursion cap");
  const Ctx ctx = make_ctx(fbar, p, guard);
  const auto labels = multilevel_labels(ctx, abs_values(fbar), m);
  Decomposition d;
  d.pipeline = "multilevel";
  d.p = p;
  d.target = fbar;
  d.lhs = family_lhs(fbar, p, guard);
  for (std::uint32_t J = 0; J < (std::uint32_t{1} << m); ++J)
    d.parts.push_back(make_part(fbar, labels, J, coordset_name(CoordSet(J)), CoordSet(J), p, "multilevel"));
  return d;
}

TensorField center_blocks(const TensorField& f, std::size_t axis) {
  const Space& sp = f.axis(axis);
  std::vector<std::size_t> starts(sp.block_offsets().begin(), sp.block_offsets().end());
  if (starts.empty()) starts.push_back(0);
  starts.push_back(sp.size());
  return transform_fibers(f, axis, [&](std::span<const double> in, std::span<double> out) {
    for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
      double mean = 0.0, mass = 0.0;
      for (std::size_t x = starts[b]; x < starts[b + 1]; ++x) {
        mean += sp.weight(x) * in[x];
        mass += sp.weight(x);
      }
      mean /= mass;
      for (std::size_t x = starts[b]; x < starts[b + 1]; ++x) out[x] = in[x] - mean;
    }
  });
}

Decomposition mean_zero_postprocess(const Decomposition& d) {
  const double tol = 1e-10 * std::max(1.0, max_abs(d.target));
  for (std::size_t ax = 0; ax < d.target.rank(); ++ax)
    if (max_abs_diff(center_blocks(d.target, ax), d.target) > tol)
      raise(ErrorKind::NotCanonical, "target is not mean zero along axis " + std::to_string(ax));
  Decomposition out = d;
  out.pipeline = d.pipeline + "+mean-zero";
  out.disjoint = false;
  for (auto& part : out.parts) {
    for (std::size_t ax = 0; ax < part.field.rank(); ++ax) part.field = center_blocks(part.field, ax);
    part.certificate = mixed_certificate(part.field, part.lp_axes, d.p);
    part.stage += "+mean-zero";
  }
  return out;
}

double decomposition_cap(std::size_t m) {
  switch (m) {
    case 1: return 64.0;
    case 2: return 1024.0;
    case 3: return 1048576.0;
    default: raise(ErrorKind::BadLevel, "no cap for arity " + std::to_string(m));
  }
}

std::string coordset_name(CoordSet s) {
  std::string out = "{";
  bool first = true;
  for (std::size_t j : s.elements()) {
    out += (first ? "" : ",") + std::to_string(j);
    first = false;
  }
  return out + "}";
}

}  // namespace ustat
