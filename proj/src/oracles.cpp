#include "ustat/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "ustat/error.hpp"

namespace ustat::oracle {

namespace {

std::vector<std::size_t> shape_of(const std::vector<Space>& axes) {
  std::vector<std::size_t> s;
  for (const Space& a : axes) s.push_back(a.size());
  return s;
}

// Calls fn(index) for every multi-index, last axis fastest.
void enumerate(const std::vector<std::size_t>& shape, const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t s : shape)
    if (s == 0) return;
  for (;;) {
    fn(idx);
    std::size_t k = shape.size();
    for (;;) {
      if (k == 0) return;
      --k;
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
}

std::size_t flat(const std::vector<std::size_t>& shape, const std::vector<std::size_t>& idx) {
  std::size_t f = 0;
  for (std::size_t k = 0; k < shape.size(); ++k) f = f * shape[k] + idx[k];
  return f;
}

std::size_t checked_pow(std::size_t base, std::size_t e, std::size_t limit) {
  std::size_t r = 1;
  for (std::size_t k = 0; k < e; ++k) {
    if (base != 0 && r > limit / base) raise(ErrorKind::TooLarge, "oracle enumeration too large");
    r *= base;
  }
  return r;
}

// Nested evaluation on a raw value vector over `axes`.
double nested_raw(const std::vector<Space>& axes, const std::vector<double>& values, const NormSpec& spec) {
  std::vector<Space> cur_axes = axes;
  std::vector<double> cur(values.size());
  for (std::size_t e = 0; e < values.size(); ++e) cur[e] = std::abs(values[e]);
  std::vector<std::size_t> cur_shape = shape_of(axes);

  for (const NormLevel& lvl : spec.levels()) {
    std::vector<bool> reduce(cur_shape.size(), false);
    for (std::size_t a : lvl.axes) reduce.at(a) = true;
    std::vector<std::size_t> out_shape;
    for (std::size_t k = 0; k < cur_shape.size(); ++k) out_shape.push_back(reduce[k] ? 1 : cur_shape[k]);
    std::size_t out_size = 1;
    for (std::size_t s : out_shape) out_size *= s;
    std::vector<double> out(out_size, 0.0);
    const bool inf = std::isinf(lvl.p);
    enumerate(cur_shape, [&](const std::vector<std::size_t>& idx) {
      std::vector<std::size_t> oidx = idx;
      double w = 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k)
        if (reduce[k]) {
          oidx[k] = 0;
          w *= cur_axes[k].weight(idx[k]);
        }
      const double v = cur[flat(cur_shape, idx)];
      double& o = out[flat(out_shape, oidx)];
      if (inf) o = std::max(o, v);
      else o += w * std::pow(v, lvl.p);
    });
    if (!inf)
      for (double& o : out) o = std::pow(o, 1.0 / lvl.p);
    // Reduced axes stay as size-1 placeholders of weight 1.
    for (std::size_t k = 0; k < cur_shape.size(); ++k)
      if (reduce[k]) cur_axes[k] = counting_space(1);
    cur_shape = out_shape;
    cur = std::move(out);
  }
  return cur.empty() ? 0.0 : cur[0];
}

double inner_weighted(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += w[k] * a[k] * b[k];
  return s;
}

std::vector<double> entry_weights(const TensorField& f) {
  std::vector<double> w(f.size());
  for (std::size_t e = 0; e < f.size(); ++e) w[e] = f.weight(e);
  return w;
}

// Minimizes fn over the box [lo, hi]^d by repeated grid refinement. When the
// best point sits on an outer face of the initial box and `grow` is set, the
// box is doubled and the search restarted.
double zoom_minimize(std::size_t d, double radius, std::size_t first_points, std::size_t zoom_points,
                     std::size_t levels, const std::function<double(const std::vector<double>&)>& fn, bool grow) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::vector<double> lo(d, -radius), hi(d, radius);
    std::vector<double> best(d, 0.0);
    double best_val = std::numeric_limits<double>::infinity();
    bool on_face = false;
    for (std::size_t level = 0; level <= levels; ++level) {
      const std::size_t pts = level == 0 ? first_points : zoom_points;
      std::vector<std::size_t> shape(d, pts);
      std::vector<double> x(d);
      std::vector<std::size_t> arg(d, 0);
      double lvl_best = std::numeric_limits<double>::infinity();
      enumerate(shape, [&](const std::vector<std::size_t>& idx) {
        for (std::size_t k = 0; k < d; ++k)
          x[k] = lo[k] + (hi[k] - lo[k]) * static_cast<double>(idx[k]) / static_cast<double>(pts - 1);
        const double v = fn(x);
        if (v < lvl_best) {
          lvl_best = v;
          arg = idx;
        }
      });
      std::vector<double> cell(d);
      for (std::size_t k = 0; k < d; ++k) {
        cell[k] = (hi[k] - lo[k]) / static_cast<double>(pts - 1);
        x[k] = lo[k] + cell[k] * static_cast<double>(arg[k]);
      }
      if (lvl_best < best_val) {
        best_val = lvl_best;
        best = x;
      }
      if (level == 0)
        for (std::size_t k = 0; k < d; ++k)
          if (arg[k] == 0 || arg[k] == pts - 1) on_face = true;
      for (std::size_t k = 0; k < d; ++k) {
        lo[k] = best[k] - 3.0 * cell[k];
        hi[k] = best[k] + 3.0 * cell[k];
      }
    }
    if (!(grow && on_face)) return best_val;
    radius *= 2.0;
  }
  raise(ErrorKind::Undefined, "grid search did not localize the minimum");
}

}  // namespace

TensorField cond_expect_direct(const TensorField& f, CoordSet a) {
  const ProductLayout lay = product_layout(f);
  const std::vector<std::size_t> shape = f.shape();
  std::vector<double> out(f.size(), 0.0);
  enumerate(shape, [&](const std::vector<std::size_t>& x) {
    double s = 0.0;
    enumerate(shape, [&](const std::vector<std::size_t>& y) {
      double w = 1.0;
      for (std::size_t k = 0; k < shape.size(); ++k) {
        const bool integrated = k < lay.n && !a.contains(k);
        if (!integrated && y[k] != x[k]) return;
        if (integrated) w *= lay.base.weight(y[k]);
      }
      s += w * f[flat(shape, y)];
    });
    out[flat(shape, x)] = s;
  });
  return f.with_values(std::move(out));
}

TensorField project_inclusion_exclusion(const TensorField& f, CoordSet a) {
  std::vector<double> out(f.size(), 0.0);
  const std::uint32_t A = a.bits();
  for (std::uint32_t b = A;; b = (b - 1) & A) {
    const TensorField e = cond_expect_direct(f, CoordSet(b));
    const double sign = (std::popcount(A & ~b) % 2) ? -1.0 : 1.0;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += sign * e[k];
    if (b == 0) break;
  }
  return f.with_values(std::move(out));
}

double nested_norm(const TensorField& f, const NormSpec& spec) {
  spec.validate(f.rank());
  return nested_raw(f.axes(), std::vector<double>(f.values().begin(), f.values().end()), spec);
}

double ustat_moment_direct(const KernelFamily& k, double q, bool decoupled) {
  const std::size_t n = k.coordinates();
  const std::size_t m = k.arity();
  const Space& base = k.base();
  const std::size_t copies = decoupled ? m : 1;
  const std::vector<std::size_t> shape(n * copies, base.size());
  checked_pow(base.size(), n * copies, std::size_t{1} << 22);
  double total = 0.0;
  std::vector<std::size_t> args(m);
  enumerate(shape, [&](const std::vector<std::size_t>& x) {
    double mu = 1.0;
    for (std::size_t v : x) mu *= base.weight(v);
    double s = 0.0;
    for (const Kernel& ker : k.kernels()) {
      for (std::size_t c = 0; c < m; ++c) args[c] = x[(decoupled ? c * n : 0) + ker.index[c]];
      s += ker.field.at(args);
    }
    total += mu * std::pow(s, q);
  });
  return total;
}

double family_lhs_direct(const TensorField& fbar, double p) {
  const FamilyLayout lay = family_layout(fbar);
  const std::size_t n = lay.n, m = lay.m, a = lay.base.size();
  checked_pow(a, n * m, std::size_t{1} << 22);
  const std::vector<std::size_t> shape(n * m, a);
  const std::vector<std::size_t> ishape(m, n);
  double total = 0.0;
  std::vector<std::size_t> pos(m);
  enumerate(shape, [&](const std::vector<std::size_t>& x) {
    double mu = 1.0;
    for (std::size_t v : x) mu *= lay.base.weight(v);
    double s = 0.0;
    enumerate(ishape, [&](const std::vector<std::size_t>& i) {
      for (std::size_t c = 0; c < m; ++c) pos[c] = i[c] * a + x[c * n + i[c]];
      s += std::pow(std::abs(fbar.at(pos)), p);
    });
    total += mu * std::pow(s, 1.0 / p);
  });
  return total;
}

double kfun_grid(const TensorField& f, double t, const Couple& c, const GridOptions& opts) {
  const std::size_t d = f.size();
  if (d > opts.max_entries) raise(ErrorKind::TooLarge, "grid oracle is limited to a few entries");
  c.validate(f.rank());
  const double scale = max_abs(f);
  if (scale == 0.0) return 0.0;
  const std::vector<double> fv(f.values().begin(), f.values().end());
  std::vector<double> rest(d);
  auto objective = [&](const std::vector<double>& x) {
    for (std::size_t k = 0; k < d; ++k) rest[k] = fv[k] - x[k];
    return nested_raw(f.axes(), x, c.spec0) + t * nested_raw(f.axes(), rest, c.spec1);
  };
  const std::size_t first = d <= 2 ? opts.points : (d == 3 ? 51 : 25);
  const std::size_t zoom = d <= 2 ? 21 : 13;
  return zoom_minimize(d, scale, first, zoom, opts.levels * 3, objective, false);
}

double kfun_constrained_grid(const TensorField& f, double t, const Couple& c, const Projector& projector,
                             const GridOptions& opts) {
  c.validate(f.rank());
  const std::size_t N = f.size();
  const std::vector<double> w = entry_weights(f);
  std::vector<std::vector<double>> basis;
  for (std::size_t k = 0; k < N; ++k) {
    std::vector<double> e(N, 0.0);
    e[k] = 1.0;
    const TensorField pe = projector(f.with_values(e));
    std::vector<double> v(pe.values().begin(), pe.values().end());
    for (const auto& b : basis) {
      const double ip = inner_weighted(v, b, w);
      for (std::size_t j = 0; j < N; ++j) v[j] -= ip * b[j];
    }
    const double nv = std::sqrt(inner_weighted(v, v, w));
    if (nv > 1e-9) {
      for (double& x : v) x /= nv;
      basis.push_back(std::move(v));
    }
  }
  const std::size_t d = basis.size();
  if (d > opts.max_entries) raise(ErrorKind::TooLarge, "constrained grid oracle is limited to a few dimensions");
  const double scale = max_abs(f);
  if (scale == 0.0) return 0.0;
  const std::vector<double> fv(f.values().begin(), f.values().end());
  std::vector<double> x0(N), rest(N);
  auto objective = [&](const std::vector<double>& alpha) {
    std::fill(x0.begin(), x0.end(), 0.0);
    for (std::size_t b = 0; b < d; ++b)
      for (std::size_t j = 0; j < N; ++j) x0[j] += alpha[b] * basis[b][j];
    for (std::size_t j = 0; j < N; ++j) rest[j] = fv[j] - x0[j];
    return nested_raw(f.axes(), x0, c.spec0) + t * nested_raw(f.axes(), rest, c.spec1);
  };
  const double radius = 2.0 * std::sqrt(inner_weighted(fv, fv, w)) + scale;
  const std::size_t first = d <= 2 ? opts.points : (d == 3 ? 51 : 25);
  const std::size_t zoom = d <= 2 ? 21 : 13;
  return zoom_minimize(d, radius, first, zoom, opts.levels * 3, objective, true);
}

double kfun_truncation(const TensorField& f, double t, double p, std::size_t fiber_rank) {
  if (fiber_rank > f.rank()) raise(ErrorKind::BadAxis, "fiber rank exceeds the field rank");
  std::size_t fiber = 1;
  for (std::size_t k = f.rank() - fiber_rank; k < f.rank(); ++k) fiber *= f.axis(k).size();
  const std::size_t outer = f.size() / fiber;
  std::vector<double> phi(outer), mu(outer);
  for (std::size_t o = 0; o < outer; ++o) {
    double s = 0.0, fw = 1.0;
    for (std::size_t k = 0; k < fiber; ++k) {
      // Fiber weight = entry weight / outer weight; recover the outer weight from entry 0.
      const double ew = f.weight(o * fiber + k);
      s += ew * std::pow(std::abs(f[o * fiber + k]), p);
      if (k == 0) fw = ew;
    }
    double w0 = 1.0;
    for (std::size_t k = f.rank() - fiber_rank; k < f.rank(); ++k) w0 *= f.axis(k).weight(0);
    mu[o] = fw / w0;
    phi[o] = std::pow(s / mu[o], 1.0 / p);
  }
  auto K = [&](double lam) {
    double l1 = 0.0, lp = 0.0;
    for (std::size_t o = 0; o < outer; ++o) {
      l1 += mu[o] * std::max(phi[o] - lam, 0.0);
      lp += mu[o] * std::pow(std::min(phi[o], lam), p);
    }
    return l1 + t * std::pow(lp, 1.0 / p);
  };
  std::vector<double> br = phi;
  br.push_back(0.0);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  double best = K(0.0);
  for (double b : br) best = std::min(best, K(b));
  // K is convex between consecutive breakpoints: golden-section on each.
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    double lo = br[k], hi = br[k + 1];
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = K(x1), f2 = K(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = K(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = K(x2);
      }
    }
    best = std::min({best, f1, f2});
  }
  return best;
}

double bucket_optimum(const TensorField& fbar, double p) {
  const std::size_t m = fbar.rank();
  const std::size_t N = fbar.size();
  const std::size_t buckets = std::size_t{1} << m;
  const std::size_t total = checked_pow(buckets, N, std::size_t{1} << 22);
  std::vector<NormSpec> specs;
  for (std::uint32_t J = 0; J < buckets; ++J) {
    std::vector<std::size_t> in, out;
    for (std::size_t k = 0; k < m; ++k) (((J >> k) & 1U) ? in : out).push_back(k);
    specs.push_back(NormSpec::mixed(p, in, 1.0, out));
  }
  const std::vector<double> fv(fbar.values().begin(), fbar.values().end());
  std::vector<std::size_t> label(N, 0);
  std::vector<double> part(N);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t e = 0; e < N; ++e) {
      label[e] = c % buckets;
      c /= buckets;
    }
    double s = 0.0;
    for (std::uint32_t J = 0; J < buckets && s < best; ++J) {
      bool any = false;
      for (std::size_t e = 0; e < N; ++e) {
        part[e] = label[e] == J ? fv[e] : 0.0;
        any = any || part[e] != 0.0;
      }
      if (any) s += nested_raw(fbar.axes(), part, specs[J]);
    }
    best = std::min(best, s);
  }
  return best;
}

}  // namespace ustat::oracle
