#include "ustat/interp.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ustat/error.hpp"

namespace ustat {

void Couple::validate(std::size_t rank) const {
  spec0.validate(rank);
  spec1.validate(rank);
  if (!spec0.convex() || !spec1.convex()) raise(ErrorKind::BadSpec, "couple exponents must be >= 1");
}

namespace {

class Problem {
 public:
  Problem(const TensorField& f, double t, const Couple& c, const Projector& proj)
      : f_(f),
        t_(t),
        n0_(f.axes(), c.spec0),
        n1_(f.axes(), c.spec1),
        d0_(f.axes(), c.spec0.dual()),
        d1_(f.axes(), c.spec1.dual()),
        proj_(proj),
        w_(n0_.entry_weights().begin(), n0_.entry_weights().end()) {}

  std::size_t size() const { return f_.size(); }
  std::span<const double> f() const { return f_.values(); }
  bool constrained() const { return static_cast<bool>(proj_); }

  double exact(std::span<const double> x) const {
    std::vector<double> r = residual(x);
    return n0_.value(x) + t_ * n1_.value(r);
  }

  /// Smoothed objective; grad receives the projected dual-pairing gradient.
  double smoothed(std::span<const double> x, double eps, std::vector<double>& grad) const {
    std::vector<double> r = residual(x);
    std::vector<double> g0(size()), g1(size());
    const double v = n0_.smoothed(x, eps, g0) + t_ * n1_.smoothed(r, eps, g1);
    grad.resize(size());
    for (std::size_t k = 0; k < size(); ++k) grad[k] = g0[k] - t_ * g1[k];
    project(grad);
    return v;
  }

  void project(std::vector<double>& v) const {
    if (!proj_) return;
    TensorField out = proj_(f_.with_values(v));
    std::copy(out.values().begin(), out.values().end(), v.begin());
  }

  double wdot(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += w_[k] * a[k] * b[k];
    return s;
  }

  std::vector<double> residual(std::span<const double> x) const {
    std::vector<double> r(size());
    for (std::size_t k = 0; k < size(); ++k) r[k] = f_[k] - x[k];
    return r;
  }

  /// Best lower bound <f, l> / max(||l0||_0*, ||l1||_1* / t) over functionals
  /// built from the exact gradients at x and at the trivial decompositions.
  double dual_bound(std::span<const double> x) const {
    const std::size_t N = size();
    std::vector<double> r = residual(x);
    std::vector<double> eta0(N), eta1(N), ef0(N), ef1(N);
    n0_.smoothed(x, 0.0, eta0);
    n1_.smoothed(r, 0.0, eta1);
    n0_.smoothed(f(), 0.0, ef0);
    n1_.smoothed(f(), 0.0, ef1);
    for (std::size_t k = 0; k < N; ++k) {
      eta1[k] *= t_;
      ef1[k] *= t_;
    }
    double best = 0.0;
    auto consider = [&](const std::vector<double>& rep0, const std::vector<double>& rep1) {
      const double pair = wdot(f(), rep0);
      const double scale = std::max(d0_.value(rep0), d1_.value(rep1) / t_);
      if (scale > 0.0 && std::isfinite(scale)) best = std::max(best, pair / scale);
    };
    consider(ef0, ef0);
    consider(ef1, ef1);
    std::vector<double> diff(N);
    for (std::size_t k = 0; k < N; ++k) diff[k] = eta1[k] - eta0[k];
    project(diff);  // P(eta1 - eta0)
    std::vector<double> rep0(N), rep1(N);
    for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      for (std::size_t k = 0; k < N; ++k) {
        rep0[k] = eta0[k] + (1.0 - lambda) * diff[k];
        rep1[k] = eta1[k] - lambda * diff[k];
      }
      consider(rep0, rep1);
    }
    return best;
  }

 private:
  const TensorField& f_;
  double t_;
  CompiledNorm n0_, n1_, d0_, d1_;
  const Projector& proj_;
  std::vector<double> w_;
};

struct Stage {
  std::vector<double> x;
  double value;
};

// Accelerated gradient with backtracking and adaptive restart on the
// eps-smoothed objective. Tracks the best iterate by the exact objective.
std::size_t run_stage(const Problem& pr, double eps, const SolverOptions& opts, std::size_t budget,
                      std::vector<double>& x, std::vector<double>& best_x, double& best_exact, bool& stalled) {
  const std::size_t N = pr.size();
  std::vector<double> y = x, x_prev = x, g(N), xn(N), gn(N);
  double step = eps;
  double theta = 1.0;
  double fy = pr.smoothed(y, eps, g);
  double f_cur = fy;
  std::vector<double> history;
  std::size_t it = 0;
  stalled = false;
  while (it < budget) {
    ++it;
    const double gg = pr.wdot(g, g);
    if (gg == 0.0) {
      stalled = true;
      break;
    }
    double fn = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t k = 0; k < N; ++k) xn[k] = y[k] - step * g[k];
      fn = pr.smoothed(xn, eps, gn);
      if (fn <= fy - 0.5 * step * gg + 1e-15 * std::abs(fy)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    const double ex = pr.exact(xn);
    if (ex < best_exact) {
      best_exact = ex;
      best_x = xn;
    }
    if (fn >= f_cur) {
      if (theta == 1.0) {
        // No descent from a momentum-free point: the stage has converged.
        stalled = true;
        break;
      }
      // Restart the momentum from the last iterate.
      theta = 1.0;
      y = x;
      fy = pr.smoothed(y, eps, g);
      continue;
    }
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    const double beta = (theta - 1.0) / theta_next;
    x_prev = x;
    x = xn;
    f_cur = fn;
    for (std::size_t k = 0; k < N; ++k) y[k] = x[k] + beta * (x[k] - x_prev[k]);
    theta = theta_next;
    fy = beta == 0.0 ? fn : pr.smoothed(y, eps, g);
    if (beta == 0.0) g = gn;
    step *= 1.25;

    history.push_back(f_cur);
    if (history.size() > opts.patience) {
      const double old = history[history.size() - 1 - opts.patience];
      if (old - f_cur <= opts.tol * std::max(std::abs(f_cur), 1e-300)) {
        stalled = true;
        break;
      }
    }
  }
  return it;
}

double relative_gap(double value, double dual) {
  if (value <= 0.0) return 0.0;
  return std::max(0.0, value - dual) / value;
}

}  // namespace

KResult k_functional(const TensorField& f, double t, const Couple& c, const Projector& constraint,
                     const SolverOptions& opts, const TensorField* warm_start) {
  if (!(t > 0.0) || !std::isfinite(t)) raise(ErrorKind::BadSpec, "t must be positive and finite");
  c.validate(f.rank());
  const double scale = max_abs(f);
  if (constraint) {
    const TensorField pf = constraint(f);
    if (!pf.same_axes(f) || max_abs_diff(pf, f) > 1e-9 * std::max(1.0, scale))
      raise(ErrorKind::BadInstance, "f is not in the constraint subspace");
  }
  KResult res;
  res.part0 = f.with_values(std::vector<double>(f.size(), 0.0));
  res.part1 = f;
  if (scale == 0.0) return res;

  Problem pr(f, t, c, constraint);
  const std::size_t N = f.size();
  std::vector<std::vector<double>> starts;
  starts.emplace_back(N, 0.0);
  starts.emplace_back(f.values().begin(), f.values().end());
  starts.emplace_back(N);
  for (std::size_t k = 0; k < N; ++k) starts.back()[k] = 0.5 * f[k];
  if (warm_start && warm_start->same_axes(f)) {
    std::vector<double> w(warm_start->values().begin(), warm_start->values().end());
    pr.project(w);
    starts.push_back(std::move(w));
  }
  std::vector<double> best_x = starts[0];
  double best = pr.exact(best_x);
  for (const auto& s : starts) {
    const double v = pr.exact(s);
    if (v < best) {
      best = v;
      best_x = s;
    }
  }

  double dual = pr.dual_bound(best_x);
  std::size_t iters = 0;
  bool converged = relative_gap(best, dual) <= 1e-12;
  if (!converged) {
    std::vector<double> x = best_x;
    bool cap_hit = false;
    for (double eps_rel = opts.eps_start; eps_rel >= opts.eps_end * 0.999; eps_rel *= 0.1) {
      if (iters >= opts.max_iters) {
        cap_hit = true;
        break;
      }
      bool stalled = false;
      x = best_x;
      iters += run_stage(pr, eps_rel * scale, opts, opts.max_iters - iters, x, best_x, best, stalled);
      if (!stalled) cap_hit = true;
      dual = std::max(dual, pr.dual_bound(best_x));
      if (relative_gap(best, dual) <= 1e-12) break;
    }

    if (!pr.constrained()) {
      // Snap entries sitting next to a kink of the exact objective.
      for (std::size_t k = 0; k < N; ++k) {
        for (double target : {0.0, f[k]}) {
          if (best_x[k] == target || std::abs(best_x[k] - target) > 1e-4 * scale) continue;
          std::vector<double> trial = best_x;
          trial[k] = target;
          const double v = pr.exact(trial);
          if (v <= best) {
            best = v;
            best_x = std::move(trial);
          }
        }
      }
      dual = std::max(dual, pr.dual_bound(best_x));
    }
    converged = !cap_hit || relative_gap(best, dual) <= 1e-4;
  }

  res.part0 = f.with_values(best_x);
  res.part1 = f.with_values(pr.residual(best_x));
  res.value = best;
  res.dual = std::min(dual, best);
  res.iterations = iters;
  res.converged = converged;
  res.gap = converged ? best - res.dual : kInf;
  return res;
}

double sum_norm(const TensorField& f, const Couple& c, const SolverOptions& opts) {
  return k_functional(f, 1.0, c, {}, opts).value;
}

double intersection_norm(const TensorField& f, const Couple& c) {
  c.validate(f.rank());
  return std::max(norm(f, c.spec0), norm(f, c.spec1));
}

double theta_q_norm(const TensorField& f, const Couple& c, double theta, double q, const ThetaQOptions& opts) {
  if (!(theta > 0.0 && theta < 1.0)) raise(ErrorKind::BadSpec, "theta must lie in (0,1)");
  if (!(q >= 1.0) || !std::isfinite(q)) raise(ErrorKind::BadSpec, "q must lie in [1,inf)");
  if (opts.steps_per_octave <= 0 || opts.log2_t_max <= opts.log2_t_min)
    raise(ErrorKind::BadSpec, "bad t-grid");
  c.validate(f.rank());
  if (max_abs(f) == 0.0) return 0.0;

  const int points = (opts.log2_t_max - opts.log2_t_min) * opts.steps_per_octave + 1;
  const double h = std::log(2.0) / opts.steps_per_octave;
  auto t_at = [&](int j) {
    return std::exp2(opts.log2_t_min + static_cast<double>(j) / opts.steps_per_octave);
  };
  std::vector<double> g(static_cast<std::size_t>(points), 0.0);
  auto work = [&](int lo, int hi) {
    for (int j = lo; j < hi; ++j) {
      const double t = t_at(j);
      const double k = k_functional(f, t, c, {}, opts.solver).value;
      g[static_cast<std::size_t>(j)] = std::pow(std::pow(t, -theta) * k, q);
    }
  };
  const unsigned threads = std::max(1U, opts.threads);
  if (threads == 1) {
    work(0, points);
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i)
      pool.emplace_back(work, points * static_cast<int>(i) / static_cast<int>(threads),
                        points * static_cast<int>(i + 1) / static_cast<int>(threads));
    for (auto& th : pool) th.join();
  }
  double integral = 0.0;
  for (int j = 0; j < points; ++j) integral += (j == 0 || j == points - 1 ? 0.5 : 1.0) * g[static_cast<std::size_t>(j)];
  integral *= h;
  const double a = t_at(0);
  const double b = t_at(points - 1);
  const double n0 = norm(f, c.spec0);
  const double n1 = norm(f, c.spec1);
  integral += std::pow(n1, q) * std::pow(a, (1.0 - theta) * q) / ((1.0 - theta) * q);
  integral += std::pow(n0, q) * std::pow(b, -theta * q) / (theta * q);
  return std::pow(integral, 1.0 / q);
}

ClosednessResult k_closedness(const TensorField& f, double t, const Couple& c, const Projector& projector,
                              const SolverOptions& opts) {
  ClosednessResult out;
  out.constrained = k_functional(f, t, c, projector, opts);
  out.unconstrained = k_functional(f, t, c, {}, opts, &out.constrained.part0);
  if (max_abs(f) == 0.0) return out;
  const double denom = std::min(out.unconstrained.value, out.constrained.value);
  out.ratio = denom > 0.0 ? out.constrained.value / denom : 1.0;
  return out;
}

double k_closedness_ratio(const TensorField& f, double t, const Couple& c, const Projector& projector,
                          const SolverOptions& opts) {
  return k_closedness(f, t, c, projector, opts).ratio;
}

}  // namespace ustat
