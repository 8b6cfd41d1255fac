#include "ustat/norms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "ustat/error.hpp"
#include "ustat/rng.hpp"

namespace ustat {

namespace {

std::string exponent_text(double p) { return std::isinf(p) ? "inf" : format_double(p); }

}  // namespace

NormSpec::NormSpec(std::vector<NormLevel> levels) : levels_(std::move(levels)) {
  for (const NormLevel& l : levels_) {
    if (!(l.p > 0.0)) raise(ErrorKind::BadSpec, "exponent must be positive, got " + exponent_text(l.p));
    if (l.axes.empty()) raise(ErrorKind::BadSpec, "norm level without axes");
  }
}

NormSpec NormSpec::lp(double p, std::vector<std::size_t> axes) {
  return NormSpec({NormLevel{p, std::move(axes)}});
}

NormSpec NormSpec::lp_all(double p, std::size_t rank) {
  std::vector<std::size_t> axes(rank);
  for (std::size_t k = 0; k < rank; ++k) axes[k] = k;
  if (rank == 0) return NormSpec();
  return lp(p, std::move(axes));
}

NormSpec NormSpec::mixed(double inner, std::vector<std::size_t> inner_axes, double outer,
                         std::vector<std::size_t> outer_axes) {
  std::vector<NormLevel> levels;
  if (!inner_axes.empty()) levels.push_back({inner, std::move(inner_axes)});
  if (!outer_axes.empty()) levels.push_back({outer, std::move(outer_axes)});
  return NormSpec(std::move(levels));
}

NormSpec NormSpec::then(double p, std::vector<std::size_t> axes) const {
  std::vector<NormLevel> levels = levels_;
  levels.push_back({p, std::move(axes)});
  return NormSpec(std::move(levels));
}

double conjugate_exponent(double p) {
  if (!(p >= 1.0)) raise(ErrorKind::BadSpec, "conjugate exponent needs p >= 1");
  if (p == 1.0) return kInf;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

NormSpec NormSpec::dual() const {
  std::vector<NormLevel> levels = levels_;
  for (NormLevel& l : levels) l.p = conjugate_exponent(l.p);
  return NormSpec(std::move(levels));
}

bool NormSpec::convex() const {
  return std::all_of(levels_.begin(), levels_.end(), [](const NormLevel& l) { return l.p >= 1.0; });
}

void NormSpec::validate(std::size_t rank) const {
  std::vector<int> seen(rank, 0);
  for (const NormLevel& l : levels_) {
    for (std::size_t a : l.axes) {
      if (a >= rank) raise(ErrorKind::BadSpec, "norm axis " + std::to_string(a) + " out of range");
      if (seen[a]++) raise(ErrorKind::BadSpec, "norm axis " + std::to_string(a) + " listed twice");
    }
  }
  for (std::size_t a = 0; a < rank; ++a)
    if (!seen[a]) raise(ErrorKind::BadSpec, "axis " + std::to_string(a) + " not covered by the norm");
}

std::string NormSpec::describe() const {
  std::string out = "|.|";
  for (const NormLevel& l : levels_) {
    std::string axes;
    for (std::size_t k = 0; k < l.axes.size(); ++k) axes += (k ? "," : "") + std::to_string(l.axes[k]);
    out = "L" + exponent_text(l.p) + "[" + axes + "](" + out + ")";
  }
  return out;
}

CompiledNorm::CompiledNorm(const std::vector<Space>& axes, const NormSpec& spec) : spec_(spec) {
  const std::size_t rank = axes.size();
  spec.validate(rank);
  std::vector<std::size_t> shape(rank);
  size_ = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    shape[k] = axes[k].size();
    size_ *= shape[k];
  }
  weights_.assign(size_, 1.0);

  const auto& specs = spec.levels();
  const std::size_t L = specs.size();
  // level_of[axis] = level index summing that axis.
  std::vector<std::size_t> level_of(rank, 0);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t a : specs[l].axes) level_of[a] = l;

  // pos_size[l] = number of positions after level l-1 (over axes with level >= l).
  std::vector<std::size_t> pos_size(L + 1, 1);
  for (std::size_t l = 0; l <= L; ++l)
    for (std::size_t a = 0; a < rank; ++a)
      if (level_of[a] >= l) pos_size[l] *= shape[a];

  levels_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    levels_[l].p = specs[l].p;
    levels_[l].out_size = pos_size[l + 1];
    levels_[l].out_index.assign(pos_size[l], 0);
    levels_[l].weight.assign(pos_size[l], 1.0);
  }

  std::vector<std::size_t> idx(rank, 0);
  std::vector<std::size_t> pos(L + 1, 0);
  for (std::size_t e = 0; e < size_; ++e) {
    std::size_t rem = e;
    for (std::size_t a = rank; a-- > 0;) {
      idx[a] = rem % shape[a];
      rem /= shape[a];
    }
    double w = 1.0;
    for (std::size_t a = 0; a < rank; ++a) w *= axes[a].weight(idx[a]);
    weights_[e] = w;
    for (std::size_t l = 0; l <= L; ++l) {
      std::size_t p = 0;
      for (std::size_t a = 0; a < rank; ++a)
        if (level_of[a] >= l) p = p * shape[a] + idx[a];
      pos[l] = p;
    }
    for (std::size_t l = 0; l < L; ++l) {
      double lw = 1.0;
      for (std::size_t a : specs[l].axes) lw *= axes[a].weight(idx[a]);
      levels_[l].out_index[pos[l]] = pos[l + 1];
      levels_[l].weight[pos[l]] = lw;
    }
  }
}

double CompiledNorm::value(std::span<const double> x) const {
  return smoothed(x, 0.0, {});
}

double CompiledNorm::smoothed(std::span<const double> x, double eps, std::span<double> grad) const {
  if (x.size() != size_) raise(ErrorKind::BadSpec, "vector size does not match the compiled norm");
  const std::size_t L = levels_.size();
  std::vector<std::vector<double>> v(L + 1);
  v[0].resize(size_);
  for (std::size_t k = 0; k < size_; ++k)
    v[0][k] = eps > 0.0 ? std::sqrt(x[k] * x[k] + eps * eps) : std::abs(x[k]);
  for (std::size_t l = 0; l < L; ++l) {
    const Level& lev = levels_[l];
    const std::vector<double>& in = v[l];
    std::vector<double>& out = v[l + 1];
    out.assign(lev.out_size, 0.0);
    if (std::isinf(lev.p)) {
      for (std::size_t k = 0; k < in.size(); ++k) out[lev.out_index[k]] = std::max(out[lev.out_index[k]], in[k]);
    } else if (lev.p == 1.0) {
      for (std::size_t k = 0; k < in.size(); ++k) out[lev.out_index[k]] += lev.weight[k] * in[k];
    } else {
      for (std::size_t k = 0; k < in.size(); ++k)
        if (in[k] > 0.0) out[lev.out_index[k]] += lev.weight[k] * std::pow(in[k], lev.p);
      for (double& o : out) o = std::pow(o, 1.0 / lev.p);
    }
  }
  const double result = L == 0 ? v[0].at(0) : v[L].at(0);
  if (grad.empty()) return result;
  if (grad.size() != size_) raise(ErrorKind::BadSpec, "gradient buffer size mismatch");

  std::vector<double> mult(1, 1.0);
  for (std::size_t l = L; l-- > 0;) {
    const Level& lev = levels_[l];
    if (std::isinf(lev.p)) raise(ErrorKind::BadSpec, "no gradient for sup levels");
    const std::vector<double>& in = v[l];
    const std::vector<double>& out = v[l + 1];
    std::vector<double> next(in.size(), 0.0);
    for (std::size_t k = 0; k < in.size(); ++k) {
      const std::size_t o = lev.out_index[k];
      double r;
      if (lev.p == 1.0) {
        r = 1.0;
      } else if (out[o] == 0.0) {
        r = 0.0;
      } else {
        r = std::pow(in[k] / out[o], lev.p - 1.0);
      }
      next[k] = mult[o] * r;
    }
    mult = std::move(next);
  }
  for (std::size_t k = 0; k < size_; ++k) {
    const double s = v[0][k] == 0.0 ? 0.0 : x[k] / v[0][k];
    grad[k] = s * mult[k];
  }
  return result;
}

double norm(const TensorField& f, const NormSpec& spec) {
  if (f.rank() == 0) {
    if (!spec.levels().empty()) raise(ErrorKind::BadSpec, "scalar field takes the empty spec");
    return std::abs(f[0]);
  }
  return CompiledNorm(f.axes(), spec).value(f.values());
}

std::vector<double> norm_gradient(const TensorField& f, const NormSpec& spec) {
  CompiledNorm c(f.axes(), spec);
  std::vector<double> g(f.size());
  c.smoothed(f.values(), 0.0, g);
  return g;
}

namespace {

// (sum_i table_i(digits_i)^r)^s integrated over base^D.
struct MomentProblem {
  Space base;
  std::size_t digits = 0;
  std::size_t arity = 0;
  std::vector<std::vector<std::size_t>> kernel_digits;
  std::vector<std::vector<double>> tables;  // already raised to r
};

struct KahanSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double y = v - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

double integrand(const MomentProblem& pr, std::span<const std::size_t> d, double s) {
  const std::size_t a = pr.base.size();
  double total = 0.0;
  for (std::size_t k = 0; k < pr.tables.size(); ++k) {
    std::size_t flat = 0;
    for (std::size_t dig : pr.kernel_digits[k]) flat = flat * a + d[dig];
    total += pr.tables[k][flat];
  }
  if (s == 1.0) return total;
  return total > 0.0 ? std::pow(total, s) : 0.0;
}

Estimate moment_exact(const MomentProblem& pr, double s, std::size_t guard) {
  const std::size_t a = pr.base.size();
  std::size_t points = 1;
  for (std::size_t k = 0; k < pr.digits; ++k) {
    if (points > guard / a) raise(ErrorKind::TooLarge, "exact enumeration exceeds the element guard");
    points *= a;
  }
  std::vector<std::size_t> d(pr.digits, 0);
  KahanSum acc;
  for (std::size_t pt = 0; pt < points; ++pt) {
    double w = 1.0;
    for (std::size_t k = 0; k < pr.digits; ++k) w *= pr.base.weight(d[k]);
    acc.add(w * integrand(pr, d, s));
    for (std::size_t k = pr.digits; k-- > 0;) {
      if (++d[k] < a) break;
      d[k] = 0;
    }
  }
  return {acc.sum, 0.0, 0};
}

inline constexpr std::uint64_t kMcBlock = 4096;

Estimate moment_mc(const MomentProblem& pr, double s, const McOptions& mc) {
  if (mc.samples < 2) raise(ErrorKind::BadSpec, "Monte Carlo needs at least 2 samples");
  std::vector<double> cdf;
  double c = 0.0;
  for (double w : pr.base.weights()) cdf.push_back(c += w);
  cdf.back() = 1.0;
  const std::uint64_t blocks = (mc.samples + kMcBlock - 1) / kMcBlock;
  std::vector<double> bsum(blocks, 0.0), bsq(blocks, 0.0);

  auto run_blocks = [&](std::uint64_t lo, std::uint64_t hi) {
    std::vector<std::size_t> d(pr.digits, 0);
    for (std::uint64_t b = lo; b < hi; ++b) {
      KahanSum s1, s2;
      const std::uint64_t end = std::min(mc.samples, (b + 1) * kMcBlock);
      for (std::uint64_t smp = b * kMcBlock; smp < end; ++smp) {
        CounterRng rng(mc.seed, smp);
        for (std::size_t k = 0; k < pr.digits; ++k) {
          const double u = rng.uniform();
          d[k] = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
          if (d[k] >= cdf.size()) d[k] = cdf.size() - 1;
        }
        const double v = integrand(pr, d, s);
        s1.add(v);
        s2.add(v * v);
      }
      bsum[b] = s1.sum;
      bsq[b] = s2.sum;
    }
  };

  const unsigned threads = std::max(1U, std::min<unsigned>(mc.threads, static_cast<unsigned>(blocks)));
  if (threads == 1) {
    run_blocks(0, blocks);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(run_blocks, blocks * t / threads, blocks * (t + 1) / threads);
    for (auto& th : pool) th.join();
  }
  KahanSum tot, totsq;
  for (std::uint64_t b = 0; b < blocks; ++b) {
    tot.add(bsum[b]);
    totsq.add(bsq[b]);
  }
  const double n = static_cast<double>(mc.samples);
  const double mean = tot.sum / n;
  const double var = std::max(0.0, (totsq.sum - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), mc.samples};
}

Estimate run_moment(const MomentProblem& pr, double s, const std::optional<McOptions>& mc, std::size_t guard) {
  return mc ? moment_mc(pr, s, *mc) : moment_exact(pr, s, guard);
}

std::vector<double> powered(std::span<const double> values, double r) {
  std::vector<double> out(values.begin(), values.end());
  if (r != 1.0)
    for (double& v : out) v = v > 0.0 ? std::pow(v, r) : 0.0;
  return out;
}

MomentProblem build_problem(const KernelFamily& k, double r, Coupling mode) {
  if (k.value_space()) raise(ErrorKind::BadSpec, "moment functionals take scalar kernels");
  const std::size_t n = k.coordinates();
  const std::size_t m = k.arity();
  MomentProblem pr;
  pr.base = k.base();
  pr.arity = m;
  const std::size_t slots = mode == Coupling::decoupled ? n * m : n;
  std::vector<std::size_t> digit_of(slots, static_cast<std::size_t>(-1));
  for (const Kernel& ker : k.kernels()) {
    for (double v : ker.field.values())
      if (v < 0.0) raise(ErrorKind::NotNonnegative, "kernel takes a negative value");
    std::vector<std::size_t> digs(m);
    for (std::size_t c = 0; c < m; ++c) {
      const std::size_t slot = mode == Coupling::decoupled ? c * n + ker.index[c] : ker.index[c];
      if (digit_of[slot] == static_cast<std::size_t>(-1)) digit_of[slot] = pr.digits++;
      digs[c] = digit_of[slot];
    }
    pr.kernel_digits.push_back(std::move(digs));
    pr.tables.push_back(powered(ker.field.values(), r));
  }
  return pr;
}

void check_exponents(double r, double s) {
  if (!(r > 0.0) || !(s > 0.0) || !std::isfinite(r) || !std::isfinite(s))
    raise(ErrorKind::BadSpec, "moment exponents must be positive and finite");
}

}  // namespace

Estimate ustat_moment(const KernelFamily& k, double r, double s, Coupling mode,
                      const std::optional<McOptions>& mc, std::size_t guard) {
  check_exponents(r, s);
  return run_moment(build_problem(k, r, mode), s, mc, guard);
}

Estimate ustat_lhs(const KernelFamily& k, double p, Coupling mode, const std::optional<McOptions>& mc,
                   std::size_t guard) {
  if (!(p > 0.0)) raise(ErrorKind::BadSpec, "exponent must be positive");
  return ustat_moment(k, p, 1.0 / p, mode, mc, guard);
}

double family_lhs(const TensorField& fbar, double p, std::size_t guard) {
  if (!(p > 0.0)) raise(ErrorKind::BadSpec, "exponent must be positive");
  const FamilyLayout layout = family_layout(fbar);
  const std::size_t n = layout.n;
  const std::size_t m = layout.m;
  const std::size_t a = layout.base.size();
  MomentProblem pr;
  pr.base = layout.base;
  pr.arity = m;
  std::size_t tuples = 1;
  for (std::size_t c = 0; c < m; ++c) tuples *= n;
  std::size_t cells = 1;
  for (std::size_t c = 0; c < m; ++c) cells *= a;
  std::vector<std::size_t> digit_of(n * m, static_cast<std::size_t>(-1));
  std::vector<std::size_t> idx(m), x(m);
  for (std::size_t t = 0; t < tuples; ++t) {
    std::size_t rem = t;
    for (std::size_t c = m; c-- > 0;) {
      idx[c] = rem % n;
      rem /= n;
    }
    std::vector<double> table(cells, 0.0);
    bool nonzero = false;
    for (std::size_t cell = 0; cell < cells; ++cell) {
      std::size_t r2 = cell;
      for (std::size_t c = m; c-- > 0;) {
        x[c] = r2 % a;
        r2 /= a;
      }
      std::size_t flat = 0;
      for (std::size_t c = 0; c < m; ++c) flat = flat * (n * a) + idx[c] * a + x[c];
      const double v = std::abs(fbar[flat]);
      if (v > 0.0) {
        table[cell] = p == 1.0 ? v : std::pow(v, p);
        nonzero = true;
      }
    }
    if (!nonzero) continue;
    std::vector<std::size_t> digs(m);
    for (std::size_t c = 0; c < m; ++c) {
      const std::size_t slot = c * n + idx[c];
      if (digit_of[slot] == static_cast<std::size_t>(-1)) digit_of[slot] = pr.digits++;
      digs[c] = digit_of[slot];
    }
    pr.kernel_digits.push_back(std::move(digs));
    pr.tables.push_back(std::move(table));
  }
  return moment_exact(pr, 1.0 / p, guard).value;
}

TensorField square_function(const TensorField& f, std::size_t M) {
  const auto parts = hoeffding_decompose(f);
  const double tol = 1e-10 * std::max(1.0, max_abs(f));
  std::vector<double> sq(f.size(), 0.0);
  for (std::uint32_t b = 0; b < parts.size(); ++b) {
    if (static_cast<std::size_t>(std::popcount(b)) > M) {
      if (max_abs(parts[b]) > tol)
        raise(ErrorKind::HigherLevelsPresent, "component of level " + std::to_string(std::popcount(b)) +
                                                  " exceeds " + std::to_string(M));
      continue;
    }
    for (std::size_t e = 0; e < f.size(); ++e) sq[e] += parts[b][e] * parts[b][e];
  }
  for (double& v : sq) v = std::sqrt(v);
  return f.with_values(std::move(sq));
}

}  // namespace ustat
