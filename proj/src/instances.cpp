#include "ustat/instances.hpp"

#include <algorithm>

#include "ustat/error.hpp"

namespace ustat {

Space random_probability_space(CounterRng& rng, std::size_t atoms, bool uniform) {
  if (atoms == 0) raise(ErrorKind::InvalidMeasure, "space needs at least one atom");
  if (uniform) return uniform_space(atoms);
  std::vector<double> w(atoms);
  double total = 0.0;
  for (double& v : w) total += (v = 0.5 + rng.uniform());
  for (double& v : w) v /= total;
  // Absorb rounding in the last atom so the sum is 1 to within an ulp.
  double head = 0.0;
  for (std::size_t k = 0; k + 1 < atoms; ++k) head += w[k];
  w.back() = 1.0 - head;
  return make_space(std::move(w), SpaceKind::probability);
}

TensorField random_field(CounterRng& rng, std::vector<Space> axes, bool nonnegative, double sparsity) {
  return TensorField::generate(std::move(axes), [&](std::span<const std::size_t>) {
    if (sparsity > 0.0 && rng.uniform() < sparsity) return 0.0;
    return nonnegative ? rng.uniform() : rng.normal();
  });
}

TensorField random_family_field(CounterRng& rng, const Space& base, std::size_t n, std::size_t m,
                                double sparsity) {
  const Space bar = disjoint_union_copies(base, n);
  return random_field(rng, std::vector<Space>(m, bar), true, sparsity);
}

namespace {

std::vector<std::vector<std::size_t>> increasing_tuples(std::size_t n, std::size_t m) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> t(m);
  auto rec = [&](auto&& self, std::size_t pos, std::size_t start) -> void {
    if (pos == m) {
      out.push_back(t);
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      t[pos] = i;
      self(self, pos + 1, i + 1);
    }
  };
  rec(rec, 0, 0);
  return out;
}

}  // namespace

KernelFamily random_kernel_family(CounterRng& rng, const Space& base, std::size_t n, std::size_t m,
                                  double density) {
  const auto tuples = increasing_tuples(n, m);
  std::vector<Kernel> kernels;
  for (const auto& t : tuples) {
    const bool keep = rng.uniform() < density;
    TensorField fld = random_field(rng, std::vector<Space>(m, base), true);
    if (keep) kernels.push_back({t, std::move(fld)});
  }
  if (kernels.empty() && !tuples.empty())
    kernels.push_back({tuples[rng.below(tuples.size())], random_field(rng, std::vector<Space>(m, base), true)});
  return KernelFamily(m, n, base, std::nullopt, std::move(kernels));
}

KernelFamily disjoint_kernel_family(CounterRng& rng, const Space& base, std::size_t n, std::size_t m) {
  if (m == 0 || m > n) raise(ErrorKind::BadInstance, "need 1 <= m <= n");
  std::vector<Kernel> kernels;
  for (std::size_t start = 0; start + m <= n; start += m) {
    std::vector<std::size_t> t(m);
    for (std::size_t c = 0; c < m; ++c) t[c] = start + c;
    kernels.push_back({t, random_field(rng, std::vector<Space>(m, base), true)});
  }
  return KernelFamily(m, n, base, std::nullopt, std::move(kernels));
}

TensorField random_low_level_field(CounterRng& rng, const Space& base, std::size_t n, std::size_t level,
                                   std::size_t value_dim) {
  std::vector<Space> axes(n, base);
  if (value_dim > 0) axes.push_back(value_axis(value_dim));
  return hoeffding_up_to(random_field(rng, std::move(axes), false), level);
}

std::vector<TensorField> random_mean_zero_fields(CounterRng& rng, const Space& base, std::size_t count,
                                                 std::size_t value_dim) {
  std::vector<TensorField> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<Space> axes{base};
    if (value_dim > 0) axes.push_back(value_axis(value_dim));
    TensorField f = random_field(rng, std::move(axes), false);
    out.push_back(f - average_along(f, 0));
  }
  return out;
}

WeightedInstance random_weighted_instance(CounterRng& rng, std::size_t I, std::size_t J, std::size_t atoms,
                                          bool binary_weights) {
  if (I == 0 || J == 0) raise(ErrorKind::BadInstance, "index sets must be nonempty");
  WeightedInstance inst;
  inst.base = random_probability_space(rng, atoms, rng.coin());
  inst.I = I;
  inst.J = J;
  inst.f = random_field(rng, {disjoint_union_copies(inst.base, I), counting_space(J)}, true, 0.2);
  const std::vector<Space> waxes(I, inst.base);
  for (std::size_t k = 0; k < I * J; ++k) {
    const double density = 0.3 + 0.7 * rng.uniform();
    inst.w.push_back(TensorField::generate(waxes, [&](std::span<const std::size_t>) {
      if (binary_weights) return rng.uniform() < density ? 1.0 : 0.0;
      return rng.uniform();
    }));
  }
  return inst;
}

}  // namespace ustat
