#include "ustat/hoeffding.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "ustat/error.hpp"

namespace ustat {

CoordSet CoordSet::of(std::initializer_list<std::size_t> coords) {
  return of(std::vector<std::size_t>(coords));
}

CoordSet CoordSet::of(const std::vector<std::size_t>& coords) {
  std::uint32_t bits = 0;
  for (std::size_t c : coords) {
    if (c >= 32) raise(ErrorKind::BadAxis, "coordinate index " + std::to_string(c) + " exceeds 31");
    bits |= std::uint32_t{1} << c;
  }
  return CoordSet(bits);
}

std::vector<std::size_t> CoordSet::elements() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < 32; ++j)
    if (contains(j)) out.push_back(j);
  return out;
}

ProductLayout product_layout(const TensorField& f) {
  ProductLayout layout;
  std::size_t n = f.rank();
  if (n > 0 && f.axis(n - 1).kind() == SpaceKind::hilbert_value) {
    layout.value = f.axis(n - 1);
    --n;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const Space& ax = f.axis(k);
    if (ax.kind() == SpaceKind::hilbert_value)
      raise(ErrorKind::BadAxis, "value axis must be the last axis");
    if (!ax.is_probability())
      raise(ErrorKind::NotProbability, "coordinate axis " + std::to_string(k) + " is not a probability space");
    if (k > 0 && !(ax == f.axis(0)))
      raise(ErrorKind::BadAxis, "coordinate axes are not copies of one space");
  }
  layout.base = n > 0 ? f.axis(0) : Space();
  layout.n = n;
  return layout;
}

std::vector<Space> product_axes(const Space& base, std::size_t n, const std::optional<Space>& value) {
  std::vector<Space> axes(n, base);
  if (value) axes.push_back(*value);
  return axes;
}

namespace {

void check_subset(CoordSet a, std::size_t n) {
  if (!a.subset_of(CoordSet::full(n)))
    raise(ErrorKind::BadAxis, "coordinate set exceeds the number of coordinates");
}

TensorField center_along(const TensorField& f, std::size_t axis) {
  const Space& sp = f.axis(axis);
  return transform_fibers(f, axis, [&sp](std::span<const double> in, std::span<double> out) {
    double mean = 0.0;
    for (std::size_t a = 0; a < in.size(); ++a) mean += sp.weight(a) * in[a];
    mean /= sp.total_mass();
    for (std::size_t a = 0; a < in.size(); ++a) out[a] = in[a] - mean;
  });
}

// Splits f along coordinates j..n-1 into (id-E) and E branches.
void decompose_rec(const TensorField& f, std::size_t j, std::size_t n, std::uint32_t bits,
                   std::vector<TensorField>& out) {
  if (j == n) {
    out[bits] = f;
    return;
  }
  TensorField e = average_along(f, j);
  TensorField c = f - e;
  decompose_rec(e, j + 1, n, bits, out);
  decompose_rec(c, j + 1, n, bits | (std::uint32_t{1} << j), out);
}

}  // namespace

TensorField cond_expect(const TensorField& f, CoordSet a) {
  const ProductLayout layout = product_layout(f);
  check_subset(a, layout.n);
  TensorField out = f;
  for (std::size_t j = 0; j < layout.n; ++j)
    if (!a.contains(j)) out = average_along(out, j);
  return out;
}

TensorField hoeffding_project(const TensorField& f, CoordSet a) {
  const ProductLayout layout = product_layout(f);
  check_subset(a, layout.n);
  TensorField out = f;
  for (std::size_t j = 0; j < layout.n; ++j)
    out = a.contains(j) ? center_along(out, j) : average_along(out, j);
  return out;
}

TensorField hoeffding_level(const TensorField& f, std::size_t m) {
  const ProductLayout layout = product_layout(f);
  if (m > layout.n)
    raise(ErrorKind::BadLevel, "level " + std::to_string(m) + " exceeds n = " + std::to_string(layout.n));
  if (layout.n <= kMaxDecomposeCoordinates) {
    const auto parts = hoeffding_decompose(f);
    TensorField out = TensorField::filled(f.axes(), 0.0);
    for (std::uint32_t b = 0; b < parts.size(); ++b)
      if (static_cast<std::size_t>(std::popcount(b)) == m) out = out + parts[b];
    return out;
  }
  raise(ErrorKind::TooLarge, "hoeffding_level supports at most 16 coordinates");
}

TensorField hoeffding_up_to(const TensorField& f, std::size_t m) {
  const ProductLayout layout = product_layout(f);
  if (m >= layout.n) return f;
  const auto parts = hoeffding_decompose(f);
  TensorField out = TensorField::filled(f.axes(), 0.0);
  for (std::uint32_t b = 0; b < parts.size(); ++b)
    if (static_cast<std::size_t>(std::popcount(b)) <= m) out = out + parts[b];
  return out;
}

std::vector<TensorField> hoeffding_decompose(const TensorField& f) {
  const ProductLayout layout = product_layout(f);
  if (layout.n > kMaxDecomposeCoordinates)
    raise(ErrorKind::TooLarge, "full decomposition needs n <= 16, got " + std::to_string(layout.n));
  std::vector<TensorField> out(std::size_t{1} << layout.n);
  decompose_rec(f, 0, layout.n, 0, out);
  return out;
}

KernelFamily::KernelFamily(std::size_t m, std::size_t n, Space base, std::optional<Space> value,
                           std::vector<Kernel> kernels, TupleOrder order)
    : m_(m), n_(n), base_(std::move(base)), value_(std::move(value)), kernels_(std::move(kernels)), order_(order) {
  if (!base_.is_probability()) raise(ErrorKind::NotProbability, "kernel base space must be a probability space");
  if (value_ && value_->kind() != SpaceKind::hilbert_value)
    raise(ErrorKind::BadAxis, "value space must be a hilbert_value axis");
  const std::vector<Space> axes = kernel_axes();
  std::sort(kernels_.begin(), kernels_.end(),
            [](const Kernel& a, const Kernel& b) { return a.index < b.index; });
  for (std::size_t k = 0; k < kernels_.size(); ++k) {
    const Kernel& ker = kernels_[k];
    if (ker.index.size() != m_) raise(ErrorKind::BadInstance, "kernel index has wrong arity");
    for (std::size_t c = 0; c < m_; ++c) {
      if (ker.index[c] >= n_) raise(ErrorKind::BadInstance, "kernel index out of range");
      if (order_ == TupleOrder::strictly_increasing && c > 0 && ker.index[c] <= ker.index[c - 1])
        raise(ErrorKind::BadInstance, "kernel index is not strictly increasing");
    }
    if (k > 0 && kernels_[k - 1].index == ker.index) raise(ErrorKind::BadInstance, "duplicate kernel index");
    if (ker.field.axes() != axes) raise(ErrorKind::BadAxis, "kernel axes do not match the family");
  }
}

std::vector<Space> KernelFamily::kernel_axes() const { return product_axes(base_, m_, value_); }

const TensorField* KernelFamily::find(const std::vector<std::size_t>& index) const {
  auto it = std::lower_bound(kernels_.begin(), kernels_.end(), index,
                             [](const Kernel& k, const std::vector<std::size_t>& idx) { return k.index < idx; });
  if (it == kernels_.end() || it->index != index) return nullptr;
  return &it->field;
}

KernelFamily KernelFamily::map(const std::function<double(double)>& fn) const {
  std::vector<Kernel> out;
  out.reserve(kernels_.size());
  for (const Kernel& k : kernels_) out.push_back({k.index, ustat::map(k.field, fn)});
  return KernelFamily(m_, n_, base_, value_, std::move(out), order_);
}

KernelFamily extract_kernels(const TensorField& f, std::size_t m) {
  const ProductLayout layout = product_layout(f);
  if (m > layout.n) raise(ErrorKind::BadLevel, "level exceeds n");
  const auto parts = hoeffding_decompose(f);
  const std::vector<Space> kaxes = product_axes(layout.base, m, layout.value);
  std::vector<Kernel> kernels;
  for (std::uint32_t b = 0; b < parts.size(); ++b) {
    if (static_cast<std::size_t>(std::popcount(b)) != m) continue;
    const CoordSet set(b);
    std::vector<std::size_t> idx = set.elements();
    const TensorField& part = parts[b];
    std::vector<std::size_t> full(f.rank(), 0);
    TensorField ker = TensorField::generate(kaxes, [&](std::span<const std::size_t> kidx) {
      for (std::size_t c = 0; c < m; ++c) full[idx[c]] = kidx[c];
      if (layout.value) full[layout.n] = kidx[m];
      return part.at(full);
    });
    kernels.push_back({std::move(idx), std::move(ker)});
  }
  return KernelFamily(m, layout.n, layout.base, layout.value, std::move(kernels));
}

TensorField assemble_ustat(const KernelFamily& k, bool decoupled, std::size_t guard) {
  const std::size_t n = k.coordinates();
  const std::size_t m = k.arity();
  const std::size_t coords = decoupled ? n * m : n;
  std::vector<Space> axes(coords, k.base());
  if (k.value_space()) axes.push_back(*k.value_space());
  const ProductSpace shape_check = product(axes, guard);

  const std::size_t a = k.base().size();
  const std::size_t vdim = k.value_space() ? k.value_space()->size() : 1;
  std::vector<double> values(shape_check.atom_count(), 0.0);
  // Kernel flat index: row-major over (x_1..x_m, value).
  std::vector<std::size_t> pos(coords + (k.value_space() ? 1 : 0), 0);
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    std::size_t rem = flat;
    for (std::size_t d = pos.size(); d-- > 0;) {
      const std::size_t sz = d < coords ? a : vdim;
      pos[d] = rem % sz;
      rem /= sz;
    }
    const std::size_t v = k.value_space() ? pos[coords] : 0;
    double sum = 0.0;
    for (const Kernel& ker : k.kernels()) {
      std::size_t kf = 0;
      for (std::size_t c = 0; c < m; ++c) {
        const std::size_t coord = decoupled ? c * n + ker.index[c] : ker.index[c];
        kf = kf * a + pos[coord];
      }
      kf = kf * vdim + v;
      sum += ker.field[kf];
    }
    values[flat] = sum;
  }
  return TensorField(std::move(axes), std::move(values), guard);
}

FamilyLayout family_layout(const TensorField& fbar) {
  FamilyLayout layout;
  layout.m = fbar.rank();
  if (layout.m == 0) raise(ErrorKind::BadAxis, "family field needs at least one axis");
  for (std::size_t k = 0; k < layout.m; ++k) {
    const Space& ax = fbar.axis(k);
    if (k > 0 && !(ax == fbar.axis(0))) raise(ErrorKind::BadAxis, "family axes differ");
  }
  const Space& ax = fbar.axis(0);
  const auto offsets = ax.block_offsets();
  const std::size_t blocks = offsets.empty() ? 1 : offsets.size();
  if (ax.size() % blocks != 0) raise(ErrorKind::BadAxis, "blocks of unequal size");
  const std::size_t atoms = ax.size() / blocks;
  std::vector<double> w(ax.weights().begin(), ax.weights().begin() + static_cast<std::ptrdiff_t>(atoms));
  for (std::size_t b = 0; b < blocks; ++b) {
    if (!offsets.empty() && offsets[b] != b * atoms) raise(ErrorKind::BadAxis, "blocks of unequal size");
    for (std::size_t x = 0; x < atoms; ++x)
      if (ax.weight(b * atoms + x) != w[x]) raise(ErrorKind::BadAxis, "blocks are not copies of one space");
  }
  layout.base = make_space(std::move(w), SpaceKind::probability);
  layout.n = blocks;
  return layout;
}

TensorField to_family_field(const KernelFamily& k) {
  if (k.value_space()) raise(ErrorKind::BadAxis, "family fields carry no value axis");
  const std::size_t n = k.coordinates();
  const std::size_t m = k.arity();
  const std::size_t a = k.base().size();
  const Space bar = disjoint_union_copies(k.base(), n);
  std::vector<Space> axes(m, bar);
  TensorField out = TensorField::filled(axes, 0.0);
  std::vector<double> values(out.values().begin(), out.values().end());
  std::vector<std::size_t> local(m, 0);
  for (const Kernel& ker : k.kernels()) {
    for (std::size_t kf = 0; kf < ker.field.size(); ++kf) {
      std::size_t rem = kf;
      for (std::size_t c = m; c-- > 0;) {
        local[c] = rem % a;
        rem /= a;
      }
      std::size_t flat = 0;
      for (std::size_t c = 0; c < m; ++c) flat = flat * (n * a) + ker.index[c] * a + local[c];
      values[flat] += ker.field[kf];
    }
  }
  return out.with_values(std::move(values));
}

KernelFamily family_from_field(const TensorField& fbar, const Space& base) {
  const FamilyLayout layout = family_layout(fbar);
  if (!(layout.base == base)) raise(ErrorKind::BadAxis, "family field blocks do not match the base space");
  const std::size_t n = layout.n;
  const std::size_t m = layout.m;
  const std::size_t a = base.size();
  std::size_t tuples = 1;
  for (std::size_t c = 0; c < m; ++c) tuples *= n;
  std::vector<Kernel> kernels;
  kernels.reserve(tuples);
  std::vector<std::size_t> idx(m, 0);
  std::vector<std::size_t> full(m, 0);
  for (std::size_t t = 0; t < tuples; ++t) {
    std::size_t rem = t;
    for (std::size_t c = m; c-- > 0;) {
      idx[c] = rem % n;
      rem /= n;
    }
    TensorField ker = TensorField::generate(std::vector<Space>(m, base), [&](std::span<const std::size_t> x) {
      for (std::size_t c = 0; c < m; ++c) full[c] = idx[c] * a + x[c];
      return fbar.at(full);
    });
    kernels.push_back({idx, std::move(ker)});
  }
  return KernelFamily(m, n, base, std::nullopt, std::move(kernels), TupleOrder::arbitrary);
}

}  // namespace ustat
