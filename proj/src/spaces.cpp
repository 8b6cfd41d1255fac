#include "ustat/spaces.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ustat/error.hpp"

namespace ustat {

std::string_view to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::probability: return "probability";
    case SpaceKind::sigma_finite: return "sigma_finite";
    case SpaceKind::hilbert_value: return "hilbert_value";
  }
  return "unknown";
}

SpaceKind space_kind_from_string(std::string_view name) {
  if (name == "probability") return SpaceKind::probability;
  if (name == "sigma_finite") return SpaceKind::sigma_finite;
  if (name == "hilbert_value") return SpaceKind::hilbert_value;
  raise(ErrorKind::Parse, "unknown space kind '" + std::string(name) + "'");
}

Space::Space() : impl_(std::make_shared<const Impl>(Impl{{1.0}, SpaceKind::probability, 1.0, {}})) {}

bool operator==(const Space& a, const Space& b) {
  if (a.impl_ == b.impl_) return true;
  return a.kind() == b.kind() && std::ranges::equal(a.weights(), b.weights()) &&
         std::ranges::equal(a.block_offsets(), b.block_offsets());
}

Space make_space(std::vector<double> weights, SpaceKind kind) {
  if (weights.empty()) raise(ErrorKind::InvalidMeasure, "a space needs at least one atom");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      raise(ErrorKind::InvalidMeasure, "atom weight " + format_double(w) + " is not positive");
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (kind == SpaceKind::probability && std::abs(total - 1.0) > 1e-12) {
    raise(ErrorKind::NotProbability, "weights sum to " + format_double(total));
  }
  if (kind == SpaceKind::hilbert_value &&
      std::ranges::any_of(weights, [](double w) { return w != 1.0; })) {
    raise(ErrorKind::InvalidMeasure, "a hilbert_value axis carries counting measure");
  }
  return Space(std::make_shared<const Space::Impl>(
      Space::Impl{std::move(weights), kind, total, {}}));
}

Space uniform_space(std::size_t atoms) {
  if (atoms == 0) raise(ErrorKind::InvalidMeasure, "a space needs at least one atom");
  return make_space(std::vector<double>(atoms, 1.0 / static_cast<double>(atoms)),
                    SpaceKind::probability);
}

Space counting_space(std::size_t atoms) {
  return make_space(std::vector<double>(atoms, 1.0), SpaceKind::sigma_finite);
}

Space value_axis(std::size_t dim) {
  return make_space(std::vector<double>(dim, 1.0), SpaceKind::hilbert_value);
}

Space disjoint_union(std::span<const Space> spaces) {
  if (spaces.empty()) raise(ErrorKind::InvalidMeasure, "disjoint union of no spaces");
  Space::Impl impl;
  impl.kind = SpaceKind::sigma_finite;
  impl.total = 0.0;
  for (const Space& s : spaces) {
    impl.blocks.push_back(impl.weights.size());
    impl.weights.insert(impl.weights.end(), s.weights().begin(), s.weights().end());
    impl.total += s.total_mass();
  }
  if (impl.weights.size() > kDefaultElementGuard) {
    raise(ErrorKind::TooLarge, "disjoint union exceeds the element guard");
  }
  return Space(std::make_shared<const Space::Impl>(std::move(impl)));
}

Space disjoint_union_copies(const Space& space, std::size_t copies) {
  std::vector<Space> parts(copies, space);
  return disjoint_union(parts);
}

ProductSpace::ProductSpace(std::vector<Space> factors) : factors_(std::move(factors)) {
  for (const Space& s : factors_) atom_count_ *= s.size();
}

double ProductSpace::weight(std::size_t flat) const {
  double w = 1.0;
  for (std::size_t k = factors_.size(); k-- > 0;) {
    const std::size_t n = factors_[k].size();
    w *= factors_[k].weight(flat % n);
    flat /= n;
  }
  return w;
}

std::vector<std::size_t> ProductSpace::unflatten(std::size_t flat) const {
  std::vector<std::size_t> index(factors_.size());
  for (std::size_t k = factors_.size(); k-- > 0;) {
    index[k] = flat % factors_[k].size();
    flat /= factors_[k].size();
  }
  return index;
}

Space ProductSpace::to_space() const {
  if (factors_.size() == 1) return factors_.front();
  std::vector<double> w(atom_count_);
  for (std::size_t i = 0; i < atom_count_; ++i) w[i] = weight(i);
  const bool prob = std::ranges::all_of(factors_, [](const Space& s) { return s.is_probability(); });
  if (prob) {
    // Renormalize away the rounding of the products.
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= total;
  }
  return make_space(std::move(w), prob ? SpaceKind::probability : SpaceKind::sigma_finite);
}

ProductSpace product(std::vector<Space> spaces, std::size_t guard) {
  if (spaces.empty()) raise(ErrorKind::BadAxis, "product of no spaces");
  double count = 1.0;
  for (const Space& s : spaces) count *= static_cast<double>(s.size());
  if (count > static_cast<double>(guard)) {
    raise(ErrorKind::TooLarge, "product has " + format_double(count) + " atoms");
  }
  return ProductSpace(std::move(spaces));
}

namespace {

std::size_t checked_count(const std::vector<Space>& axes, std::size_t guard) {
  double count = 1.0;
  for (const Space& s : axes) count *= static_cast<double>(s.size());
  if (count > static_cast<double>(guard)) {
    raise(ErrorKind::TooLarge, "field would hold " + format_double(count) + " elements");
  }
  return static_cast<std::size_t>(count);
}

}  // namespace

TensorField::TensorField() : values_{0.0} {}

TensorField::TensorField(std::vector<Space> axes, std::vector<double> values, std::size_t guard)
    : axes_(std::move(axes)), values_(std::move(values)) {
  const std::size_t expected = checked_count(axes_, guard);
  if (values_.size() != expected) {
    raise(ErrorKind::BadAxis, "value array has " + std::to_string(values_.size()) +
                                  " entries, axes require " + std::to_string(expected));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) raise(ErrorKind::NonFinite, "field values must be finite");
  }
}

TensorField TensorField::filled(std::vector<Space> axes, double value, std::size_t guard) {
  const std::size_t n = checked_count(axes, guard);
  return TensorField(std::move(axes), std::vector<double>(n, value), guard);
}

TensorField TensorField::scalar(double value) { return TensorField({}, {value}); }

TensorField TensorField::generate(std::vector<Space> axes,
                                  const std::function<double(std::span<const std::size_t>)>& fn,
                                  std::size_t guard) {
  const std::size_t n = checked_count(axes, guard);
  std::vector<std::size_t> shape;
  for (const Space& s : axes) shape.push_back(s.size());
  std::vector<double> values;
  values.reserve(n);
  for_each_index(shape, [&](std::span<const std::size_t> idx) { values.push_back(fn(idx)); });
  return TensorField(std::move(axes), std::move(values), guard);
}

std::vector<std::size_t> TensorField::shape() const {
  std::vector<std::size_t> s;
  s.reserve(axes_.size());
  for (const Space& a : axes_) s.push_back(a.size());
  return s;
}

std::vector<std::size_t> TensorField::strides() const {
  std::vector<std::size_t> st(axes_.size());
  std::size_t acc = 1;
  for (std::size_t k = axes_.size(); k-- > 0;) {
    st[k] = acc;
    acc *= axes_[k].size();
  }
  return st;
}

double TensorField::at(std::initializer_list<std::size_t> index) const {
  return at(std::span<const std::size_t>(index.begin(), index.size()));
}

std::size_t TensorField::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != axes_.size()) raise(ErrorKind::BadAxis, "index rank mismatch");
  std::size_t flat = 0;
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    if (index[k] >= axes_[k].size()) raise(ErrorKind::BadAxis, "index out of range");
    flat = flat * axes_[k].size() + index[k];
  }
  return flat;
}

std::vector<std::size_t> TensorField::multi_index(std::size_t flat) const {
  std::vector<std::size_t> index(axes_.size());
  for (std::size_t k = axes_.size(); k-- > 0;) {
    index[k] = flat % axes_[k].size();
    flat /= axes_[k].size();
  }
  return index;
}

double TensorField::weight(std::size_t flat) const {
  double w = 1.0;
  for (std::size_t k = axes_.size(); k-- > 0;) {
    const std::size_t n = axes_[k].size();
    w *= axes_[k].weight(flat % n);
    flat /= n;
  }
  return w;
}

TensorField TensorField::with_values(std::vector<double> values) const {
  const std::size_t guard = std::max(values.size(), kDefaultElementGuard);
  return TensorField(axes_, std::move(values), guard);
}

namespace {

void require_same_axes(const TensorField& a, const TensorField& b) {
  if (!a.same_axes(b)) raise(ErrorKind::BadAxis, "fields live on different axes");
}

}  // namespace

TensorField operator+(const TensorField& a, const TensorField& b) {
  require_same_axes(a, b);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + b[i];
  return a.with_values(std::move(v));
}

TensorField operator-(const TensorField& a, const TensorField& b) {
  require_same_axes(a, b);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] - b[i];
  return a.with_values(std::move(v));
}

TensorField operator*(double c, const TensorField& a) {
  std::vector<double> v(a.values().begin(), a.values().end());
  for (double& x : v) x *= c;
  return a.with_values(std::move(v));
}

TensorField map(const TensorField& a, const std::function<double(double)>& fn) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(a[i]);
  return a.with_values(std::move(v));
}

TensorField hadamard(const TensorField& a, const TensorField& b) {
  require_same_axes(a, b);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] * b[i];
  return a.with_values(std::move(v));
}

double max_abs(const TensorField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const TensorField& a, const TensorField& b) {
  require_same_axes(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double inner_product(const TensorField& a, const TensorField& b) {
  require_same_axes(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.weight(i) * a[i] * b[i];
  return s;
}

TensorField integrate(const TensorField& f, std::span<const std::size_t> axes) {
  std::vector<bool> drop(f.rank(), false);
  for (std::size_t a : axes) {
    if (a >= f.rank()) raise(ErrorKind::BadAxis, "axis " + std::to_string(a) + " out of range");
    if (drop[a]) raise(ErrorKind::BadAxis, "axis " + std::to_string(a) + " repeated");
    if (f.axis(a).kind() == SpaceKind::hilbert_value) {
      raise(ErrorKind::BadAxis, "cannot integrate over a hilbert_value axis");
    }
    drop[a] = true;
  }
  std::vector<Space> kept;
  for (std::size_t k = 0; k < f.rank(); ++k) {
    if (!drop[k]) kept.push_back(f.axis(k));
  }
  std::vector<std::size_t> out_stride(f.rank(), 0);
  std::size_t acc = 1;
  for (std::size_t k = f.rank(); k-- > 0;) {
    if (!drop[k]) {
      out_stride[k] = acc;
      acc *= f.axis(k).size();
    }
  }
  std::vector<double> out(acc, 0.0);
  const std::vector<std::size_t> shape = f.shape();
  std::size_t flat = 0;
  for_each_index(shape, [&](std::span<const std::size_t> idx) {
    double w = 1.0;
    std::size_t o = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (drop[k]) {
        w *= f.axis(k).weight(idx[k]);
      } else {
        o += idx[k] * out_stride[k];
      }
    }
    out[o] += w * f[flat++];
  });
  return TensorField(std::move(kept), std::move(out));
}

TensorField integrate(const TensorField& f, std::initializer_list<std::size_t> axes) {
  return integrate(f, std::span<const std::size_t>(axes.begin(), axes.size()));
}

double integrate_all(const TensorField& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f.weight(i) * f[i];
  return s;
}

TensorField transform_fibers(const TensorField& f, std::size_t axis,
                             const std::function<void(std::span<const double>, std::span<double>)>& fn) {
  if (axis >= f.rank()) raise(ErrorKind::BadAxis, "axis out of range");
  const std::size_t n = f.axis(axis).size();
  const std::size_t inner = f.strides()[axis];
  const std::size_t outer = f.size() / (n * inner);
  std::vector<double> out(f.size());
  std::vector<double> fin(n), fout(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      for (std::size_t j = 0; j < n; ++j) fin[j] = f[base + j * inner];
      fn(fin, fout);
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] = fout[j];
    }
  }
  return f.with_values(std::move(out));
}

TensorField average_along(const TensorField& f, std::size_t axis) {
  if (axis >= f.rank()) raise(ErrorKind::BadAxis, "axis out of range");
  const Space& s = f.axis(axis);
  const double mass = s.total_mass();
  return transform_fibers(f, axis, [&](std::span<const double> in, std::span<double> out) {
    double acc = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) acc += s.weight(j) * in[j];
    std::fill(out.begin(), out.end(), acc / mass);
  });
}

void for_each_index(std::span<const std::size_t> shape,
                    const std::function<void(std::span<const std::size_t>)>& fn) {
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t s : shape) {
    if (s == 0) return;
  }
  while (true) {
    fn(idx);
    std::size_t k = shape.size();
    while (k > 0) {
      --k;
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
      if (k == 0) return;
    }
    if (shape.empty()) return;
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& token) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    raise(ErrorKind::Parse, "bad number '" + token + "'");
  }
  return v;
}

std::string expect_word(std::istream& is, std::string_view word) {
  std::string tok;
  if (!(is >> tok) || tok != word) {
    raise(ErrorKind::Parse, "expected '" + std::string(word) + "', got '" + tok + "'");
  }
  return tok;
}

std::size_t read_count(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) raise(ErrorKind::Parse, "unexpected end of field data");
  std::size_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    raise(ErrorKind::Parse, "bad count '" + tok + "'");
  }
  return v;
}

}  // namespace

void write_field(std::ostream& os, const TensorField& f) {
  os << "ustat-field 1\n";
  os << "rank " << f.rank() << '\n';
  for (const Space& s : f.axes()) {
    os << "axis " << to_string(s.kind()) << ' ' << s.size();
    for (double w : s.weights()) os << ' ' << format_double(w);
    os << '\n';
    os << "blocks " << s.block_offsets().size();
    for (std::size_t b : s.block_offsets()) os << ' ' << b;
    os << '\n';
  }
  os << "values " << f.size() << '\n';
  for (std::size_t i = 0; i < f.size(); ++i) {
    os << format_double(f[i]) << ((i + 1) % 8 == 0 || i + 1 == f.size() ? '\n' : ' ');
  }
}

TensorField read_field(std::istream& is) {
  expect_word(is, "ustat-field");
  if (read_count(is) != 1) raise(ErrorKind::Parse, "unsupported field format version");
  expect_word(is, "rank");
  const std::size_t rank = read_count(is);
  std::vector<Space> axes;
  for (std::size_t k = 0; k < rank; ++k) {
    expect_word(is, "axis");
    std::string kind;
    is >> kind;
    const std::size_t n = read_count(is);
    std::vector<double> w(n);
    std::string tok;
    for (auto& x : w) {
      is >> tok;
      x = parse_double(tok);
    }
    expect_word(is, "blocks");
    const std::size_t nb = read_count(is);
    std::vector<std::size_t> offsets(nb);
    for (auto& o : offsets) o = read_count(is);
    if (nb == 0) {
      axes.push_back(make_space(std::move(w), space_kind_from_string(kind)));
    } else {
      std::vector<Space> blocks;
      for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t lo = offsets[b];
        const std::size_t hi = b + 1 < nb ? offsets[b + 1] : n;
        if (lo >= hi || hi > n) raise(ErrorKind::Parse, "bad block offsets");
        blocks.push_back(make_space(std::vector<double>(w.begin() + lo, w.begin() + hi),
                                    SpaceKind::sigma_finite));
      }
      Space u = disjoint_union(blocks);
      if (!std::ranges::equal(u.weights(), w)) raise(ErrorKind::Parse, "block weights mismatch");
      axes.push_back(std::move(u));
    }
  }
  expect_word(is, "values");
  const std::size_t count = read_count(is);
  std::vector<double> values(count);
  std::string tok;
  for (auto& v : values) {
    if (!(is >> tok)) raise(ErrorKind::Parse, "truncated value list");
    v = parse_double(tok);
  }
  return TensorField(std::move(axes), std::move(values));
}

std::string serialize(const TensorField& f) {
  std::ostringstream os;
  write_field(os, f);
  return os.str();
}

TensorField deserialize(const std::string& text) {
  std::istringstream is(text);
  return read_field(is);
}

}  // namespace ustat
