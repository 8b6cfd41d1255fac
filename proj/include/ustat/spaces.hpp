#pragma once

// Finite measure spaces and dense real-valued functions on products of them.
//
// A TensorField stores its values row-major (last axis fastest) over the
// Cartesian product of its axes. Integration against the product of the axis
// weights is exact: every integral in this library is a finite weighted sum.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ustat {

inline constexpr std::size_t kDefaultElementGuard = std::size_t{1} << 24;

enum class SpaceKind { probability, sigma_finite, hilbert_value };

std::string_view to_string(SpaceKind kind);
SpaceKind space_kind_from_string(std::string_view name);

/// Atoms 0..size()-1 with strictly positive masses. Immutable; copies share
/// storage.
class Space {
 public:
  /// One atom of mass 1, probability kind.
  Space();

  std::size_t size() const { return impl_->weights.size(); }
  double weight(std::size_t atom) const { return impl_->weights[atom]; }
  std::span<const double> weights() const { return impl_->weights; }
  SpaceKind kind() const { return impl_->kind; }
  double total_mass() const { return impl_->total; }
  bool is_probability() const { return kind() == SpaceKind::probability; }

  /// Start offsets of the constituent blocks when this space was built by
  /// disjoint_union; empty otherwise.
  std::span<const std::size_t> block_offsets() const { return impl_->blocks; }
  std::size_t block_count() const { return impl_->blocks.empty() ? 1 : impl_->blocks.size(); }

  friend bool operator==(const Space& a, const Space& b);

 private:
  struct Impl {
    std::vector<double> weights;
    SpaceKind kind = SpaceKind::probability;
    double total = 1.0;
    std::vector<std::size_t> blocks;
  };
  explicit Space(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<const Impl> impl_;

  friend Space make_space(std::vector<double> weights, SpaceKind kind);
  friend Space disjoint_union(std::span<const Space> spaces);
};

/// Throws InvalidMeasure on a nonpositive (or non-finite) weight, and
/// NotProbability when a probability space does not sum to 1 within 1e-12.
Space make_space(std::vector<double> weights, SpaceKind kind);

Space uniform_space(std::size_t atoms);
Space counting_space(std::size_t atoms);
Space value_axis(std::size_t dim);

/// Concatenation of the atoms; masses add. The result is sigma_finite.
Space disjoint_union(std::span<const Space> spaces);
Space disjoint_union_copies(const Space& space, std::size_t copies);

/// Cartesian product descriptor. The weight of a tuple is the product of its
/// component weights.
class ProductSpace {
 public:
  explicit ProductSpace(std::vector<Space> factors);

  const std::vector<Space>& factors() const { return factors_; }
  std::size_t atom_count() const { return atom_count_; }
  double weight(std::size_t flat) const;
  std::vector<std::size_t> unflatten(std::size_t flat) const;

  /// The product as a single Space (probability iff every factor is).
  Space to_space() const;

 private:
  std::vector<Space> factors_;
  std::size_t atom_count_ = 1;
};

/// Throws TooLarge if the atom count exceeds `guard`.
ProductSpace product(std::vector<Space> spaces, std::size_t guard = kDefaultElementGuard);

class TensorField {
 public:
  /// Scalar field with value 0.
  TensorField();
  TensorField(std::vector<Space> axes, std::vector<double> values,
              std::size_t guard = kDefaultElementGuard);

  static TensorField filled(std::vector<Space> axes, double value,
                            std::size_t guard = kDefaultElementGuard);
  static TensorField scalar(double value);
  static TensorField generate(std::vector<Space> axes,
                              const std::function<double(std::span<const std::size_t>)>& fn,
                              std::size_t guard = kDefaultElementGuard);

  std::size_t rank() const { return axes_.size(); }
  const std::vector<Space>& axes() const { return axes_; }
  const Space& axis(std::size_t k) const { return axes_.at(k); }
  std::vector<std::size_t> shape() const;
  std::vector<std::size_t> strides() const;
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t flat) const { return values_[flat]; }
  double at(std::span<const std::size_t> index) const { return values_[flat_index(index)]; }
  double at(std::initializer_list<std::size_t> index) const;
  std::size_t flat_index(std::span<const std::size_t> index) const;
  std::vector<std::size_t> multi_index(std::size_t flat) const;

  /// Product of the axis weights at a flat position.
  double weight(std::size_t flat) const;

  bool same_axes(const TensorField& other) const { return axes_ == other.axes_; }

  /// Replaces the value array; the shape must not change.
  TensorField with_values(std::vector<double> values) const;

 private:
  std::vector<Space> axes_;
  std::vector<double> values_;
};

TensorField operator+(const TensorField& a, const TensorField& b);
TensorField operator-(const TensorField& a, const TensorField& b);
TensorField operator*(double c, const TensorField& a);
TensorField map(const TensorField& a, const std::function<double(double)>& fn);
TensorField hadamard(const TensorField& a, const TensorField& b);

double max_abs(const TensorField& f);
double max_abs_diff(const TensorField& a, const TensorField& b);

/// Sum of a*b weighted by the product measure.
double inner_product(const TensorField& a, const TensorField& b);

/// Integrates out the given axes; the remaining axes keep their order.
/// Throws BadAxis on an unknown or repeated axis, or a hilbert_value axis.
TensorField integrate(const TensorField& f, std::span<const std::size_t> axes);
TensorField integrate(const TensorField& f, std::initializer_list<std::size_t> axes);
double integrate_all(const TensorField& f);

/// Replaces f by its weighted average along `axis` (the weights normalized by
/// the axis mass), broadcast back so the axis list is unchanged.
TensorField average_along(const TensorField& f, std::size_t axis);

/// Fields over the same shape but one axis replaced (used to apply
/// per-axis linear maps). Calls fn(fiber_in, fiber_out) for every fiber.
TensorField transform_fibers(const TensorField& f, std::size_t axis,
                             const std::function<void(std::span<const double>, std::span<double>)>& fn);

/// Visits every multi-index of `shape` in row-major order.
void for_each_index(std::span<const std::size_t> shape,
                    const std::function<void(std::span<const std::size_t>)>& fn);

/// Text format: a header with the axis metadata (kind, atom count, weights,
/// block offsets) followed by the row-major values. Doubles are printed in
/// shortest round-trip form, so write/read is exact.
void write_field(std::ostream& os, const TensorField& f);
TensorField read_field(std::istream& is);
std::string serialize(const TensorField& f);
TensorField deserialize(const std::string& text);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace ustat
