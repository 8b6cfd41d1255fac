#pragma once

// Conditional expectations and the Hoeffding (ANOVA) decomposition of
// functions on a finite product space Omega^n, together with the kernel
// families that represent generalized U-statistics.
//
// Coordinates are 0-based throughout: a field on Omega^n has coordinate
// axes 0..n-1, optionally followed by one hilbert_value axis which every
// operation here leaves untouched.

#include <bit>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <utility>
#include <vector>

#include "ustat/spaces.hpp"

namespace ustat {

/// Subset of coordinate positions, stored as a bitmask (at most 32 coordinates).
class CoordSet {
 public:
  constexpr CoordSet() = default;
  constexpr explicit CoordSet(std::uint32_t bits) : bits_(bits) {}

  static CoordSet of(std::initializer_list<std::size_t> coords);
  static CoordSet of(const std::vector<std::size_t>& coords);
  static constexpr CoordSet full(std::size_t n) {
    return CoordSet(n >= 32 ? ~std::uint32_t{0} : ((std::uint32_t{1} << n) - 1));
  }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool contains(std::size_t j) const { return (bits_ >> j) & 1U; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool subset_of(CoordSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr CoordSet with(std::size_t j) const { return CoordSet(bits_ | (std::uint32_t{1} << j)); }
  std::vector<std::size_t> elements() const;

  friend constexpr bool operator==(CoordSet, CoordSet) = default;
  friend constexpr auto operator<=>(CoordSet a, CoordSet b) { return a.bits_ <=> b.bits_; }
  friend constexpr CoordSet operator|(CoordSet a, CoordSet b) { return CoordSet(a.bits_ | b.bits_); }
  friend constexpr CoordSet operator&(CoordSet a, CoordSet b) { return CoordSet(a.bits_ & b.bits_); }

 private:
  std::uint32_t bits_ = 0;
};

/// Shape of a field on Omega^n (+ optional value axis).
struct ProductLayout {
  Space base;
  std::size_t n = 0;
  std::optional<Space> value;
};

/// Validates the layout: all coordinate axes are the same probability space
/// (NotProbability / BadAxis otherwise).
ProductLayout product_layout(const TensorField& f);

/// Field on Omega^n (+ value axis) with the given layout.
std::vector<Space> product_axes(const Space& base, std::size_t n,
                                const std::optional<Space>& value = std::nullopt);

/// E_A f, returned on the same axis list (constant along coordinates outside A).
TensorField cond_expect(const TensorField& f, CoordSet a);

/// P_A f = (id - E)^{A} (x) E^{complement of A}, applied axis by axis.
TensorField hoeffding_project(const TensorField& f, CoordSet a);

/// P_m f = sum of P_B f over |B| = m. Throws BadLevel if m > n.
TensorField hoeffding_level(const TensorField& f, std::size_t m);

/// Sum of the levels 0..m, i.e. the orthogonal projection onto V_{<=m}.
TensorField hoeffding_up_to(const TensorField& f, std::size_t m);

inline constexpr std::size_t kMaxDecomposeCoordinates = 16;

/// All 2^n components P_B f, indexed by B.bits(). Throws TooLarge for n > 16.
std::vector<TensorField> hoeffding_decompose(const TensorField& f);

struct Kernel {
  std::vector<std::size_t> index;
  TensorField field;
};

enum class TupleOrder { strictly_increasing, arbitrary };

/// Indexed family {f_i} of m-variable kernels on Omega^m (+ optional value
/// axis), i ranging over tuples in [0,n)^m. Kernels are kept sorted by index.
class KernelFamily {
 public:
  KernelFamily(std::size_t m, std::size_t n, Space base, std::optional<Space> value,
               std::vector<Kernel> kernels, TupleOrder order = TupleOrder::strictly_increasing);

  std::size_t arity() const { return m_; }
  std::size_t coordinates() const { return n_; }
  const Space& base() const { return base_; }
  const std::optional<Space>& value_space() const { return value_; }
  const std::vector<Kernel>& kernels() const { return kernels_; }
  TupleOrder order() const { return order_; }

  /// Axes every kernel lives on.
  std::vector<Space> kernel_axes() const;

  /// Kernel with the given index, or nullptr.
  const TensorField* find(const std::vector<std::size_t>& index) const;

  KernelFamily map(const std::function<double(double)>& fn) const;

 private:
  std::size_t m_;
  std::size_t n_;
  Space base_;
  std::optional<Space> value_;
  std::vector<Kernel> kernels_;
  TupleOrder order_;
};

/// Kernels of the level-m Hoeffding component: for each increasing tuple i,
/// P_i f restricted to the coordinates in i. Each kernel is mean zero in every
/// variable. m = 0 yields the single scalar kernel E f.
KernelFamily extract_kernels(const TensorField& f, std::size_t m);

/// Coupled: field on Omega^n with value sum_i f_i(x_{i_1},...,x_{i_m}).
/// Decoupled: field on (Omega^n)^m, copy-major axis order
/// (x^(1)_0..x^(1)_{n-1}, x^(2)_0, ...), value sum_i f_i(x^(1)_{i_1},...,x^(m)_{i_m}).
TensorField assemble_ustat(const KernelFamily& k, bool decoupled,
                           std::size_t guard = kDefaultElementGuard);

/// The family as one function on (disjoint union of n copies of Omega)^m:
/// the entry at ((i_1,x_1),...,(i_m,x_m)) is f_{i_1..i_m}(x_1,...,x_m), zero
/// for absent tuples.
TensorField to_family_field(const KernelFamily& k);

/// Inverse of to_family_field; produces all n^m tuples (TupleOrder::arbitrary).
KernelFamily family_from_field(const TensorField& fbar, const Space& base);

/// Layout of a family field: m axes, each a disjoint union of n copies of a
/// probability space `base`. Throws BadAxis otherwise.
struct FamilyLayout {
  Space base;
  std::size_t n = 0;
  std::size_t m = 0;
};
FamilyLayout family_layout(const TensorField& fbar);

}  // namespace ustat
