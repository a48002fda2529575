#pragma once

// Patch batches, storage layouts and the enumerators that map
// (patch, cell, unknown) to linear storage offsets.
//
// Cells are addressed in patch-local coordinates. Haloed arrays cover
// [-1, p]^d, interior arrays [0, p)^d. Coordinate 0 runs fastest.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fvk {

enum class Layout : std::int32_t { AoS = 0, SoA = 1, AoSoA = 2 };

inline constexpr std::array<Layout, 3> allLayouts{Layout::AoS, Layout::SoA, Layout::AoSoA};

[[nodiscard]] inline std::string_view toString(Layout layout) {
  switch (layout) {
    case Layout::AoS: return "aos";
    case Layout::SoA: return "soa";
    case Layout::AoSoA: return "aosoa";
  }
  return "?";
}

[[nodiscard]] inline Layout parseLayout(std::string_view name) {
  for (Layout l : allLayouts) {
    if (toString(l) == name) return l;
  }
  throw std::invalid_argument("unknown layout '" + std::string(name) + "'");
}

[[nodiscard]] constexpr std::size_t ipow(std::size_t base, int exponent) {
  std::size_t result = 1;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

struct BatchShape {
  int dim = 2;
  int p = 4;
  int patches = 1;

  [[nodiscard]] int unknowns() const { return dim + 2; }
  [[nodiscard]] std::size_t haloedVolumesPerPatch() const { return ipow(p + 2, dim); }
  [[nodiscard]] std::size_t interiorVolumesPerPatch() const { return ipow(p, dim); }
  [[nodiscard]] std::size_t inputSize() const {
    return static_cast<std::size_t>(unknowns()) * haloedVolumesPerPatch() * patches;
  }
  [[nodiscard]] std::size_t outputSize() const {
    return static_cast<std::size_t>(unknowns()) * interiorVolumesPerPatch() * patches;
  }

  void validate() const {
    if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
    if (p < 2) throw std::invalid_argument("patch size must be at least 2");
    if (patches < 1) throw std::invalid_argument("patch count must be at least 1");
  }

  friend bool operator==(const BatchShape&, const BatchShape&) = default;
};

template <int Dim>
using Cell = std::array<int, Dim>;

template <int Dim>
struct VolumeIndex {
  int patch = 0;
  Cell<Dim> cell{};
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Maps (patch, cell, unknown) to an offset in [0, size()).
///
/// With m the cells per axis (p+2 haloed, p interior) and lin(c) the
/// coordinate-0-fastest linearisation of the shifted cell:
///   AoS   ((patch*m^d) + lin) * N + unknown
///   SoA   unknown*T*m^d + patch*m^d + lin
///   AoSoA patch*N*m^d + unknown*m^d + lin
template <int Dim>
class Enumerator {
 public:
  Enumerator() = default;

  Enumerator(Layout layout, const BatchShape& shape, bool haloed, int unknowns)
      : layout_(layout),
        patches_(shape.patches),
        unknowns_(unknowns),
        p_(shape.p),
        halo_(haloed ? 1 : 0),
        extent_(shape.p + (haloed ? 2 : 0)),
        cellsPerPatch_(ipow(extent_, Dim)) {
    if (shape.dim != Dim) {
      throw std::invalid_argument("enumerator dimension does not match batch shape");
    }
  }

  Enumerator(Layout layout, const BatchShape& shape, bool haloed)
      : Enumerator(layout, shape, haloed, shape.unknowns()) {}

  [[nodiscard]] std::size_t linearCell(const Cell<Dim>& c) const noexcept {
    std::size_t lin = 0;
    for (int k = Dim - 1; k >= 0; --k) {
      lin = lin * extent_ + static_cast<std::size_t>(c[k] + halo_);
    }
    return lin;
  }

  [[nodiscard]] std::size_t operator()(int patch, const Cell<Dim>& c, int unknown) const noexcept {
    const std::size_t lin = linearCell(c);
    const auto patchIdx = static_cast<std::size_t>(patch);
    const auto u = static_cast<std::size_t>(unknown);
    switch (layout_) {
      case Layout::AoS:
        return (patchIdx * cellsPerPatch_ + lin) * unknowns_ + u;
      case Layout::SoA:
        return u * patches_ * cellsPerPatch_ + patchIdx * cellsPerPatch_ + lin;
      case Layout::AoSoA:
        return patchIdx * unknowns_ * cellsPerPatch_ + u * cellsPerPatch_ + lin;
    }
    return 0;
  }

  /// Bounds-checked variant used in verify mode.
  [[nodiscard]] std::size_t checked(int patch, const Cell<Dim>& c, int unknown) const {
    if (patch < 0 || patch >= static_cast<int>(patches_)) {
      throw IndexError("patch index " + std::to_string(patch) + " out of range");
    }
    if (unknown < 0 || unknown >= static_cast<int>(unknowns_)) {
      throw IndexError("unknown index " + std::to_string(unknown) + " out of range");
    }
    for (int k = 0; k < Dim; ++k) {
      if (c[k] < -halo_ || c[k] >= p_ + halo_) {
        throw IndexError("cell coordinate " + std::to_string(c[k]) + " along axis " +
                         std::to_string(k) + " out of range");
      }
    }
    return (*this)(patch, c, unknown);
  }

  [[nodiscard]] std::size_t size() const noexcept {
    return patches_ * unknowns_ * cellsPerPatch_;
  }
  [[nodiscard]] std::size_t cellsPerPatch() const noexcept { return cellsPerPatch_; }
  [[nodiscard]] int extent() const noexcept { return static_cast<int>(extent_); }
  [[nodiscard]] int haloWidth() const noexcept { return halo_; }
  [[nodiscard]] Layout layout() const noexcept { return layout_; }

 private:
  Layout layout_ = Layout::AoS;
  std::size_t patches_ = 0;
  std::size_t unknowns_ = 0;
  int p_ = 0;
  int halo_ = 0;
  std::size_t extent_ = 0;
  std::size_t cellsPerPatch_ = 0;
};

/// Runtime-dimension entry point; always bounds-checked.
[[nodiscard]] inline std::size_t enumerate(Layout layout, const BatchShape& shape, bool haloed,
                                           int patch, std::span<const int> cell, int unknown) {
  if (static_cast<int>(cell.size()) != shape.dim) {
    throw IndexError("cell has " + std::to_string(cell.size()) + " coordinates, expected " +
                     std::to_string(shape.dim));
  }
  if (shape.dim == 2) {
    return Enumerator<2>(layout, shape, haloed).checked(patch, {cell[0], cell[1]}, unknown);
  }
  if (shape.dim == 3) {
    return Enumerator<3>(layout, shape, haloed).checked(patch, {cell[0], cell[1], cell[2]}, unknown);
  }
  throw std::invalid_argument("dimension must be 2 or 3");
}

// ---------------------------------------------------------------------------
// Iteration-space flattening onto at most three range axes. Axis 2 is the
// fastest-running range axis and carries cell coordinate 0, so that lanes
// adjacent in the range address adjacent cells under every layout.
// ---------------------------------------------------------------------------

using RangeIndex = std::array<std::size_t, 3>;

template <int Dim>
class IterationSpace {
 public:
  IterationSpace(const BatchShape& shape, bool haloed)
      : patches_(static_cast<std::size_t>(shape.patches)),
        halo_(haloed ? 1 : 0),
        extent_(static_cast<std::size_t>(shape.p + (haloed ? 2 : 0))) {
    static_assert(Dim == 2 || Dim == 3);
  }

  [[nodiscard]] RangeIndex extents() const noexcept {
    if constexpr (Dim == 2) {
      return {patches_, extent_, extent_};
    } else {
      return {patches_ * extent_, extent_, extent_};
    }
  }

  [[nodiscard]] std::size_t size() const noexcept {
    const auto e = extents();
    return e[0] * e[1] * e[2];
  }

  [[nodiscard]] RangeIndex pack(int patch, const Cell<Dim>& c) const noexcept {
    const auto shifted = [&](int k) { return static_cast<std::size_t>(c[k] + halo_); };
    if constexpr (Dim == 2) {
      return {static_cast<std::size_t>(patch), shifted(1), shifted(0)};
    } else {
      return {static_cast<std::size_t>(patch) * extent_ + shifted(2), shifted(1), shifted(0)};
    }
  }

  [[nodiscard]] VolumeIndex<Dim> unpack(const RangeIndex& r) const noexcept {
    VolumeIndex<Dim> v;
    v.cell[0] = static_cast<int>(r[2]) - halo_;
    v.cell[1] = static_cast<int>(r[1]) - halo_;
    if constexpr (Dim == 2) {
      v.patch = static_cast<int>(r[0]);
    } else {
      v.patch = static_cast<int>(r[0] / extent_);
      v.cell[2] = static_cast<int>(r[0] % extent_) - halo_;
    }
    return v;
  }

  [[nodiscard]] std::size_t linear(const RangeIndex& r) const noexcept {
    const auto e = extents();
    return (r[0] * e[1] + r[1]) * e[2] + r[2];
  }

  [[nodiscard]] RangeIndex delinearize(std::size_t flat) const noexcept {
    const auto e = extents();
    RangeIndex r;
    r[2] = flat % e[2];
    flat /= e[2];
    r[1] = flat % e[1];
    r[0] = flat / e[1];
    return r;
  }

 private:
  std::size_t patches_;
  int halo_;
  std::size_t extent_;
};

// ---------------------------------------------------------------------------
// Field views. Both flavours expose operator()(patch, cell, unknown) so the
// microkernels never see where the data lives.
// ---------------------------------------------------------------------------

/// Contiguous batch array addressed through an enumerator.
template <int Dim, class T = double>
class BatchField {
 public:
  BatchField() = default;
  BatchField(std::span<T> data, const Enumerator<Dim>& enumerator)
      : data_(data.data()), enumerator_(enumerator) {
    if (data.size() != enumerator.size()) {
      throw std::invalid_argument("field storage has " + std::to_string(data.size()) +
                                  " entries, enumerator expects " +
                                  std::to_string(enumerator.size()));
    }
  }

  [[nodiscard]] T& operator()(int patch, const Cell<Dim>& c, int unknown) const noexcept {
    return data_[enumerator_(patch, c, unknown)];
  }

  [[nodiscard]] const Enumerator<Dim>& enumerator() const noexcept { return enumerator_; }

 private:
  T* data_ = nullptr;
  Enumerator<Dim> enumerator_;
};

/// Per-patch allocations reached through a pointer table; each patch is AoS.
template <int Dim, class T = double>
class ScatteredField {
 public:
  ScatteredField(std::span<T* const> patchPointers, const BatchShape& shape, bool haloed)
      : patches_(patchPointers.data()),
        local_(Layout::AoS, BatchShape{shape.dim, shape.p, 1}, haloed) {
    if (static_cast<int>(patchPointers.size()) != shape.patches) {
      throw std::invalid_argument("pointer table size does not match patch count");
    }
  }

  [[nodiscard]] T& operator()(int patch, const Cell<Dim>& c, int unknown) const noexcept {
    return patches_[patch][local_(0, c, unknown)];
  }

 private:
  T* const* patches_;
  Enumerator<Dim> local_;
};

template <int Dim, class Field>
[[nodiscard]] inline std::array<double, Dim + 2> loadState(const Field& field, int patch,
                                                           const Cell<Dim>& c) {
  std::array<double, Dim + 2> q;
  for (int k = 0; k < Dim + 2; ++k) q[k] = field(patch, c, k);
  return q;
}

/// Non-owning view of a batch's input (haloed) and output (interior) arrays.
struct PatchBatch {
  BatchShape shape;
  Layout layout = Layout::AoS;
  std::span<double> input;
  std::span<double> output;

  void validate() const {
    shape.validate();
    if (input.size() != shape.inputSize() || output.size() != shape.outputSize()) {
      throw std::invalid_argument("batch arrays do not match shape");
    }
  }

  template <int Dim>
  [[nodiscard]] BatchField<Dim, const double> inputField() const {
    return {std::span<const double>(input), Enumerator<Dim>(layout, shape, true)};
  }
  template <int Dim>
  [[nodiscard]] BatchField<Dim> outputField() const {
    return {output, Enumerator<Dim>(layout, shape, false)};
  }
};

/// Owning storage for a batch.
class BatchStorage {
 public:
  BatchStorage(const BatchShape& shape, Layout layout)
      : shape_(shape), layout_(layout), input_(shape.inputSize()), output_(shape.outputSize()) {
    shape.validate();
  }

  [[nodiscard]] PatchBatch view() { return {shape_, layout_, input_, output_}; }
  [[nodiscard]] std::vector<double>& input() { return input_; }
  [[nodiscard]] std::vector<double>& output() { return output_; }
  [[nodiscard]] const std::vector<double>& input() const { return input_; }
  [[nodiscard]] const std::vector<double>& output() const { return output_; }
  [[nodiscard]] const BatchShape& shape() const { return shape_; }
  [[nodiscard]] Layout layout() const { return layout_; }

 private:
  BatchShape shape_;
  Layout layout_;
  std::vector<double> input_;
  std::vector<double> output_;
};

// ---------------------------------------------------------------------------
// Field dump: header of five little-endian int32 (d, p, N, T, layout tag)
// followed by the raw float64 values, little-endian.
// ---------------------------------------------------------------------------

struct FieldDump {
  BatchShape shape;
  Layout layout = Layout::AoS;
  std::vector<double> values;
};

namespace detail {

template <class U>
void writeLittleEndian(std::ostream& os, U value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(bytes[i], bytes[sizeof(U) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <class U>
U readLittleEndian(std::istream& is) {
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw std::runtime_error("truncated field dump");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(bytes[i], bytes[sizeof(U) - 1 - i]);
  }
  U value;
  std::memcpy(&value, bytes, sizeof(U));
  return value;
}

}  // namespace detail

inline void writeFieldDump(std::ostream& os, const BatchShape& shape, Layout layout,
                           std::span<const double> values) {
  detail::writeLittleEndian<std::int32_t>(os, shape.dim);
  detail::writeLittleEndian<std::int32_t>(os, shape.p);
  detail::writeLittleEndian<std::int32_t>(os, shape.unknowns());
  detail::writeLittleEndian<std::int32_t>(os, shape.patches);
  detail::writeLittleEndian<std::int32_t>(os, static_cast<std::int32_t>(layout));
  for (double v : values) detail::writeLittleEndian<double>(os, v);
  if (!os) throw std::runtime_error("failed to write field dump");
}

/// Reads a dump; the value count must match either the haloed or the interior size.
inline FieldDump readFieldDump(std::istream& is) {
  FieldDump dump;
  dump.shape.dim = detail::readLittleEndian<std::int32_t>(is);
  dump.shape.p = detail::readLittleEndian<std::int32_t>(is);
  const auto unknowns = detail::readLittleEndian<std::int32_t>(is);
  dump.shape.patches = detail::readLittleEndian<std::int32_t>(is);
  const auto tag = detail::readLittleEndian<std::int32_t>(is);
  dump.shape.validate();
  if (unknowns != dump.shape.unknowns()) throw std::runtime_error("unknown count mismatch in dump");
  if (tag < 0 || tag > 2) throw std::runtime_error("invalid layout tag in dump");
  dump.layout = static_cast<Layout>(tag);

  double v;
  while (is.peek() != std::char_traits<char>::eof()) {
    v = detail::readLittleEndian<double>(is);
    dump.values.push_back(v);
  }
  if (dump.values.size() != dump.shape.inputSize() && dump.values.size() != dump.shape.outputSize()) {
    throw std::runtime_error("field dump holds " + std::to_string(dump.values.size()) +
                             " values, which matches neither haloed nor interior size");
  }
  return dump;
}

}  // namespace fvk
