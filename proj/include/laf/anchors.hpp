#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace laf {

/// Built-in anchor spaces. `char` counts code points of the UTF-8 decoded
/// primary text, `byte` counts raw storage bytes, `time-ms` milliseconds,
/// `pixel` is the one two-dimensional space. New spaces are a declared
/// extension point: unknown names are rejected, never silently accepted.
enum class SpaceKind { Char, Byte, TimeMs, Pixel };

struct AnchorSpace {
  SpaceKind kind = SpaceKind::Char;

  std::string_view name() const;
  int dimension() const;  // 1 for char/byte/time-ms, 2 for pixel
  std::string_view unit() const;

  static std::optional<AnchorSpace> by_name(std::string_view name);

  friend bool operator==(const AnchorSpace&, const AnchorSpace&) = default;
};

/// Declaration of one primary data resource. Annotations never embed the
/// resource; they reference it through regions over this declaration.
struct PrimaryDataRef {
  std::string pid;
  std::string uri;
  AnchorSpace space;
  std::vector<std::uint64_t> extent;  // one bound per axis
  std::string content_hash;           // sha256, 64 lowercase hex digits

  friend bool operator==(const PrimaryDataRef&, const PrimaryDataRef&) = default;
};

/// Half-open extent on one axis; start == end is a landmark (point).
struct Span {
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  friend auto operator<=>(const Span&, const Span&) = default;
};

/// One axis-aligned box: exactly dimension-many spans.
using Box = std::vector<Span>;

/// An n-dimensional, possibly discontinuous extent within one primary
/// resource. Boxes are kept sorted by their flattened coordinate tuple with
/// no duplicates; two or more boxes encode a discontinuous segment.
struct Region {
  std::string rid;
  std::string pid;
  std::vector<Box> boxes;

  bool is_point() const;  // every span of every box has start == end

  friend bool operator==(const Region&, const Region&) = default;
};

/// Builds a region from a flat (start, end, start, end, ...) coordinate
/// sequence, axis-major within each box. Sorts and deduplicates boxes.
/// When `extent` is given it must bound every coordinate.
Region make_region(std::string rid, std::string pid, const AnchorSpace& space,
                   std::span<const std::int64_t> coords,
                   const std::vector<std::uint64_t>* extent = nullptr);

/// Flattened (s, e, s, e, ...) coordinates of all boxes in stored order.
std::vector<std::uint64_t> region_coords(const Region& r);

/// Total order over regions of one primary: by lexicographically smallest
/// start corner, then largest end corner, then the full coordinate
/// sequence. Throws CrossDocumentComparison when pids differ.
std::strong_ordering region_cmp(const Region& a, const Region& b);

enum class Relation { Disjoint, Overlaps, Contains, ContainedBy, Equal };

/// Exact set of relations between the covered point sets of two regions of
/// one primary. A landmark covers the single point at its coordinates;
/// spans are end-exclusive. `Contains` means every point of b lies in a.
std::set<Relation> region_relate(const Region& a, const Region& b);

/// Union of boxes normalized for footprints: duplicate boxes collapse,
/// contained boxes are absorbed, and boxes differing on exactly one axis
/// whose spans overlap or touch are merged. Landmarks survive unless they
/// lie strictly inside another box.
std::vector<Box> coalesce_boxes(std::vector<Box> boxes);

}  // namespace laf
