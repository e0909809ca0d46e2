#include "laf/anchors.hpp"

#include <algorithm>

#include "laf/errors.hpp"
#include "laf/util.hpp"

namespace laf {

std::string_view AnchorSpace::name() const {
  switch (kind) {
    case SpaceKind::Char: return "char";
    case SpaceKind::Byte: return "byte";
    case SpaceKind::TimeMs: return "time-ms";
    case SpaceKind::Pixel: return "pixel";
  }
  return "char";
}

int AnchorSpace::dimension() const {
  return kind == SpaceKind::Pixel ? 2 : 1;
}

std::string_view AnchorSpace::unit() const {
  switch (kind) {
    case SpaceKind::Char: return "code point offset of the decoded text";
    case SpaceKind::Byte: return "byte offset of the stored resource";
    case SpaceKind::TimeMs: return "milliseconds from resource start";
    case SpaceKind::Pixel: return "pixel offset, x then y";
  }
  return "";
}

std::optional<AnchorSpace> AnchorSpace::by_name(std::string_view name) {
  if (name == "char") return AnchorSpace{SpaceKind::Char};
  if (name == "byte") return AnchorSpace{SpaceKind::Byte};
  if (name == "time-ms") return AnchorSpace{SpaceKind::TimeMs};
  if (name == "pixel") return AnchorSpace{SpaceKind::Pixel};
  return std::nullopt;
}

bool Region::is_point() const {
  for (const Box& box : boxes) {
    for (const Span& s : box) {
      if (s.start != s.end) return false;
    }
  }
  return true;
}

namespace {

std::vector<std::uint64_t> flatten(const Box& box) {
  std::vector<std::uint64_t> out;
  out.reserve(box.size() * 2);
  for (const Span& s : box) {
    out.push_back(s.start);
    out.push_back(s.end);
  }
  return out;
}

bool box_less(const Box& a, const Box& b) { return flatten(a) < flatten(b); }

}  // namespace

Region make_region(std::string rid, std::string pid, const AnchorSpace& space,
                   std::span<const std::int64_t> coords,
                   const std::vector<std::uint64_t>* extent) {
  const std::size_t per_box = 2 * static_cast<std::size_t>(space.dimension());
  if (coords.empty() || coords.size() % per_box != 0) {
    throw Error(Errc::wrong_arity,
                "coordinate count " + std::to_string(coords.size()) +
                    " is not a positive multiple of " + std::to_string(per_box));
  }
  for (std::int64_t c : coords) {
    if (c < 0) {
      throw Error(Errc::negative_coordinate,
                  "negative coordinate " + std::to_string(c));
    }
  }
  Region r;
  r.rid = std::move(rid);
  r.pid = std::move(pid);
  for (std::size_t i = 0; i < coords.size(); i += per_box) {
    Box box;
    for (int axis = 0; axis < space.dimension(); ++axis) {
      auto start = static_cast<std::uint64_t>(coords[i + 2 * axis]);
      auto end = static_cast<std::uint64_t>(coords[i + 2 * axis + 1]);
      if (start > end) {
        throw Error(Errc::start_after_end,
                    "start " + std::to_string(start) + " after end " +
                        std::to_string(end));
      }
      if (extent && end > (*extent)[static_cast<std::size_t>(axis)]) {
        throw Error(Errc::out_of_extent,
                    "coordinate " + std::to_string(end) + " exceeds extent " +
                        std::to_string((*extent)[static_cast<std::size_t>(axis)]) +
                        " on axis " + std::to_string(axis));
      }
      box.push_back(Span{start, end});
    }
    r.boxes.push_back(std::move(box));
  }
  std::sort(r.boxes.begin(), r.boxes.end(), box_less);
  r.boxes.erase(std::unique(r.boxes.begin(), r.boxes.end()), r.boxes.end());
  return r;
}

std::vector<std::uint64_t> region_coords(const Region& r) {
  std::vector<std::uint64_t> out;
  for (const Box& box : r.boxes) {
    for (const Span& s : box) {
      out.push_back(s.start);
      out.push_back(s.end);
    }
  }
  return out;
}

namespace {

std::vector<std::uint64_t> min_start_corner(const Region& r) {
  std::vector<std::uint64_t> best;
  for (const Box& box : r.boxes) {
    std::vector<std::uint64_t> corner;
    for (const Span& s : box) corner.push_back(s.start);
    if (best.empty() || corner < best) best = std::move(corner);
  }
  return best;
}

std::vector<std::uint64_t> max_end_corner(const Region& r) {
  std::vector<std::uint64_t> best;
  for (const Box& box : r.boxes) {
    std::vector<std::uint64_t> corner;
    for (const Span& s : box) corner.push_back(s.end);
    if (best.empty() || corner > best) best = std::move(corner);
  }
  return best;
}

}  // namespace

std::strong_ordering region_cmp(const Region& a, const Region& b) {
  if (a.pid != b.pid) {
    throw Error(Errc::cross_document,
                "regions anchor different primaries: " + a.pid + " vs " + b.pid);
  }
  if (auto c = min_start_corner(a) <=> min_start_corner(b); c != 0) return c;
  if (auto c = max_end_corner(a) <=> max_end_corner(b); c != 0) return c;
  return region_coords(a) <=> region_coords(b);
}

namespace {

// Closed integer ranges per axis. A landmark span (s, s) covers the single
// point s; a proper span (s, e) covers s .. e-1. Every box is nonempty under
// this reading, which is what makes landmark relations well defined.
struct ClosedBox {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ax;  // [lo, hi]
};

ClosedBox to_closed(const Box& box) {
  ClosedBox out;
  for (const Span& s : box) {
    out.ax.emplace_back(s.start, s.start == s.end ? s.start : s.end - 1);
  }
  return out;
}

bool closed_intersects(const ClosedBox& a, const ClosedBox& b) {
  for (std::size_t i = 0; i < a.ax.size(); ++i) {
    if (a.ax[i].first > b.ax[i].second || b.ax[i].first > a.ax[i].second) {
      return false;
    }
  }
  return true;
}

// Fragments of p not covered by q.
std::vector<ClosedBox> closed_subtract(const ClosedBox& p, const ClosedBox& q) {
  if (!closed_intersects(p, q)) return {p};
  std::vector<ClosedBox> frags;
  ClosedBox cur = p;
  for (std::size_t i = 0; i < cur.ax.size(); ++i) {
    if (q.ax[i].first > cur.ax[i].first) {
      ClosedBox f = cur;
      f.ax[i].second = q.ax[i].first - 1;
      frags.push_back(std::move(f));
      cur.ax[i].first = q.ax[i].first;
    }
    if (q.ax[i].second < cur.ax[i].second) {
      ClosedBox f = cur;
      f.ax[i].first = q.ax[i].second + 1;
      frags.push_back(std::move(f));
      cur.ax[i].second = q.ax[i].second;
    }
  }
  return frags;
}

bool covered_by(const std::vector<ClosedBox>& inner,
                const std::vector<ClosedBox>& outer) {
  std::vector<ClosedBox> rest = inner;
  for (const ClosedBox& q : outer) {
    std::vector<ClosedBox> next;
    for (const ClosedBox& p : rest) {
      auto frags = closed_subtract(p, q);
      next.insert(next.end(), frags.begin(), frags.end());
    }
    rest = std::move(next);
    if (rest.empty()) return true;
  }
  return rest.empty();
}

}  // namespace

std::set<Relation> region_relate(const Region& a, const Region& b) {
  if (a.pid != b.pid) {
    throw Error(Errc::cross_document,
                "regions anchor different primaries: " + a.pid + " vs " + b.pid);
  }
  std::vector<ClosedBox> ca, cb;
  for (const Box& box : a.boxes) ca.push_back(to_closed(box));
  for (const Box& box : b.boxes) cb.push_back(to_closed(box));

  bool touching = false;
  for (const ClosedBox& p : ca) {
    for (const ClosedBox& q : cb) {
      if (closed_intersects(p, q)) { touching = true; break; }
    }
    if (touching) break;
  }
  if (!touching) return {Relation::Disjoint};

  std::set<Relation> rel{Relation::Overlaps};
  bool b_in_a = covered_by(cb, ca);
  bool a_in_b = covered_by(ca, cb);
  if (b_in_a) rel.insert(Relation::Contains);
  if (a_in_b) rel.insert(Relation::ContainedBy);
  if (a_in_b && b_in_a) rel.insert(Relation::Equal);
  return rel;
}

namespace {

bool span_degenerate(const Span& s) { return s.start == s.end; }

bool box_contains(const Box& outer, const Box& inner) {
  for (std::size_t i = 0; i < outer.size(); ++i) {
    auto [olo, ohi] = std::pair{outer[i].start,
                                span_degenerate(outer[i]) ? outer[i].start
                                                          : outer[i].end - 1};
    auto [ilo, ihi] = std::pair{inner[i].start,
                                span_degenerate(inner[i]) ? inner[i].start
                                                          : inner[i].end - 1};
    if (ilo < olo || ihi > ohi) return false;
    // A proper outer span covers an inner landmark only when the landmark's
    // point is strictly inside the half-open span.
    if (!span_degenerate(outer[i]) && span_degenerate(inner[i]) &&
        inner[i].start >= outer[i].end) {
      return false;
    }
    // A landmark never covers a proper span.
    if (span_degenerate(outer[i]) && !span_degenerate(inner[i])) return false;
  }
  return true;
}

std::optional<Box> merge_pair(const Box& a, const Box& b) {
  if (a == b) return a;
  if (box_contains(a, b)) return a;
  if (box_contains(b, a)) return b;
  std::size_t diff_axis = a.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      if (diff_axis != a.size()) return std::nullopt;  // differs on two axes
      diff_axis = i;
    }
  }
  const Span& sa = a[diff_axis];
  const Span& sb = b[diff_axis];
  if (span_degenerate(sa) || span_degenerate(sb)) return std::nullopt;
  if (sa.end < sb.start || sb.end < sa.start) return std::nullopt;  // gap
  Box merged = a;
  merged[diff_axis] = Span{std::min(sa.start, sb.start), std::max(sa.end, sb.end)};
  return merged;
}

}  // namespace

std::vector<Box> coalesce_boxes(std::vector<Box> boxes) {
  bool merged = true;
  while (merged) {
    merged = false;
    std::sort(boxes.begin(), boxes.end(), box_less);
    boxes.erase(std::unique(boxes.begin(), boxes.end()), boxes.end());
    for (std::size_t i = 0; i + 1 < boxes.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < boxes.size() && !merged; ++j) {
        if (auto m = merge_pair(boxes[i], boxes[j])) {
          boxes[i] = std::move(*m);
          boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
        }
      }
    }
  }
  return boxes;
}

}  // namespace laf
