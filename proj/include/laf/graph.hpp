#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "laf/anchors.hpp"

namespace laf {

/// Reference to a data category: a registry concept id, or a scheme-local
/// name (scheme nonempty). Token form is `GENDER` resp. `~scheme:name`.
struct CategoryRef {
  std::string name;
  std::string scheme;

  bool is_local() const { return !scheme.empty(); }
  std::string token() const;

  static CategoryRef registry(std::string id) { return {std::move(id), {}}; }
  static CategoryRef local(std::string scheme, std::string name) {
    return {std::move(name), std::move(scheme)};
  }
  /// Parses `id` or `~scheme:name`. Throws MalformedId.
  static CategoryRef parse(std::string_view token);
  /// Reserved category for untyped links.
  static CategoryRef untyped() { return registry("UNTYPED"); }

  friend auto operator<=>(const CategoryRef&, const CategoryRef&) = default;
};

struct FeatureValue {
  enum class Kind { Category, Literal, GroupRef };
  Kind kind = Kind::Literal;
  CategoryRef category;  // Kind::Category
  std::string text;      // Kind::Literal
  std::string gid;       // Kind::GroupRef

  static FeatureValue of_category(CategoryRef c) {
    return {Kind::Category, std::move(c), {}, {}};
  }
  static FeatureValue of_literal(std::string t) {
    return {Kind::Literal, {}, std::move(t), {}};
  }
  static FeatureValue of_group(std::string gid) {
    return {Kind::GroupRef, {}, {}, std::move(gid)};
  }

  friend auto operator<=>(const FeatureValue&, const FeatureValue&) = default;
};

struct FeatureAssignment {
  CategoryRef descriptor;
  FeatureValue value;

  friend auto operator<=>(const FeatureAssignment&, const FeatureAssignment&) = default;
};

struct TargetRef {
  enum class Kind { Region, Node };
  Kind kind = Kind::Region;
  std::string id;

  static TargetRef region(std::string rid) { return {Kind::Region, std::move(rid)}; }
  static TargetRef node(std::string nid) { return {Kind::Node, std::move(nid)}; }

  friend auto operator<=>(const TargetRef&, const TargetRef&) = default;
};

/// Elementary structural node: typed, anchored through ordered targets
/// (regions or other nodes), carrying a set of descriptor/value pairs.
struct Node {
  std::string nid;
  std::string layer;
  CategoryRef type;
  std::vector<TargetRef> targets;
  std::vector<FeatureAssignment> features;  // set semantics, duplicates collapse

  friend bool operator==(const Node&, const Node&) = default;
};

enum class GroupKind { Alt, Set, List };

std::string_view group_kind_name(GroupKind k);
std::optional<GroupKind> group_kind_by_name(std::string_view name);

struct GroupMember {
  enum class Kind { Node, Value };
  Kind kind = Kind::Node;
  std::string nid;     // Kind::Node
  FeatureValue value;  // Kind::Value (Category or Literal only)

  static GroupMember of_node(std::string nid) { return {Kind::Node, std::move(nid), {}}; }
  static GroupMember of_value(FeatureValue v) { return {Kind::Value, {}, std::move(v)}; }

  friend auto operator<=>(const GroupMember&, const GroupMember&) = default;
};

/// ALT: >= 2 mutually exclusive alternatives. SET: unordered, no
/// duplicates. LIST: ordered, duplicates allowed. Members are homogeneous:
/// all node references or all values.
struct Group {
  std::string gid;
  GroupKind kind = GroupKind::Set;
  std::vector<GroupMember> members;

  friend bool operator==(const Group&, const Group&) = default;
};

/// One stand-off annotation layer. depends_on names layers and/or pids;
/// the relation must be acyclic and every layer must transitively reach at
/// least one pid. dcs_ref optionally locates the DCS documenting the
/// layer's categories ("-" / empty when absent).
struct Layer {
  std::string lid;
  std::vector<std::string> depends_on;  // stored sorted, deduplicated
  std::string dcs_ref;

  friend bool operator==(const Layer&, const Layer&) = default;
};

enum class RecordKind { Primary, Layer, Region, Node, Feature, Group };

/// One entry of the document's insertion log. Feature entries use `index`
/// for the node and `sub` for the feature's position inside it.
/// `layer_hint` is the emission segment for layer-grouped dumps; it is set
/// on canonicalized documents and empty otherwise.
struct LogEntry {
  RecordKind kind = RecordKind::Region;
  std::uint32_t index = 0;
  std::uint32_t sub = 0;
  std::string layer_hint;
};

class Document;

/// Single-writer accumulation of an open document. Forward references are
/// permitted anywhere; close() resolves everything, verifies the
/// acyclicity and grounding invariants and produces the immutable Document.
class DocumentBuilder {
 public:
  void add_primary(PrimaryDataRef p);
  void add_layer(Layer l);
  void add_region(const Region& r);
  /// Region whose box structure is not yet known because the primary may
  /// be declared later; coords are grouped into boxes at close.
  void add_region_raw(std::string rid, std::string pid,
                      std::vector<std::uint64_t> coords);
  void add_node(Node n);
  void add_feature(const std::string& nid, FeatureAssignment fa);
  void add_group(Group g);

  bool has_id(RecordKind kind, const std::string& id) const;

  Document close();

 private:
  friend class Document;

  struct PendingRegion {
    std::string rid, pid;
    std::vector<std::uint64_t> coords;
  };
  struct PendingFeature {
    std::string nid;
    FeatureAssignment fa;
  };

  std::vector<PrimaryDataRef> primaries_;
  std::vector<Layer> layers_;
  std::vector<PendingRegion> regions_;
  std::vector<Node> nodes_;
  std::vector<Group> groups_;
  std::vector<PendingFeature> pending_features_;
  // log entries; Feature entries index pending_features_ until close
  std::vector<LogEntry> log_;
  std::map<std::string, std::size_t, std::less<>> primary_ix_, layer_ix_,
      region_ix_, node_ix_, group_ix_;
};

/// Sealed, immutable annotation document. Safe to share across threads.
class Document {
 public:
  Document() = default;

  std::span<const PrimaryDataRef> primaries() const { return primaries_; }
  std::span<const Layer> layers() const { return layers_; }
  std::span<const Region> regions() const { return regions_; }
  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Group> groups() const { return groups_; }
  const std::vector<LogEntry>& log() const { return log_; }

  const PrimaryDataRef* find_primary(std::string_view pid) const;
  const Layer* find_layer(std::string_view lid) const;
  const Region* find_region(std::string_view rid) const;
  const Node* find_node(std::string_view nid) const;
  const Group* find_group(std::string_view gid) const;

  bool empty() const {
    return primaries_.empty() && layers_.empty() && regions_.empty() &&
           nodes_.empty() && groups_.empty();
  }

  /// Union of all regions reachable from the node through targets,
  /// coalesced. Anchorless nodes yield a region with no boxes. Throws
  /// UnknownNode; mixed-pid descendants raise CrossDocumentComparison.
  Region footprint(const std::string& nid) const;

  /// Node ids targeting the given node or region (derived reverse index).
  std::vector<std::string> targeted_by(const std::string& id) const;
  /// Group ids having the node as a member.
  std::vector<std::string> member_of(const std::string& nid) const;

  /// Layers topologically ordered (dependencies first, ties by lid).
  std::vector<std::string> layer_order() const;
  /// Transitive depends_on closure over layers, including the inputs.
  /// Throws UnknownLayer.
  std::vector<std::string> layer_closure(std::span<const std::string> lids) const;
  /// Pids a layer transitively depends on.
  std::vector<std::string> layer_pids(const std::string& lid) const;

  /// Re-runs the close-time verification; sealed documents always pass.
  void verify() const;

 private:
  friend class DocumentBuilder;
  friend Document canonicalize(const Document&);

  std::vector<PrimaryDataRef> primaries_;
  std::vector<Layer> layers_;
  std::vector<Region> regions_;
  std::vector<Node> nodes_;
  std::vector<Group> groups_;
  std::vector<LogEntry> log_;
  std::map<std::string, std::size_t, std::less<>> primary_ix_, layer_ix_,
      region_ix_, node_ix_, group_ix_;
};

/// Deterministic relabeling: regions sorted by (pid, region_cmp), nodes by
/// (layer, footprint, type, target structure), groups by (kind, canonical
/// members); ids reassigned r1.., n1.., g1..; content otherwise unchanged.
/// Idempotent and independent of insertion order. The log is rebuilt
/// grouped per layer in dependency order (with layer hints), which is what
/// makes canonical dumps splittable at layer boundaries.
Document canonicalize(const Document& doc);

/// True iff the canonical forms agree record for record.
bool doc_equal(const Document& a, const Document& b);

/// Records a SET group over >= 2 nodes whose anchors resolve to equal
/// coalesced regions. Returns the extended document and the group id.
/// Throws NotCoextensive / PreconditionViolated.
std::pair<Document, std::string> mark_parallel(const Document& doc,
                                               const std::vector<std::string>& nids);

/// SET groups of >= 2 node members whose footprints are all equal.
std::vector<std::string> parallel_groups(const Document& doc);

/// Rebuilds a builder holding the same content (for derived documents).
DocumentBuilder to_builder(const Document& doc);

}  // namespace laf
