#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "laf/dcr.hpp"
#include "laf/graph.hpp"

namespace laf {

/// Union of documents over agreeing primaries. Region/node/group ids are
/// suffixed by source index, identical regions deduplicate, layers with
/// one lid must agree on dependencies and dcs_ref; the result is
/// canonicalized. Throws PrimaryMismatch, LayerIdClash.
Document merge(std::span<const Document> docs);

/// The requested layers plus their transitive depends_on closure and
/// everything reachable from them; primaries are kept as-is so the output
/// is stand-off over the same resources. Throws UnknownLayer.
Document extract(const Document& doc, const std::vector<std::string>& layer_ids);

struct AgreementReport {
  std::string layer_a, layer_b;
  /// Positions (canonical footprints) annotated for the descriptor in BOTH
  /// layers. Positions seen on one side only are reported as disagreements
  /// with an absent marker but do not count as items.
  std::size_t item_count = 0;
  std::size_t matches = 0;
  std::optional<double> rate;  // matches / item_count; empty when no items

  struct Disagreement {
    Region region;
    std::optional<std::string> value_a, value_b;  // nullopt = absent
  };
  std::vector<Disagreement> disagreements;
};

/// Pairs nodes across two layers by exact canonical footprint and compares
/// their normalized values for one descriptor. Throws UnknownLayer,
/// UnknownDescriptor.
AgreementReport diff(const Document& doc, const std::string& layer_a,
                     const std::string& layer_b, const std::string& descriptor,
                     const Registry& reg);

std::string render_report(const AgreementReport& report);

/// EMBED parent-cat child-cat...; APPLIES descriptor node-cat...
/// Categories are written in token form (registry id or ~scheme:name).
struct ConstraintSet {
  std::map<std::string, std::set<std::string>> embed_rules;
  std::map<std::string, std::set<std::string>> applies_rules;

  static ConstraintSet load(std::string_view bytes);
};

struct ValidationFinding {
  enum class Kind {
    Embedding,
    Applicability,
    Compatibility,
    Orphan,
    UndeclaredDependency,
  };
  Kind kind = Kind::Embedding;
  std::string node;  // offending node id (empty when not node-anchored)
  std::string message;
};

std::string_view finding_kind_name(ValidationFinding::Kind k);

/// Structural validation: embedding and applicability rules, descriptor/
/// value compatibility against the registry, orphan nodes, and
/// cross-layer uses not covered by declared dependencies. Violations are
/// data, not errors; an empty report means valid.
std::vector<ValidationFinding> validate(const Document& doc, const Registry& reg,
                                        const ConstraintSet& constraints = {});

std::string render_report(std::span<const ValidationFinding> findings);

}  // namespace laf
