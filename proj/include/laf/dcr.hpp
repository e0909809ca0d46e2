#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "laf/graph.hpp"

namespace laf {

/// One registry concept: a type descriptor or a value. Names, definitions
/// and usage notes are (language, text) pairs in declaration order; the
/// first declared language is the fallback. Descriptors with an empty
/// allowed_values set take literal values.
struct DataCategoryEntry {
  enum class Kind { Descriptor, Value };

  std::string id;
  Kind kind = Kind::Descriptor;
  std::vector<std::pair<std::string, std::string>> names;
  std::vector<std::pair<std::string, std::string>> definitions;
  std::vector<std::pair<std::string, std::string>> notes;
  std::vector<std::string> allowed_values;
};

/// Loaded, referentially closed data category registry.
class Registry {
 public:
  /// Parses the registry file grammar. Throws DuplicateEntryId,
  /// UnknownValueRef, KindMismatch, MissingName.
  static Registry load(std::string_view bytes, std::string source = {});

  const DataCategoryEntry* find(std::string_view id) const;
  std::span<const DataCategoryEntry> entries() const { return entries_; }
  const std::string& source() const { return source_; }

  /// Registry extended by scheme-local entries (validated the same way;
  /// ids may not clash with existing entries).
  Registry merged_with(std::span<const DataCategoryEntry> locals) const;

  struct EntryView {
    const DataCategoryEntry* entry = nullptr;
    std::string name;
    std::string definition;
    std::string lang;      // language the texts were taken from
    bool fallback = false; // true when `lang` differs from the request
  };
  /// Language-specific view with declaration-order fallback. Throws UnknownId.
  EntryView lookup(std::string_view id, std::string_view lang) const;

  struct CompatResult {
    bool ok = true;
    std::string reason;
  };
  /// ok iff value is one of the descriptor's allowed values, or the
  /// descriptor is literal-valued (empty allowed set) and the value is a
  /// literal. Group values are checked member-wise when `doc` can resolve
  /// them. Throws NotADescriptor / UnknownId.
  CompatResult check_compat(std::string_view descriptor_id,
                            const FeatureValue& value,
                            const Document* doc = nullptr) const;

  /// Serialization in the registry file grammar (used by fixtures/tools).
  std::string to_bytes() const;

 private:
  std::vector<DataCategoryEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::string source_;

  void insert(DataCategoryEntry entry);
  void validate_closure() const;
};

/// Parses a sequence of ENTRY blocks (shared by the registry loader and
/// the DCS LOCAL section). Lines are TAB-separated, continuation lines
/// carry one leading TAB, a blank line ends an entry.
std::vector<DataCategoryEntry> parse_entry_blocks(std::string_view bytes,
                                                  std::size_t first_lineno = 1);

/// Scheme-to-registry mapping: descriptor names, (descriptor, value) name
/// pairs, and locally defined categories validated like registry entries.
struct DCS {
  std::string scheme;
  std::map<std::string, std::string> descriptor_map;
  std::map<std::pair<std::string, std::string>, std::string> value_map;
  std::vector<DataCategoryEntry> local_entries;

  /// Throws UnknownTarget, DuplicateSchemeName, LocalEntryInvalid.
  static DCS load(std::string_view bytes, const Registry& reg);

  /// Grammar-only parse without target validation, for consumers that only
  /// need the mapping tables (emission inverts mappings, no registry).
  static DCS parse(std::string_view bytes);

  std::string to_bytes() const;
};

/// Replaces every `~scheme:name` token of this DCS's scheme by its
/// registry id (node types, feature descriptors, category values, group
/// value members) and checks descriptor/value compatibility. Idempotent.
/// Throws UnmappedCategory, CompatViolation.
Document dcs_apply(const Document& doc, const DCS& dcs, const Registry& reg);

/// Inverse mapping back to scheme form: every registry id occurring in the
/// document must have a unique preimage. Throws NoPreimage,
/// AmbiguousPreimage.
Document dcs_invert(const Document& doc, const DCS& dcs);

}  // namespace laf
