#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "laf/errors.hpp"
#include "laf/graph.hpp"

namespace laf {

/// Backslash escaping for dump fields: TAB, LF, CR and backslash itself.
/// unescape(escape(x)) == x for every string.
std::string escape(std::string_view text);
std::string unescape(std::string_view token);

struct ReadOptions {
  /// Verify primary content hashes when the resource is resolvable
  /// (data: URIs always are; file URIs when the file exists).
  bool verify_hashes = true;
  /// Base directory for relative file uris.
  std::string base_dir;
};

/// Raw content of a primary resource, when reachable: inline for
/// `data:,...` uris, from the filesystem for `file:` or bare-path uris.
std::optional<std::string> resolve_primary_content(const PrimaryDataRef& p,
                                                   const std::string& base_dir = {});

/// Builds a self-contained primary declaration around inline text.
PrimaryDataRef make_inline_primary(std::string pid, const AnchorSpace& space,
                                   std::string_view text);

/// One parsed dump line. `fields` holds the raw (still escaped) tokens.
struct DumpRecord {
  enum class Kind { Header, Primary, Layer, R, N, F, G, End };
  Kind kind = Kind::Header;
  std::vector<std::string> fields;
};

DumpRecord parse_dump_line(std::string_view line, std::size_t lineno);

/// Serializes a sealed document. With `canonical` the output is a
/// deterministic function of document content (canonicalize first); without
/// it the insertion order is replayed, which keeps any forward references
/// the producer emitted. The #END record carries the exact count of body
/// records (every record line between the magic line and #END).
std::string write_dump(const Document& doc, bool canonical);

/// Canonical dump split into byte segments: the header (magic + #PRIMARY +
/// #LAYER lines) and one segment per layer in dependency order, records
/// attributed so that header + any prefix of whole segments + a matching
/// #END line is itself a valid dump.
struct DumpLayout {
  std::string header;
  std::vector<std::pair<std::string, std::string>> segments;  // (lid, bytes)
  std::string trailing;  // records attached to no layer
  std::size_t header_records = 0;
  std::vector<std::size_t> segment_records;
  std::size_t trailing_records = 0;
};
DumpLayout write_dump_layout(const Document& doc);

/// Batch read: parses a complete dump, resolves forward references at
/// #END, seals. Throws BadMagic, UnknownRecordKind, ArityError,
/// UnresolvedAtEnd, CountMismatch, HashMismatch and the document errors.
Document read_dump(std::string_view bytes, const ReadOptions& opts = {});

/// Incremental reading surface. Events appear in record order; folding
/// them rebuilds the document read_dump produces. Errors are terminal
/// events. Record payloads are never retained by the reader; the id
/// bookkeeping needed for duplicate and resolution detection grows with
/// the number of distinct ids, unresolved references dominate otherwise.
struct StreamEvent {
  enum class Kind {
    DocumentStart,
    PrimaryDeclared,
    LayerDeclared,
    RegionSeen,
    NodeSeen,
    FeatureSeen,
    GroupSeen,
    ReferenceResolved,
    DocumentEnd,
    Error,
  };
  Kind kind = Kind::DocumentStart;

  PrimaryDataRef primary;              // PrimaryDeclared
  Layer layer;                         // LayerDeclared
  std::string rid, pid;                // RegionSeen
  std::vector<std::uint64_t> coords;   // RegionSeen (box grouping deferred)
  Node node;                           // NodeSeen (features arrive separately)
  std::string nid;                     // FeatureSeen
  FeatureAssignment feature;           // FeatureSeen
  Group group;                         // GroupSeen
  std::string id;                      // ReferenceResolved
  std::size_t record_count = 0;        // DocumentEnd
  Errc error = Errc::io_error;         // Error
  std::string message;                 // Error
  std::size_t line = 0;                // Error
};

class StreamReader {
 public:
  explicit StreamReader(ReadOptions opts = {});

  /// Feed any amount of bytes; events become available via poll().
  void feed(std::string_view bytes);
  /// Signal end of input. Emits the terminal error if no #END was seen.
  void finish();
  std::optional<StreamEvent> poll();

  bool done() const { return ended_; }
  bool failed() const { return failed_; }

 private:
  void process_line(std::string_view line);
  void emit_error(Errc code, std::string message);
  void check_new(const std::string& id, const std::set<std::string>& declared) const;
  void declare(const std::string& id, std::set<std::string>& declared,
               std::initializer_list<std::set<std::string>*> pendings);
  void reference(const std::string& id, const std::set<std::string>& declared,
                 std::set<std::string>& pending);
  void reference2(const std::string& id, const std::set<std::string>& da,
                  const std::set<std::string>& db, std::set<std::string>& pending);

  ReadOptions opts_;
  std::string buffer_;
  std::size_t lineno_ = 0;
  bool saw_magic_ = false;
  bool ended_ = false;
  bool failed_ = false;
  bool finished_ = false;
  std::size_t body_records_ = 0;
  std::deque<StreamEvent> events_;
  std::set<std::string> primaries_, layers_, regions_, nodes_, groups_;
  std::set<std::string> pend_primary_, pend_dep_, pend_layer_, pend_region_,
      pend_node_, pend_group_;
};

/// Whole-buffer convenience wrapper over StreamReader.
std::vector<StreamEvent> stream_read(std::string_view bytes,
                                     const ReadOptions& opts = {});

/// Rebuilds the document from a complete event sequence. Error events are
/// rethrown; a missing DocumentEnd is a CountMismatch.
Document fold_events(std::span<const StreamEvent> events);

}  // namespace laf
