#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "laf/dcr.hpp"
#include "laf/graph.hpp"

namespace laf {

/// Slash-joined token/tag pairs, one sentence per line (`The/DT cat/NN`).
/// The reconstructed primary text joins tokens with single spaces and
/// sentences with LF. Produces a `seg` layer (TOKEN + SENTENCE nodes) and a
/// `pos` layer with one annotation node per token carrying the mapped POS
/// value; the result is normalized through the DCS.
Document ingest_inline(std::string_view bytes, const DCS& dcs, const Registry& reg);

/// Inverse of ingest_inline; byte-identical on conformant inputs.
/// Throws ShapeMismatch on documents the format cannot express.
std::string emit_inline(const Document& doc, const DCS& dcs);

/// One token per line with TAB-separated (token, lemma, pos) columns, blank
/// line between sentences. TOKEN nodes carry F(POS, value) and
/// F(LEMMA, literal) directly.
Document ingest_columnar(std::string_view bytes, const DCS& dcs, const Registry& reg);
std::string emit_columnar(const Document& doc, const DCS& dcs);

/// Parenthesized constituency trees, one per line. Leaves become TOKEN
/// nodes carrying F(POS, preterminal); nonterminals become `syn` layer
/// nodes typed by their mapped label, targeting children in order.
Document ingest_brackets(std::string_view bytes, const DCS& dcs, const Registry& reg);
std::string emit_brackets(const Document& doc, const DCS& dcs);

/// One line per transducer: format name, comma-joined layers produced,
/// DCS reference.
struct ManifestEntry {
  std::string format;
  std::vector<std::string> layers;
  std::string dcs_ref;
};
std::vector<ManifestEntry> load_manifest(std::string_view bytes);

}  // namespace laf
