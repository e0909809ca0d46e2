#include "laf/transducers.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "laf/dump.hpp"
#include "laf/errors.hpp"
#include "laf/util.hpp"

namespace laf {

namespace {

const AnchorSpace kChar{SpaceKind::Char};

struct Lex {
  std::string text;
  std::string tag;
  std::string lemma;
  bool has_lemma = false;
};

using Sentences = std::vector<std::vector<Lex>>;

void require_tag(const std::string& tag, std::size_t lineno, std::size_t column) {
  if (!is_identifier(tag)) {
    throw Error(Errc::malformed_pair,
                "tag '" + tag + "' at token " + std::to_string(column) +
                    " is not a valid tag",
                lineno);
  }
}

/// Shared skeleton: reconstructed text, seg layer with TOKEN and SENTENCE
/// nodes. POS/LEMMA placement differs per format, handled by `decorate`.
template <typename Decorate>
Document build_token_document(const Sentences& sents, const DCS& dcs,
                              const Registry& reg, bool pos_layer,
                              Decorate&& decorate) {
  std::string text;
  for (std::size_t s = 0; s < sents.size(); ++s) {
    if (s) text += '\n';
    for (std::size_t t = 0; t < sents[s].size(); ++t) {
      if (t) text += ' ';
      text += sents[s][t].text;
    }
  }
  DocumentBuilder b;
  b.add_primary(make_inline_primary("text", kChar, text));
  b.add_layer({"seg", {"text"}, dcs.scheme});
  if (pos_layer) b.add_layer({"pos", {"seg"}, dcs.scheme});
  std::uint64_t offset = 0;
  std::size_t token_no = 0;
  for (std::size_t s = 0; s < sents.size(); ++s) {
    std::vector<TargetRef> sentence_tokens;
    for (const Lex& lex : sents[s]) {
      ++token_no;
      auto len = static_cast<std::uint64_t>(utf8_length(lex.text));
      std::string rid = "r" + std::to_string(token_no);
      std::string tid = "t" + std::to_string(token_no);
      b.add_region(make_region(rid, "text", kChar,
                               std::vector<std::int64_t>{
                                   static_cast<std::int64_t>(offset),
                                   static_cast<std::int64_t>(offset + len)}));
      b.add_node({tid, "seg", CategoryRef::registry("TOKEN"),
                  {TargetRef::region(rid)}, {}});
      decorate(b, tid, token_no, lex);
      sentence_tokens.push_back(TargetRef::node(tid));
      offset += len + 1;
    }
    b.add_node({"s" + std::to_string(s + 1), "seg",
                CategoryRef::registry("SENTENCE"), std::move(sentence_tokens), {}});
  }
  return dcs_apply(b.close(), dcs, reg);
}

// --- shared emission machinery ---------------------------------------------

struct TokenView {
  const Node* node = nullptr;
  std::uint64_t start = 0, end = 0;  // code points
  std::string text;
};

struct EmitShape {
  std::string primary_text;
  std::vector<std::vector<TokenView>> sentences;
};

[[noreturn]] void shape_error(const std::string& what) {
  throw Error(Errc::shape_mismatch, what);
}

/// Checks the document against the token/sentence skeleton the text
/// formats share and slices token texts out of the primary.
EmitShape discover_shape(const Document& doc, bool expect_sentences) {
  EmitShape shape;
  std::vector<const Node*> sentence_nodes, token_nodes;
  for (const Node& n : doc.nodes()) {
    if (n.type == CategoryRef::registry("SENTENCE")) sentence_nodes.push_back(&n);
    if (n.type == CategoryRef::registry("TOKEN")) token_nodes.push_back(&n);
  }
  if (sentence_nodes.empty() && token_nodes.empty()) {
    return shape;  // empty document emits empty output
  }
  if (doc.primaries().size() != 1) shape_error("exactly one primary expected");
  const PrimaryDataRef& primary = doc.primaries()[0];
  if (primary.space.kind != SpaceKind::Char) {
    shape_error("primary must use the char space");
  }
  auto content = resolve_primary_content(primary);
  if (!content) shape_error("primary content of '" + primary.pid + "' unavailable");
  shape.primary_text = *content;

  auto token_view = [&](const Node* n) {
    if (n->targets.size() != 1 || n->targets[0].kind != TargetRef::Kind::Region) {
      shape_error("token '" + n->nid + "' must target exactly one region");
    }
    const Region* r = doc.find_region(n->targets[0].id);
    if (r->boxes.size() != 1) {
      shape_error("token '" + n->nid + "' is discontinuous");
    }
    const Span& span = r->boxes[0][0];
    if (span.start == span.end) shape_error("token '" + n->nid + "' is empty");
    TokenView view;
    view.node = n;
    view.start = span.start;
    view.end = span.end;
    view.text = utf8_slice(shape.primary_text, span.start, span.end);
    return view;
  };

  std::set<std::string> covered;
  if (expect_sentences || !sentence_nodes.empty()) {
    std::vector<std::pair<std::uint64_t, const Node*>> ordered;
    for (const Node* s : sentence_nodes) {
      Region fp = doc.footprint(s->nid);
      std::uint64_t start = fp.boxes.empty() ? 0 : fp.boxes[0][0].start;
      ordered.emplace_back(start, s);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first < b.first;
                return a.second->nid < b.second->nid;
              });
    for (const auto& [start, s] : ordered) {
      std::vector<TokenView> views;
      for (const TargetRef& t : s->targets) {
        if (t.kind != TargetRef::Kind::Node) {
          shape_error("sentence '" + s->nid + "' targets a region directly");
        }
        const Node* tok = doc.find_node(t.id);
        if (tok->type != CategoryRef::registry("TOKEN")) {
          shape_error("sentence '" + s->nid + "' targets non-token '" + t.id + "'");
        }
        if (!covered.insert(tok->nid).second) {
          shape_error("token '" + tok->nid + "' appears in two sentences");
        }
        views.push_back(token_view(tok));
      }
      if (views.empty()) shape_error("sentence '" + s->nid + "' has no tokens");
      shape.sentences.push_back(std::move(views));
    }
    for (const Node* tok : token_nodes) {
      if (!covered.count(tok->nid)) {
        shape_error("token '" + tok->nid + "' belongs to no sentence");
      }
    }
  }
  return shape;
}

/// Every value of `descriptor` attached to the token, either directly or on
/// annotation nodes targeting it.
std::vector<FeatureValue> token_values(const Document& doc, const Node& token,
                                       const CategoryRef& descriptor) {
  std::vector<FeatureValue> out;
  auto collect = [&](const Node& n) {
    for (const FeatureAssignment& fa : n.features) {
      if (fa.descriptor == descriptor) out.push_back(fa.value);
    }
  };
  collect(token);
  for (const std::string& nid : doc.targeted_by(token.nid)) {
    collect(*doc.find_node(nid));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

CategoryRef mapped_descriptor(const DCS& dcs, const std::string& scheme_name) {
  auto it = dcs.descriptor_map.find(scheme_name);
  if (it == dcs.descriptor_map.end()) {
    shape_error("dcs '" + dcs.scheme + "' does not map a '" + scheme_name +
                "' descriptor");
  }
  return CategoryRef::registry(it->second);
}

std::string invert_tag(const DCS& dcs, const std::string& scheme_desc,
                       const FeatureValue& value, const std::string& at) {
  if (value.kind != FeatureValue::Kind::Category || value.category.is_local()) {
    shape_error("tag value at " + at + " is not a registry category");
  }
  std::vector<std::string> names;
  for (const auto& [key, target] : dcs.value_map) {
    if (key.first == scheme_desc && target == value.category.name) {
      names.push_back(key.second);
    }
  }
  if (names.empty()) {
    throw Error(Errc::no_preimage,
                "'" + value.category.name + "' has no scheme tag (at " + at + ")");
  }
  if (names.size() > 1) {
    throw Error(Errc::ambiguous_preimage,
                "'" + value.category.name + "' has " +
                    std::to_string(names.size()) + " scheme tags (at " + at + ")");
  }
  return names.front();
}

std::string token_tag(const Document& doc, const DCS& dcs, const Node& token) {
  CategoryRef pos = mapped_descriptor(dcs, "pos");
  std::vector<FeatureValue> values = token_values(doc, token, pos);
  if (values.size() != 1) {
    shape_error("token '" + token.nid + "' carries " +
                std::to_string(values.size()) + " POS values, need exactly 1");
  }
  return invert_tag(dcs, "pos", values[0], "token " + token.nid);
}

void require_plain_token(const std::string& text, const std::string& nid,
                         bool allow_space) {
  if (text.empty()) shape_error("token '" + nid + "' has empty text");
  for (char c : text) {
    if (c == '\n' || c == '\t' || (!allow_space && c == ' ')) {
      shape_error("token '" + nid + "' text cannot be written in this format");
    }
  }
}

}  // namespace

// --- inline tagged text -----------------------------------------------------

Document ingest_inline(std::string_view bytes, const DCS& dcs, const Registry& reg) {
  Sentences sents;
  std::vector<std::string_view> lines = split(bytes, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::size_t lineno = i + 1;
    if (lines[i].empty()) continue;
    std::vector<Lex> sentence;
    std::vector<std::string_view> tokens = split(lines[i], ' ');
    for (std::size_t col = 0; col < tokens.size(); ++col) {
      std::string_view pair = tokens[col];
      std::size_t slash = pair.rfind('/');
      if (pair.empty() || slash == std::string_view::npos || slash == 0 ||
          slash + 1 == pair.size()) {
        throw Error(Errc::malformed_pair,
                    "token " + std::to_string(col + 1) + " '" +
                        std::string(pair) + "' is not token/tag",
                    lineno);
      }
      Lex lex;
      lex.text = std::string(pair.substr(0, slash));
      lex.tag = std::string(pair.substr(slash + 1));
      require_tag(lex.tag, lineno, col + 1);
      sentence.push_back(std::move(lex));
    }
    sents.push_back(std::move(sentence));
  }
  return build_token_document(
      sents, dcs, reg, /*pos_layer=*/true,
      [&](DocumentBuilder& b, const std::string& tid, std::size_t token_no,
          const Lex& lex) {
        b.add_node({"a" + std::to_string(token_no), "pos",
                    CategoryRef::local(dcs.scheme, "pos"),
                    {TargetRef::node(tid)},
                    {{CategoryRef::local(dcs.scheme, "pos"),
                      FeatureValue::of_category(
                          CategoryRef::local(dcs.scheme, lex.tag))}}});
      });
}

std::string emit_inline(const Document& doc, const DCS& dcs) {
  EmitShape shape = discover_shape(doc, /*expect_sentences=*/true);
  std::string out;
  for (const auto& sentence : shape.sentences) {
    for (std::size_t t = 0; t < sentence.size(); ++t) {
      if (t) out += ' ';
      require_plain_token(sentence[t].text, sentence[t].node->nid,
                          /*allow_space=*/false);
      out += sentence[t].text + "/" + token_tag(doc, dcs, *sentence[t].node);
    }
    out += '\n';
  }
  return out;
}

// --- columnar tokens --------------------------------------------------------

Document ingest_columnar(std::string_view bytes, const DCS& dcs,
                         const Registry& reg) {
  Sentences sents;
  std::vector<Lex> sentence;
  std::vector<std::string_view> lines = split(bytes, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  auto flush = [&] {
    if (!sentence.empty()) sents.push_back(std::move(sentence));
    sentence.clear();
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::size_t lineno = i + 1;
    if (lines[i].empty()) {
      flush();
      continue;
    }
    std::vector<std::string_view> cols = split(lines[i], '\t');
    if (cols.size() != 3) {
      throw Error(Errc::column_count_mismatch,
                  "expected 3 columns, got " + std::to_string(cols.size()),
                  lineno);
    }
    if (cols[0].empty() || cols[1].empty() || cols[2].empty()) {
      throw Error(Errc::malformed_pair, "blank column", lineno);
    }
    Lex lex;
    lex.text = std::string(cols[0]);
    lex.lemma = std::string(cols[1]);
    lex.has_lemma = true;
    lex.tag = std::string(cols[2]);
    require_tag(lex.tag, lineno, 3);
    sentence.push_back(std::move(lex));
  }
  flush();
  return build_token_document(
      sents, dcs, reg, /*pos_layer=*/false,
      [&](DocumentBuilder& b, const std::string& tid, std::size_t, const Lex& lex) {
        b.add_feature(tid, {CategoryRef::local(dcs.scheme, "pos"),
                            FeatureValue::of_category(
                                CategoryRef::local(dcs.scheme, lex.tag))});
        b.add_feature(tid, {CategoryRef::local(dcs.scheme, "lemma"),
                            FeatureValue::of_literal(lex.lemma)});
      });
}

std::string emit_columnar(const Document& doc, const DCS& dcs) {
  EmitShape shape = discover_shape(doc, /*expect_sentences=*/true);
  CategoryRef lemma_desc = mapped_descriptor(dcs, "lemma");
  std::string out;
  for (std::size_t s = 0; s < shape.sentences.size(); ++s) {
    if (s) out += '\n';  // one blank line between sentences
    for (const TokenView& view : shape.sentences[s]) {
      require_plain_token(view.text, view.node->nid, /*allow_space=*/true);
      std::vector<FeatureValue> lemmas = token_values(doc, *view.node, lemma_desc);
      if (lemmas.size() != 1 || lemmas[0].kind != FeatureValue::Kind::Literal) {
        shape_error("token '" + view.node->nid + "' needs exactly one literal lemma");
      }
      const std::string& lemma = lemmas[0].text;
      if (lemma.empty() || lemma.find('\t') != std::string::npos ||
          lemma.find('\n') != std::string::npos) {
        shape_error("lemma of '" + view.node->nid + "' cannot be a column");
      }
      out += view.text + "\t" + lemma + "\t" + token_tag(doc, dcs, *view.node) + "\n";
    }
  }
  return out;
}

// --- bracketed trees --------------------------------------------------------

namespace {

struct Tree {
  std::string label;
  std::string token;        // leaf when nonempty
  std::vector<Tree> children;
};

struct BracketParser {
  std::string_view line;
  std::size_t pos = 0;
  std::size_t lineno;

  [[noreturn]] void unbalanced(const std::string& what) {
    throw Error(Errc::unbalanced_parens,
                what + " at position " + std::to_string(pos + 1), lineno);
  }

  void skip_spaces() {
    while (pos < line.size() && line[pos] == ' ') ++pos;
  }

  std::string read_word() {
    std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '(' &&
           line[pos] != ')') {
      ++pos;
    }
    return std::string(line.substr(start, pos - start));
  }

  Tree parse_tree() {
    skip_spaces();
    if (pos >= line.size() || line[pos] != '(') unbalanced("expected '('");
    ++pos;
    Tree t;
    t.label = read_word();
    if (t.label.empty()) {
      throw Error(Errc::empty_label,
                  "missing label at position " + std::to_string(pos + 1), lineno);
    }
    skip_spaces();
    if (pos < line.size() && line[pos] == '(') {
      while (pos < line.size() && line[pos] == '(') {
        t.children.push_back(parse_tree());
        skip_spaces();
      }
      if (pos >= line.size()) unbalanced("expected ')'");
      if (line[pos] != ')') {
        throw Error(Errc::malformed_pair,
                    "bare token next to subtrees under '" + t.label + "'", lineno);
      }
      ++pos;
      return t;
    }
    t.token = read_word();
    if (t.token.empty()) {
      if (pos >= line.size()) unbalanced("expected ')'");
      throw Error(Errc::malformed_pair,
                  "leaf under '" + t.label + "' needs exactly one token", lineno);
    }
    skip_spaces();
    if (pos >= line.size() || line[pos] != ')') {
      throw Error(Errc::malformed_pair,
                  "leaf '" + t.token + "' must close after one token", lineno);
    }
    ++pos;
    return t;
  }

  Tree parse_line() {
    Tree t = parse_tree();
    skip_spaces();
    if (pos != line.size()) unbalanced("trailing content");
    return t;
  }
};

void collect_tokens(const Tree& t, std::vector<const Tree*>& leaves) {
  if (!t.token.empty()) {
    leaves.push_back(&t);
    return;
  }
  for (const Tree& c : t.children) collect_tokens(c, leaves);
}

}  // namespace

Document ingest_brackets(std::string_view bytes, const DCS& dcs,
                         const Registry& reg) {
  std::vector<Tree> roots;
  std::vector<std::string_view> lines = split(bytes, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    BracketParser parser{lines[i], 0, i + 1};
    roots.push_back(parser.parse_line());
  }

  std::string text;
  for (std::size_t s = 0; s < roots.size(); ++s) {
    std::vector<const Tree*> leaves;
    collect_tokens(roots[s], leaves);
    if (s) text += '\n';
    for (std::size_t t = 0; t < leaves.size(); ++t) {
      if (t) text += ' ';
      text += leaves[t]->token;
    }
  }

  DocumentBuilder b;
  b.add_primary(make_inline_primary("text", kChar, text));
  b.add_layer({"seg", {"text"}, dcs.scheme});
  b.add_layer({"syn", {"seg"}, dcs.scheme});
  std::uint64_t offset = 0;
  std::size_t token_no = 0, interior_no = 0;

  // bottom-up: leaves get regions in text order, interiors target children
  auto build = [&](auto&& self, const Tree& t, std::size_t lineno) -> TargetRef {
    if (!t.token.empty()) {
      ++token_no;
      require_tag(t.label, lineno, token_no);
      auto len = static_cast<std::uint64_t>(utf8_length(t.token));
      std::string rid = "r" + std::to_string(token_no);
      std::string tid = "t" + std::to_string(token_no);
      b.add_region(make_region(rid, "text", kChar,
                               std::vector<std::int64_t>{
                                   static_cast<std::int64_t>(offset),
                                   static_cast<std::int64_t>(offset + len)}));
      b.add_node({tid, "seg", CategoryRef::registry("TOKEN"),
                  {TargetRef::region(rid)},
                  {{CategoryRef::local(dcs.scheme, "pos"),
                    FeatureValue::of_category(
                        CategoryRef::local(dcs.scheme, t.label))}}});
      offset += len + 1;
      return TargetRef::node(tid);
    }
    std::vector<TargetRef> children;
    for (const Tree& c : t.children) children.push_back(self(self, c, lineno));
    ++interior_no;
    require_tag(t.label, lineno, 0);
    std::string xid = "x" + std::to_string(interior_no);
    b.add_node({xid, "syn", CategoryRef::local(dcs.scheme, t.label),
                std::move(children), {}});
    return TargetRef::node(xid);
  };
  for (std::size_t s = 0; s < roots.size(); ++s) {
    build(build, roots[s], s + 1);
  }
  return dcs_apply(b.close(), dcs, reg);
}

std::string emit_brackets(const Document& doc, const DCS& dcs) {
  if (doc.nodes().empty()) return "";
  EmitShape shape = discover_shape(doc, /*expect_sentences=*/false);
  if (!shape.sentences.empty()) shape_error("bracket documents have no sentences");

  std::map<std::string, const Node*> parent;
  std::vector<const Node*> interiors, tokens;
  for (const Node& n : doc.nodes()) {
    if (n.type == CategoryRef::registry("SENTENCE")) {
      shape_error("bracket documents have no sentence nodes");
    }
    (n.type == CategoryRef::registry("TOKEN") ? tokens : interiors).push_back(&n);
  }
  for (const Node* n : interiors) {
    if (n->targets.empty()) shape_error("node '" + n->nid + "' has no children");
    for (const TargetRef& t : n->targets) {
      if (t.kind != TargetRef::Kind::Node) {
        shape_error("node '" + n->nid + "' targets a region directly");
      }
      if (!parent.emplace(t.id, n).second) {
        shape_error("node '" + t.id + "' has two parents");
      }
    }
  }

  // roots in text order: parentless interiors and parentless tokens
  std::vector<std::pair<std::uint64_t, const Node*>> roots;
  for (const Node* n : interiors) {
    if (!parent.count(n->nid)) {
      Region fp = doc.footprint(n->nid);
      if (fp.boxes.empty()) shape_error("node '" + n->nid + "' covers no text");
      roots.emplace_back(fp.boxes[0][0].start, n);
    }
  }
  for (const Node* n : tokens) {
    if (!parent.count(n->nid)) {
      roots.emplace_back(doc.footprint(n->nid).boxes[0][0].start, n);
    }
  }
  std::sort(roots.begin(), roots.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->nid < b.second->nid;
  });

  auto token_views = [&] {
    std::map<std::string, TokenView> views;
    for (const Node* n : tokens) {
      if (n->targets.size() != 1 || n->targets[0].kind != TargetRef::Kind::Region) {
        shape_error("token '" + n->nid + "' must target exactly one region");
      }
      const Region* r = doc.find_region(n->targets[0].id);
      if (r->boxes.size() != 1) shape_error("token '" + n->nid + "' is discontinuous");
      TokenView v;
      v.node = n;
      v.start = r->boxes[0][0].start;
      v.end = r->boxes[0][0].end;
      v.text = utf8_slice(shape.primary_text, v.start, v.end);
      views[n->nid] = v;
    }
    return views;
  }();

  auto interior_label = [&](const Node* n) {
    std::vector<std::string> names;
    for (const auto& [name, target] : dcs.descriptor_map) {
      if (!n->type.is_local() && target == n->type.name) names.push_back(name);
    }
    if (names.empty()) {
      throw Error(Errc::no_preimage, "label '" + n->type.token() +
                                         "' has no scheme name (at node " +
                                         n->nid + ")");
    }
    if (names.size() > 1) {
      throw Error(Errc::ambiguous_preimage,
                  "label '" + n->type.token() + "' has several scheme names");
    }
    return names.front();
  };

  std::set<std::string> emitted;
  auto render = [&](auto&& self, const Node* n) -> std::string {
    if (n->type == CategoryRef::registry("TOKEN")) {
      const TokenView& view = token_views.at(n->nid);
      require_plain_token(view.text, n->nid, /*allow_space=*/false);
      emitted.insert(n->nid);
      return "(" + token_tag(doc, dcs, *n) + " " + view.text + ")";
    }
    std::string out = "(" + interior_label(n);
    for (const TargetRef& t : n->targets) {
      out += " " + self(self, doc.find_node(t.id));
    }
    out += ")";
    return out;
  };

  std::string out;
  for (const auto& [start, root] : roots) {
    out += render(render, root);
    out += '\n';
  }
  for (const Node* n : tokens) {
    if (!emitted.count(n->nid)) {
      shape_error("token '" + n->nid + "' is not reachable from any root");
    }
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(std::string_view bytes) {
  std::vector<ManifestEntry> out;
  std::size_t lineno = 0;
  for (std::string_view line : split(bytes, '\n')) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw Error(Errc::arity_error,
                  "manifest line needs format, layers, dcs reference", lineno);
    }
    ManifestEntry e;
    e.format = std::string(fields[0]);
    for (std::string_view l : split(fields[1], ',')) {
      if (!l.empty()) e.layers.emplace_back(l);
    }
    e.dcs_ref = std::string(fields[2]);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace laf
