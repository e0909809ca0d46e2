#include "laf/dump.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "laf/sha256.hpp"
#include "laf/util.hpp"

namespace laf {

namespace {

constexpr std::string_view kMagic = "#LAF-DUMP 1";

Error with_line(const Error& e, std::size_t line) {
  std::string msg = e.what();
  std::string prefix = std::string(errc_name(e.code())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
  return Error(e.code(), msg, e.line() ? e.line() : line, e.ids());
}

}  // namespace

std::string escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (std::size_t i = 0; i < token.size(); ++i) {
    if (token[i] != '\\') {
      out += token[i];
      continue;
    }
    if (i + 1 == token.size()) {
      throw Error(Errc::dangling_escape, "token ends with a bare backslash");
    }
    switch (token[++i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case '\\': out += '\\'; break;
      default:
        throw Error(Errc::unknown_escape,
                    std::string("unknown escape '\\") + token[i] + "'");
    }
  }
  return out;
}

std::optional<std::string> resolve_primary_content(const PrimaryDataRef& p,
                                                   const std::string& base_dir) {
  if (p.uri.rfind("data:,", 0) == 0) return p.uri.substr(6);
  std::string path = p.uri;
  if (path.rfind("file:", 0) == 0) path = path.substr(5);
  if (path.empty()) return std::nullopt;
  std::filesystem::path fp(path);
  if (fp.is_relative() && !base_dir.empty()) {
    fp = std::filesystem::path(base_dir) / fp;
  }
  std::error_code ec;
  if (!std::filesystem::is_regular_file(fp, ec)) return std::nullopt;
  return read_file(fp.string());
}

PrimaryDataRef make_inline_primary(std::string pid, const AnchorSpace& space,
                                   std::string_view text) {
  PrimaryDataRef p;
  p.pid = std::move(pid);
  p.uri = "data:," + std::string(text);
  p.space = space;
  switch (space.kind) {
    case SpaceKind::Char: p.extent = {utf8_length(text)}; break;
    case SpaceKind::Byte: p.extent = {text.size()}; break;
    default:
      throw Error(Errc::precondition,
                  "inline primaries carry text; use char or byte space");
  }
  p.content_hash = sha256_hex(text);
  return p;
}

DumpRecord parse_dump_line(std::string_view line, std::size_t lineno) {
  DumpRecord rec;
  auto fields = split(line, '\t');
  for (std::string_view f : fields) rec.fields.emplace_back(f);
  const std::string& head = rec.fields.front();
  if (line == kMagic) {
    rec.kind = DumpRecord::Kind::Header;
  } else if (head == "#PRIMARY") {
    rec.kind = DumpRecord::Kind::Primary;
  } else if (head == "#LAYER") {
    rec.kind = DumpRecord::Kind::Layer;
  } else if (head == "R") {
    rec.kind = DumpRecord::Kind::R;
  } else if (head == "N") {
    rec.kind = DumpRecord::Kind::N;
  } else if (head == "F") {
    rec.kind = DumpRecord::Kind::F;
  } else if (head == "G") {
    rec.kind = DumpRecord::Kind::G;
  } else if (head == "#END") {
    rec.kind = DumpRecord::Kind::End;
  } else {
    throw Error(Errc::unknown_record_kind, "record kind '" + head + "'", lineno);
  }
  return rec;
}

namespace {

// --- record decoding, shared by the batch and streaming readers ---------

void require_fields(const DumpRecord& rec, std::size_t at_least,
                    std::size_t lineno, std::size_t exactly = 0) {
  if (rec.fields.size() < at_least || (exactly && rec.fields.size() != exactly)) {
    throw Error(Errc::arity_error,
                rec.fields.front() + " record has " +
                    std::to_string(rec.fields.size() - 1) + " fields",
                lineno);
  }
}

PrimaryDataRef decode_primary(const DumpRecord& rec, std::size_t lineno) {
  require_fields(rec, 6, lineno);
  PrimaryDataRef p;
  p.pid = rec.fields[1];
  p.uri = unescape(rec.fields[2]);
  auto space = AnchorSpace::by_name(rec.fields[3]);
  if (!space) {
    throw Error(Errc::arity_error, "unknown anchor space '" + rec.fields[3] + "'",
                lineno);
  }
  p.space = *space;
  std::size_t dim = static_cast<std::size_t>(space->dimension());
  if (rec.fields.size() != 5 + dim) {
    throw Error(Errc::arity_error, "#PRIMARY needs " + std::to_string(dim) +
                                       " extent fields",
                lineno);
  }
  for (std::size_t i = 0; i < dim; ++i) {
    auto v = parse_u64(rec.fields[4 + i]);
    if (!v) {
      throw Error(Errc::arity_error, "bad extent '" + rec.fields[4 + i] + "'",
                  lineno);
    }
    p.extent.push_back(*v);
  }
  p.content_hash = rec.fields.back();
  return p;
}

Layer decode_layer(const DumpRecord& rec, std::size_t lineno) {
  require_fields(rec, 4, lineno, 4);
  Layer l;
  l.lid = rec.fields[1];
  for (std::string_view dep : split(rec.fields[2], ',')) {
    if (!dep.empty()) l.depends_on.emplace_back(dep);
  }
  l.dcs_ref = rec.fields[3] == "-" ? std::string() : unescape(rec.fields[3]);
  return l;
}

std::vector<std::uint64_t> decode_coords(const DumpRecord& rec, std::size_t lineno) {
  std::vector<std::uint64_t> coords;
  for (std::size_t i = 3; i < rec.fields.size(); ++i) {
    auto v = parse_u64(rec.fields[i]);
    if (!v) {
      throw Error(Errc::arity_error, "bad coordinate '" + rec.fields[i] + "'",
                  lineno);
    }
    coords.push_back(*v);
  }
  return coords;
}

TargetRef decode_target(const std::string& token, std::size_t lineno) {
  if (token.rfind("r:", 0) == 0) return TargetRef::region(token.substr(2));
  if (token.rfind("n:", 0) == 0) return TargetRef::node(token.substr(2));
  throw Error(Errc::arity_error, "bad target '" + token + "'", lineno);
}

FeatureValue decode_value(const std::string& token, std::size_t lineno,
                          bool allow_group) {
  if (token.rfind("c:", 0) == 0) {
    return FeatureValue::of_category(CategoryRef::parse(token.substr(2)));
  }
  if (token.rfind("s:", 0) == 0) {
    return FeatureValue::of_literal(unescape(token.substr(2)));
  }
  if (allow_group && token.rfind("g:", 0) == 0) {
    return FeatureValue::of_group(token.substr(2));
  }
  throw Error(Errc::arity_error, "bad value token '" + token + "'", lineno);
}

Node decode_node(const DumpRecord& rec, std::size_t lineno) {
  require_fields(rec, 4, lineno);
  Node n;
  n.nid = rec.fields[1];
  n.layer = rec.fields[2];
  n.type = CategoryRef::parse(rec.fields[3]);
  for (std::size_t i = 4; i < rec.fields.size(); ++i) {
    n.targets.push_back(decode_target(rec.fields[i], lineno));
  }
  return n;
}

std::pair<std::string, FeatureAssignment> decode_feature(const DumpRecord& rec,
                                                         std::size_t lineno) {
  require_fields(rec, 4, lineno, 4);
  FeatureAssignment fa;
  fa.descriptor = CategoryRef::parse(rec.fields[2]);
  fa.value = decode_value(rec.fields[3], lineno, /*allow_group=*/true);
  return {rec.fields[1], std::move(fa)};
}

Group decode_group(const DumpRecord& rec, std::size_t lineno) {
  require_fields(rec, 4, lineno);
  Group g;
  g.gid = rec.fields[1];
  auto kind = group_kind_by_name(rec.fields[2]);
  if (!kind) {
    throw Error(Errc::arity_error, "bad group kind '" + rec.fields[2] + "'",
                lineno);
  }
  g.kind = *kind;
  for (std::size_t i = 3; i < rec.fields.size(); ++i) {
    const std::string& token = rec.fields[i];
    if (token.rfind("n:", 0) == 0) {
      g.members.push_back(GroupMember::of_node(token.substr(2)));
    } else {
      g.members.push_back(
          GroupMember::of_value(decode_value(token, lineno, /*allow_group=*/false)));
    }
  }
  return g;
}

std::size_t decode_end(const DumpRecord& rec, std::size_t lineno) {
  require_fields(rec, 2, lineno, 2);
  auto v = parse_u64(rec.fields[1]);
  if (!v) {
    throw Error(Errc::arity_error, "bad record count '" + rec.fields[1] + "'",
                lineno);
  }
  return *v;
}

// --- record emission ------------------------------------------------------

std::string value_token(const FeatureValue& v) {
  switch (v.kind) {
    case FeatureValue::Kind::Category: return "c:" + v.category.token();
    case FeatureValue::Kind::Literal: return "s:" + escape(v.text);
    case FeatureValue::Kind::GroupRef: return "g:" + v.gid;
  }
  return {};
}

void emit_record(std::string& out, const Document& d, const LogEntry& e) {
  switch (e.kind) {
    case RecordKind::Primary: {
      const PrimaryDataRef& p = d.primaries()[e.index];
      out += "#PRIMARY\t" + p.pid + "\t" + escape(p.uri) + "\t" +
             std::string(p.space.name());
      for (std::uint64_t x : p.extent) out += "\t" + std::to_string(x);
      out += "\t" + p.content_hash;
      break;
    }
    case RecordKind::Layer: {
      const Layer& l = d.layers()[e.index];
      out += "#LAYER\t" + l.lid + "\t" + join(l.depends_on, ',') + "\t" +
             (l.dcs_ref.empty() ? "-" : escape(l.dcs_ref));
      break;
    }
    case RecordKind::Region: {
      const Region& r = d.regions()[e.index];
      out += "R\t" + r.rid + "\t" + r.pid;
      for (std::uint64_t c : region_coords(r)) out += "\t" + std::to_string(c);
      break;
    }
    case RecordKind::Node: {
      const Node& n = d.nodes()[e.index];
      out += "N\t" + n.nid + "\t" + n.layer + "\t" + n.type.token();
      for (const TargetRef& t : n.targets) {
        out += t.kind == TargetRef::Kind::Region ? "\tr:" : "\tn:";
        out += t.id;
      }
      break;
    }
    case RecordKind::Feature: {
      const Node& n = d.nodes()[e.index];
      const FeatureAssignment& fa = n.features[e.sub];
      out += "F\t" + n.nid + "\t" + fa.descriptor.token() + "\t" +
             value_token(fa.value);
      break;
    }
    case RecordKind::Group: {
      const Group& g = d.groups()[e.index];
      out += "G\t" + g.gid + "\t" + std::string(group_kind_name(g.kind));
      for (const GroupMember& m : g.members) {
        out += "\t";
        out += m.kind == GroupMember::Kind::Node ? "n:" + m.nid
                                                 : value_token(m.value);
      }
      break;
    }
  }
  out += '\n';
}

}  // namespace

DumpLayout write_dump_layout(const Document& doc) {
  Document canon = canonicalize(doc);
  DumpLayout layout;
  layout.header = std::string(kMagic) + "\n";
  std::map<std::string, std::size_t> seg_ix;
  for (const std::string& lid : canon.layer_order()) {
    seg_ix[lid] = layout.segments.size();
    layout.segments.emplace_back(lid, std::string());
    layout.segment_records.push_back(0);
  }
  for (const LogEntry& e : canon.log()) {
    if (e.kind == RecordKind::Primary || e.kind == RecordKind::Layer) {
      emit_record(layout.header, canon, e);
      ++layout.header_records;
    } else if (!e.layer_hint.empty()) {
      std::size_t ix = seg_ix.at(e.layer_hint);
      emit_record(layout.segments[ix].second, canon, e);
      ++layout.segment_records[ix];
    } else {
      emit_record(layout.trailing, canon, e);
      ++layout.trailing_records;
    }
  }
  return layout;
}

std::string write_dump(const Document& doc, bool canonical) {
  if (canonical) {
    DumpLayout layout = write_dump_layout(doc);
    std::string out = std::move(layout.header);
    std::size_t count = layout.header_records + layout.trailing_records;
    for (std::size_t i = 0; i < layout.segments.size(); ++i) {
      out += layout.segments[i].second;
      count += layout.segment_records[i];
    }
    out += layout.trailing;
    out += "#END\t" + std::to_string(count) + "\n";
    return out;
  }
  std::string out = std::string(kMagic) + "\n";
  for (const LogEntry& e : doc.log()) emit_record(out, doc, e);
  out += "#END\t" + std::to_string(doc.log().size()) + "\n";
  return out;
}

namespace {

void verify_hashes(const Document& doc, const ReadOptions& opts) {
  if (!opts.verify_hashes) return;
  for (const PrimaryDataRef& p : doc.primaries()) {
    auto content = resolve_primary_content(p, opts.base_dir);
    if (content && sha256_hex(*content) != p.content_hash) {
      throw Error(Errc::hash_mismatch,
                  "primary '" + p.pid + "' content does not match its hash");
    }
  }
}

}  // namespace

Document read_dump(std::string_view bytes, const ReadOptions& opts) {
  std::vector<std::string_view> lines = split(bytes, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines[0] != kMagic) {
    throw Error(Errc::bad_magic, "expected '" + std::string(kMagic) + "'", 1);
  }
  DocumentBuilder builder;
  bool ended = false;
  std::size_t records = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::size_t lineno = i + 1;
    if (ended) {
      throw Error(Errc::trailing_data, "content after #END", lineno);
    }
    if (lines[i].empty()) {
      throw Error(Errc::arity_error, "empty line", lineno);
    }
    DumpRecord rec = parse_dump_line(lines[i], lineno);
    try {
      switch (rec.kind) {
        case DumpRecord::Kind::Header:
          throw Error(Errc::unknown_record_kind, "magic line repeated", lineno);
        case DumpRecord::Kind::Primary:
          builder.add_primary(decode_primary(rec, lineno));
          ++records;
          break;
        case DumpRecord::Kind::Layer:
          builder.add_layer(decode_layer(rec, lineno));
          ++records;
          break;
        case DumpRecord::Kind::R: {
          require_fields(rec, 5, lineno);
          builder.add_region_raw(rec.fields[1], rec.fields[2],
                                 decode_coords(rec, lineno));
          ++records;
          break;
        }
        case DumpRecord::Kind::N:
          builder.add_node(decode_node(rec, lineno));
          ++records;
          break;
        case DumpRecord::Kind::F: {
          auto [nid, fa] = decode_feature(rec, lineno);
          builder.add_feature(nid, std::move(fa));
          ++records;
          break;
        }
        case DumpRecord::Kind::G:
          builder.add_group(decode_group(rec, lineno));
          ++records;
          break;
        case DumpRecord::Kind::End: {
          std::size_t declared = decode_end(rec, lineno);
          if (declared != records) {
            throw Error(Errc::count_mismatch,
                        "#END declares " + std::to_string(declared) +
                            " records, saw " + std::to_string(records),
                        lineno);
          }
          ended = true;
          break;
        }
      }
    } catch (const Error& e) {
      throw with_line(e, lineno);
    }
  }
  if (!ended) {
    throw Error(Errc::count_mismatch, "input ends without #END");
  }
  Document doc;
  try {
    doc = builder.close();
  } catch (const Error& e) {
    if (e.code() == Errc::unresolved_reference) {
      throw Error(Errc::unresolved_at_end, "unresolved at #END: " + join(e.ids(), ' '),
                  0, e.ids());
    }
    throw;
  }
  verify_hashes(doc, opts);
  return doc;
}

// --- streaming reader ------------------------------------------------------

StreamReader::StreamReader(ReadOptions opts) : opts_(std::move(opts)) {}

void StreamReader::emit_error(Errc code, std::string message) {
  StreamEvent ev;
  ev.kind = StreamEvent::Kind::Error;
  ev.error = code;
  ev.message = std::move(message);
  ev.line = lineno_;
  events_.push_back(std::move(ev));
  failed_ = true;
}

// Duplicate check happens before the Seen event is queued; the pending-set
// sweep (which emits ReferenceResolved) happens after it, so resolution
// always follows the record that resolves it.
void StreamReader::declare(const std::string& id, std::set<std::string>& declared,
                           std::initializer_list<std::set<std::string>*> pendings) {
  declared.insert(id);
  bool was_pending = false;
  for (std::set<std::string>* p : pendings) {
    was_pending = p->erase(id) > 0 || was_pending;
  }
  if (was_pending) {
    StreamEvent ev;
    ev.kind = StreamEvent::Kind::ReferenceResolved;
    ev.id = id;
    events_.push_back(std::move(ev));
  }
}

void StreamReader::check_new(const std::string& id,
                             const std::set<std::string>& declared) const {
  if (declared.count(id)) {
    throw Error(Errc::duplicate_id, "'" + id + "' declared twice", lineno_);
  }
}

void StreamReader::reference(const std::string& id,
                             const std::set<std::string>& declared,
                             std::set<std::string>& pending) {
  if (!declared.count(id)) pending.insert(id);
}

void StreamReader::reference2(const std::string& id,
                              const std::set<std::string>& da,
                              const std::set<std::string>& db,
                              std::set<std::string>& pending) {
  if (!da.count(id) && !db.count(id)) pending.insert(id);
}

void StreamReader::feed(std::string_view bytes) {
  if (failed_) return;
  buffer_.append(bytes);
  std::size_t start = 0;
  while (!failed_) {
    std::size_t nl = buffer_.find('\n', start);
    if (nl == std::string::npos) break;
    std::string_view line(buffer_.data() + start, nl - start);
    ++lineno_;
    process_line(line);
    start = nl + 1;
  }
  buffer_.erase(0, start);
}

void StreamReader::finish() {
  if (finished_ || failed_) return;
  finished_ = true;
  if (!buffer_.empty()) {
    ++lineno_;
    std::string tail;
    tail.swap(buffer_);
    process_line(tail);
  }
  if (failed_ || ended_) return;
  std::vector<std::string> ids;
  for (const auto* p : {&pend_primary_, &pend_dep_, &pend_layer_, &pend_region_,
                        &pend_node_, &pend_group_}) {
    ids.insert(ids.end(), p->begin(), p->end());
  }
  if (!ids.empty()) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    emit_error(Errc::unresolved_at_end, "unresolved at end of input: " + join(ids, ' '));
  } else {
    emit_error(Errc::count_mismatch, "input ends without #END");
  }
}

void StreamReader::process_line(std::string_view line) {
  try {
    if (!saw_magic_) {
      if (line != kMagic) {
        throw Error(Errc::bad_magic, "expected '" + std::string(kMagic) + "'",
                    lineno_);
      }
      saw_magic_ = true;
      StreamEvent ev;
      ev.kind = StreamEvent::Kind::DocumentStart;
      events_.push_back(std::move(ev));
      return;
    }
    if (ended_) {
      throw Error(Errc::trailing_data, "content after #END", lineno_);
    }
    if (line.empty()) {
      throw Error(Errc::arity_error, "empty line", lineno_);
    }
    DumpRecord rec = parse_dump_line(line, lineno_);
    switch (rec.kind) {
      case DumpRecord::Kind::Header:
        throw Error(Errc::unknown_record_kind, "magic line repeated", lineno_);
      case DumpRecord::Kind::Primary: {
        PrimaryDataRef p = decode_primary(rec, lineno_);
        check_new(p.pid, primaries_);
        ++body_records_;
        StreamEvent ev;
        ev.kind = StreamEvent::Kind::PrimaryDeclared;
        ev.primary = p;
        events_.push_back(std::move(ev));
        declare(p.pid, primaries_, {&pend_primary_, &pend_dep_});
        if (opts_.verify_hashes) {
          auto content = resolve_primary_content(p, opts_.base_dir);
          if (content && sha256_hex(*content) != p.content_hash) {
            throw Error(Errc::hash_mismatch,
                        "primary '" + p.pid + "' content does not match its hash",
                        lineno_);
          }
        }
        break;
      }
      case DumpRecord::Kind::Layer: {
        Layer l = decode_layer(rec, lineno_);
        check_new(l.lid, layers_);
        ++body_records_;
        StreamEvent ev;
        ev.kind = StreamEvent::Kind::LayerDeclared;
        ev.layer = l;
        events_.push_back(std::move(ev));
        declare(l.lid, layers_, {&pend_layer_, &pend_dep_});
        for (const std::string& dep : l.depends_on) {
          reference2(dep, layers_, primaries_, pend_dep_);
        }
        break;
      }
      case DumpRecord::Kind::R: {
        require_fields(rec, 5, lineno_);
        std::vector<std::uint64_t> coords = decode_coords(rec, lineno_);
        check_new(rec.fields[1], regions_);
        ++body_records_;
        StreamEvent ev;
        ev.kind = StreamEvent::Kind::RegionSeen;
        ev.rid = rec.fields[1];
        ev.pid = rec.fields[2];
        ev.coords = std::move(coords);
        events_.push_back(std::move(ev));
        declare(rec.fields[1], regions_, {&pend_region_});
        reference(rec.fields[2], primaries_, pend_primary_);
        break;
      }
      case DumpRecord::Kind::N: {
        Node n = decode_node(rec, lineno_);
        check_new(n.nid, nodes_);
        ++body_records_;
        StreamEvent ev;
        ev.kind = StreamEvent::Kind::NodeSeen;
        ev.node = n;
        events_.push_back(std::move(ev));
        declare(n.nid, nodes_, {&pend_node_});
        reference(n.layer, layers_, pend_layer_);
        for (const TargetRef& t : n.targets) {
          if (t.kind == TargetRef::Kind::Region) {
            reference(t.id, regions_, pend_region_);
          } else {
            reference(t.id, nodes_, pend_node_);
          }
        }
        break;
      }
      case DumpRecord::Kind::F: {
        auto [nid, fa] = decode_feature(rec, lineno_);
        ++body_records_;
        StreamEvent ev;
        ev.kind = StreamEvent::Kind::FeatureSeen;
        ev.nid = nid;
        ev.feature = fa;
        events_.push_back(std::move(ev));
        reference(nid, nodes_, pend_node_);
        if (fa.value.kind == FeatureValue::Kind::GroupRef) {
          reference(fa.value.gid, groups_, pend_group_);
        }
        break;
      }
      case DumpRecord::Kind::G: {
        Group g = decode_group(rec, lineno_);
        check_new(g.gid, groups_);
        ++body_records_;
        StreamEvent ev;
        ev.kind = StreamEvent::Kind::GroupSeen;
        ev.group = g;
        events_.push_back(std::move(ev));
        declare(g.gid, groups_, {&pend_group_});
        for (const GroupMember& m : g.members) {
          if (m.kind == GroupMember::Kind::Node) {
            reference(m.nid, nodes_, pend_node_);
          }
        }
        break;
      }
      case DumpRecord::Kind::End: {
        std::size_t declared_count = decode_end(rec, lineno_);
        std::vector<std::string> ids;
        for (const auto* p : {&pend_primary_, &pend_dep_, &pend_layer_,
                              &pend_region_, &pend_node_, &pend_group_}) {
          ids.insert(ids.end(), p->begin(), p->end());
        }
        if (!ids.empty()) {
          std::sort(ids.begin(), ids.end());
          ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
          throw Error(Errc::unresolved_at_end,
                      "unresolved at #END: " + join(ids, ' '), lineno_, ids);
        }
        if (declared_count != body_records_) {
          throw Error(Errc::count_mismatch,
                      "#END declares " + std::to_string(declared_count) +
                          " records, saw " + std::to_string(body_records_),
                      lineno_);
        }
        ended_ = true;
        StreamEvent ev;
        ev.kind = StreamEvent::Kind::DocumentEnd;
        ev.record_count = body_records_;
        events_.push_back(std::move(ev));
        break;
      }
    }
  } catch (const Error& e) {
    emit_error(e.code(), e.what());
  }
}

std::optional<StreamEvent> StreamReader::poll() {
  if (events_.empty()) return std::nullopt;
  StreamEvent ev = std::move(events_.front());
  events_.pop_front();
  return ev;
}

std::vector<StreamEvent> stream_read(std::string_view bytes,
                                     const ReadOptions& opts) {
  StreamReader reader(opts);
  reader.feed(bytes);
  reader.finish();
  std::vector<StreamEvent> events;
  while (auto ev = reader.poll()) events.push_back(std::move(*ev));
  return events;
}

Document fold_events(std::span<const StreamEvent> events) {
  DocumentBuilder builder;
  for (const StreamEvent& ev : events) {
    switch (ev.kind) {
      case StreamEvent::Kind::DocumentStart:
      case StreamEvent::Kind::ReferenceResolved:
        break;
      case StreamEvent::Kind::PrimaryDeclared:
        builder.add_primary(ev.primary);
        break;
      case StreamEvent::Kind::LayerDeclared:
        builder.add_layer(ev.layer);
        break;
      case StreamEvent::Kind::RegionSeen:
        builder.add_region_raw(ev.rid, ev.pid, ev.coords);
        break;
      case StreamEvent::Kind::NodeSeen:
        builder.add_node(ev.node);
        break;
      case StreamEvent::Kind::FeatureSeen:
        builder.add_feature(ev.nid, ev.feature);
        break;
      case StreamEvent::Kind::GroupSeen:
        builder.add_group(ev.group);
        break;
      case StreamEvent::Kind::DocumentEnd:
        return builder.close();
      case StreamEvent::Kind::Error:
        throw Error(ev.error, ev.message, ev.line);
    }
  }
  throw Error(Errc::count_mismatch, "event stream ends without DocumentEnd");
}

}  // namespace laf
