#include "laf/dcr.hpp"

#include <algorithm>
#include <set>

#include "laf/dump.hpp"
#include "laf/errors.hpp"
#include "laf/util.hpp"

namespace laf {

namespace {

std::string_view kind_name(DataCategoryEntry::Kind k) {
  return k == DataCategoryEntry::Kind::Descriptor ? "descriptor" : "value";
}

}  // namespace

std::vector<DataCategoryEntry> parse_entry_blocks(std::string_view bytes,
                                                  std::size_t first_lineno) {
  std::vector<DataCategoryEntry> entries;
  DataCategoryEntry cur;
  bool open = false;
  std::size_t lineno = first_lineno - 1;
  auto flush = [&] {
    if (open) entries.push_back(std::move(cur));
    cur = {};
    open = false;
  };
  for (std::string_view line : split(bytes, '\n')) {
    ++lineno;
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '\t') {
      if (!open) {
        throw Error(Errc::arity_error, "continuation line outside an entry",
                    lineno);
      }
      auto fields = split(line.substr(1), '\t');
      const std::string_view tag = fields[0];
      if (tag == "VAL") {
        if (fields.size() != 2 || !is_identifier(fields[1])) {
          throw Error(Errc::arity_error, "VAL needs one value id", lineno);
        }
        cur.allowed_values.emplace_back(fields[1]);
        continue;
      }
      if (tag != "NAME" && tag != "DEF" && tag != "NOTE") {
        throw Error(Errc::arity_error,
                    "unknown entry line '" + std::string(tag) + "'", lineno);
      }
      if (fields.size() != 3 || !is_identifier(fields[1])) {
        throw Error(Errc::arity_error,
                    std::string(tag) + " needs a language code and a text",
                    lineno);
      }
      auto pair = std::make_pair(std::string(fields[1]), unescape(fields[2]));
      if (tag == "NAME") cur.names.push_back(std::move(pair));
      if (tag == "DEF") cur.definitions.push_back(std::move(pair));
      if (tag == "NOTE") cur.notes.push_back(std::move(pair));
      continue;
    }
    auto fields = split(line, '\t');
    if (fields[0] != "ENTRY") {
      throw Error(Errc::arity_error,
                  "expected ENTRY, got '" + std::string(fields[0]) + "'", lineno);
    }
    if (fields.size() != 3 || !is_identifier(fields[1])) {
      throw Error(Errc::arity_error, "ENTRY needs an id and a kind", lineno);
    }
    flush();
    open = true;
    cur.id = std::string(fields[1]);
    if (fields[2] == "descriptor") {
      cur.kind = DataCategoryEntry::Kind::Descriptor;
    } else if (fields[2] == "value") {
      cur.kind = DataCategoryEntry::Kind::Value;
    } else {
      throw Error(Errc::arity_error,
                  "entry kind must be descriptor or value, got '" +
                      std::string(fields[2]) + "'",
                  lineno);
    }
  }
  flush();
  return entries;
}

void Registry::insert(DataCategoryEntry entry) {
  if (index_.count(entry.id)) {
    throw Error(Errc::duplicate_entry_id, "entry '" + entry.id + "'");
  }
  if (entry.names.empty() || entry.definitions.empty()) {
    throw Error(Errc::missing_name,
                "entry '" + entry.id +
                    "' needs at least one language name and definition");
  }
  if (entry.kind == DataCategoryEntry::Kind::Value &&
      !entry.allowed_values.empty()) {
    throw Error(Errc::kind_mismatch,
                "value entry '" + entry.id + "' may not list allowed values");
  }
  index_[entry.id] = entries_.size();
  entries_.push_back(std::move(entry));
}

void Registry::validate_closure() const {
  for (const DataCategoryEntry& e : entries_) {
    for (const std::string& v : e.allowed_values) {
      const DataCategoryEntry* target = find(v);
      if (!target) {
        throw Error(Errc::unknown_value_ref,
                    "entry '" + e.id + "' lists unknown value '" + v + "'");
      }
      if (target->kind != DataCategoryEntry::Kind::Value) {
        throw Error(Errc::kind_mismatch,
                    "entry '" + e.id + "' lists " +
                        std::string(kind_name(target->kind)) + " '" + v +
                        "' as a value");
      }
    }
  }
}

Registry Registry::load(std::string_view bytes, std::string source) {
  Registry reg;
  reg.source_ = std::move(source);
  for (DataCategoryEntry& e : parse_entry_blocks(bytes)) {
    reg.insert(std::move(e));
  }
  reg.validate_closure();
  return reg;
}

const DataCategoryEntry* Registry::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

Registry Registry::merged_with(std::span<const DataCategoryEntry> locals) const {
  Registry merged = *this;
  for (const DataCategoryEntry& e : locals) {
    merged.insert(e);
  }
  merged.validate_closure();
  return merged;
}

Registry::EntryView Registry::lookup(std::string_view id,
                                     std::string_view lang) const {
  const DataCategoryEntry* e = find(id);
  if (!e) throw Error(Errc::unknown_id, "no entry '" + std::string(id) + "'");
  EntryView view;
  view.entry = e;
  auto pick = [&](const std::vector<std::pair<std::string, std::string>>& texts,
                  std::string* out, std::string* used) {
    for (const auto& [l, t] : texts) {
      if (l == lang) {
        *out = t;
        *used = l;
        return false;
      }
    }
    *out = texts.front().second;
    *used = texts.front().first;
    return true;
  };
  std::string name_lang, def_lang;
  bool fb_name = pick(e->names, &view.name, &name_lang);
  bool fb_def = pick(e->definitions, &view.definition, &def_lang);
  view.fallback = fb_name || fb_def;
  view.lang = fb_name ? name_lang : std::string(lang);
  return view;
}

Registry::CompatResult Registry::check_compat(std::string_view descriptor_id,
                                              const FeatureValue& value,
                                              const Document* doc) const {
  const DataCategoryEntry* d = find(descriptor_id);
  if (!d) {
    throw Error(Errc::unknown_id, "no entry '" + std::string(descriptor_id) + "'");
  }
  if (d->kind != DataCategoryEntry::Kind::Descriptor) {
    throw Error(Errc::not_a_descriptor,
                "'" + std::string(descriptor_id) + "' is a value entry");
  }
  auto fail = [&](std::string reason) {
    return CompatResult{false, std::move(reason)};
  };
  switch (value.kind) {
    case FeatureValue::Kind::Literal:
      if (!d->allowed_values.empty()) {
        return fail("descriptor '" + d->id + "' is enumerated, got literal '" +
                    value.text + "'");
      }
      return {};
    case FeatureValue::Kind::Category: {
      if (value.category.is_local()) {
        return fail("descriptor '" + d->id + "' given unresolved token '" +
                    value.category.token() + "'");
      }
      if (d->allowed_values.empty()) {
        return fail("descriptor '" + d->id + "' takes literals, got '" +
                    value.category.name + "'");
      }
      if (std::find(d->allowed_values.begin(), d->allowed_values.end(),
                    value.category.name) == d->allowed_values.end()) {
        return fail("'" + value.category.name + "' is not an allowed value of '" +
                    d->id + "'");
      }
      return {};
    }
    case FeatureValue::Kind::GroupRef: {
      if (!doc) return fail("group value '" + value.gid + "' cannot be resolved");
      const Group* g = doc->find_group(value.gid);
      if (!g) return fail("group value '" + value.gid + "' cannot be resolved");
      for (const GroupMember& m : g->members) {
        if (m.kind != GroupMember::Kind::Value) {
          return fail("group '" + value.gid + "' aggregates nodes, not values");
        }
        CompatResult r = check_compat(descriptor_id, m.value, doc);
        if (!r.ok) return r;
      }
      return {};
    }
  }
  return {};
}

namespace {

void append_entry(std::string& out, const DataCategoryEntry& e) {
  out += "ENTRY\t" + e.id + "\t" + std::string(kind_name(e.kind)) + "\n";
  for (const auto& [lang, text] : e.names) {
    out += "\tNAME\t" + lang + "\t" + escape(text) + "\n";
  }
  for (const auto& [lang, text] : e.definitions) {
    out += "\tDEF\t" + lang + "\t" + escape(text) + "\n";
  }
  for (const std::string& v : e.allowed_values) {
    out += "\tVAL\t" + v + "\n";
  }
  for (const auto& [lang, text] : e.notes) {
    out += "\tNOTE\t" + lang + "\t" + escape(text) + "\n";
  }
  out += "\n";
}

}  // namespace

std::string Registry::to_bytes() const {
  std::string out;
  for (const DataCategoryEntry& e : entries_) append_entry(out, e);
  return out;
}

DCS DCS::parse(std::string_view bytes) {
  DCS dcs;
  std::size_t lineno = 0;
  std::vector<std::string_view> lines = split(bytes, '\n');
  std::size_t i = 0;
  bool saw_scheme = false;
  for (; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    const std::string_view tag = fields[0];
    if (tag == "SCHEME") {
      if (saw_scheme) {
        throw Error(Errc::duplicate_scheme_name, "second SCHEME line", lineno);
      }
      if (fields.size() != 2 || !is_identifier(fields[1])) {
        throw Error(Errc::arity_error, "SCHEME needs one name", lineno);
      }
      dcs.scheme = std::string(fields[1]);
      saw_scheme = true;
      continue;
    }
    if (!saw_scheme) {
      throw Error(Errc::arity_error, "SCHEME must come first", lineno);
    }
    if (tag == "MAPD") {
      if (fields.size() != 3 || !is_identifier(fields[1]) ||
          !is_identifier(fields[2])) {
        throw Error(Errc::arity_error, "MAPD <scheme-descriptor> <registry-id>",
                    lineno);
      }
      std::string name(fields[1]);
      if (!dcs.descriptor_map.emplace(name, std::string(fields[2])).second) {
        throw Error(Errc::duplicate_scheme_name,
                    "descriptor '" + name + "' mapped twice", lineno);
      }
      continue;
    }
    if (tag == "MAPV") {
      if (fields.size() != 4 || !is_identifier(fields[1]) ||
          !is_identifier(fields[2]) || !is_identifier(fields[3])) {
        throw Error(Errc::arity_error,
                    "MAPV <scheme-descriptor> <scheme-value> <registry-id>",
                    lineno);
      }
      auto key = std::make_pair(std::string(fields[1]), std::string(fields[2]));
      if (!dcs.value_map.emplace(key, std::string(fields[3])).second) {
        throw Error(Errc::duplicate_scheme_name,
                    "value '" + key.first + "/" + key.second + "' mapped twice",
                    lineno);
      }
      continue;
    }
    if (tag == "LOCAL") {
      std::string rest;
      for (std::size_t j = i + 1; j < lines.size(); ++j) {
        rest += std::string(lines[j]);
        rest += '\n';
      }
      try {
        dcs.local_entries = parse_entry_blocks(rest, lineno + 1);
      } catch (const Error& e) {
        throw Error(Errc::local_entry_invalid, e.what(), e.line());
      }
      break;
    }
    throw Error(Errc::arity_error, "unknown DCS line '" + std::string(tag) + "'",
                lineno);
  }
  if (!saw_scheme) {
    throw Error(Errc::arity_error, "DCS without SCHEME line");
  }
  return dcs;
}

DCS DCS::load(std::string_view bytes, const Registry& reg) {
  DCS dcs = parse(bytes);

  // Local entries are validated exactly like registry definitions.
  Registry merged;
  try {
    merged = reg.merged_with(dcs.local_entries);
  } catch (const Error& e) {
    throw Error(Errc::local_entry_invalid, e.what());
  }
  for (const auto& [name, target] : dcs.descriptor_map) {
    if (!merged.find(target)) {
      throw Error(Errc::unknown_target,
                  "descriptor '" + name + "' maps to unknown '" + target + "'");
    }
  }
  for (const auto& [key, target] : dcs.value_map) {
    if (!merged.find(target)) {
      throw Error(Errc::unknown_target, "value '" + key.first + "/" + key.second +
                                            "' maps to unknown '" + target + "'");
    }
  }
  return dcs;
}

std::string DCS::to_bytes() const {
  std::string out = "SCHEME\t" + scheme + "\n";
  for (const auto& [name, target] : descriptor_map) {
    out += "MAPD\t" + name + "\t" + target + "\n";
  }
  for (const auto& [key, target] : value_map) {
    out += "MAPV\t" + key.first + "\t" + key.second + "\t" + target + "\n";
  }
  if (!local_entries.empty()) {
    out += "LOCAL\n";
    for (const DataCategoryEntry& e : local_entries) append_entry(out, e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization and inversion

namespace {

// Value names that identify a unique registry target across all of the
// scheme's descriptors; used where no descriptor context exists (node
// types, group members).
std::map<std::string, std::string> unique_value_names(const DCS& dcs) {
  std::map<std::string, std::set<std::string>> targets;
  for (const auto& [key, target] : dcs.value_map) {
    targets[key.second].insert(target);
  }
  std::map<std::string, std::string> out;
  for (const auto& [name, tgts] : targets) {
    if (tgts.size() == 1) out[name] = *tgts.begin();
  }
  return out;
}

struct Applier {
  const DCS& dcs;
  std::map<std::string, std::string> unique_values;
  std::vector<std::string> unmapped;  // "name (at id)" bullets

  explicit Applier(const DCS& d) : dcs(d), unique_values(unique_value_names(d)) {}

  bool relevant(const CategoryRef& c) const {
    return c.is_local() && c.scheme == dcs.scheme;
  }

  CategoryRef map_context_free(const CategoryRef& c, const std::string& at) {
    if (!relevant(c)) return c;
    if (auto it = dcs.descriptor_map.find(c.name); it != dcs.descriptor_map.end()) {
      return CategoryRef::registry(it->second);
    }
    if (auto it = unique_values.find(c.name); it != unique_values.end()) {
      return CategoryRef::registry(it->second);
    }
    unmapped.push_back(c.name + " (at " + at + ")");
    return c;
  }

  // Scheme-side descriptor name for a (possibly already mapped) descriptor.
  std::string scheme_descriptor_name(const CategoryRef& desc) const {
    if (relevant(desc)) return desc.name;
    if (!desc.is_local()) {
      std::string found;
      int hits = 0;
      for (const auto& [name, target] : dcs.descriptor_map) {
        if (target == desc.name) {
          found = name;
          ++hits;
        }
      }
      if (hits == 1) return found;
    }
    return {};
  }

  FeatureValue map_value(const FeatureValue& v, const CategoryRef& descriptor,
                         const std::string& at) {
    if (v.kind != FeatureValue::Kind::Category || !relevant(v.category)) return v;
    std::string dname = scheme_descriptor_name(descriptor);
    if (!dname.empty()) {
      auto it = dcs.value_map.find({dname, v.category.name});
      if (it != dcs.value_map.end()) {
        return FeatureValue::of_category(CategoryRef::registry(it->second));
      }
    }
    if (auto it = unique_values.find(v.category.name); it != unique_values.end()) {
      return FeatureValue::of_category(CategoryRef::registry(it->second));
    }
    unmapped.push_back(v.category.name + " (at " + at + ")");
    return v;
  }
};

}  // namespace

Document dcs_apply(const Document& doc, const DCS& dcs, const Registry& reg) {
  Registry merged = reg.merged_with(dcs.local_entries);
  Applier ap(dcs);

  DocumentBuilder b;
  for (const LogEntry& e : doc.log()) {
    switch (e.kind) {
      case RecordKind::Primary:
        b.add_primary(doc.primaries()[e.index]);
        break;
      case RecordKind::Layer:
        b.add_layer(doc.layers()[e.index]);
        break;
      case RecordKind::Region:
        b.add_region(doc.regions()[e.index]);
        break;
      case RecordKind::Node: {
        Node n = doc.nodes()[e.index];
        n.features.clear();
        n.type = ap.map_context_free(n.type, "node " + n.nid);
        b.add_node(std::move(n));
        break;
      }
      case RecordKind::Feature: {
        const Node& n = doc.nodes()[e.index];
        FeatureAssignment fa = n.features[e.sub];
        FeatureAssignment mapped;
        mapped.value = ap.map_value(fa.value, fa.descriptor, "node " + n.nid);
        mapped.descriptor = ap.map_context_free(fa.descriptor, "node " + n.nid);
        b.add_feature(n.nid, std::move(mapped));
        break;
      }
      case RecordKind::Group: {
        Group g = doc.groups()[e.index];
        for (GroupMember& m : g.members) {
          if (m.kind == GroupMember::Kind::Value &&
              m.value.kind == FeatureValue::Kind::Category) {
            m.value.category =
                ap.map_context_free(m.value.category, "group " + g.gid);
          }
        }
        b.add_group(std::move(g));
        break;
      }
    }
  }
  if (!ap.unmapped.empty()) {
    std::sort(ap.unmapped.begin(), ap.unmapped.end());
    ap.unmapped.erase(std::unique(ap.unmapped.begin(), ap.unmapped.end()),
                      ap.unmapped.end());
    throw Error(Errc::unmapped_category,
                "scheme '" + dcs.scheme + "' does not map: " + join(ap.unmapped, ';'),
                0, ap.unmapped);
  }
  Document out = b.close();

  std::vector<std::string> violations;
  for (const Node& n : out.nodes()) {
    for (const FeatureAssignment& fa : n.features) {
      if (fa.descriptor.is_local()) continue;  // other schemes stay untouched
      if (!merged.find(fa.descriptor.name)) continue;
      Registry::CompatResult r =
          merged.check_compat(fa.descriptor.name, fa.value, &out);
      if (!r.ok) violations.push_back("node " + n.nid + ": " + r.reason);
    }
  }
  if (!violations.empty()) {
    throw Error(Errc::compat_violation, join(violations, ';'), 0, violations);
  }
  return out;
}

namespace {

struct Inverter {
  const DCS& dcs;
  std::map<std::string, std::vector<std::string>> desc_preimages;
  std::map<std::string, std::set<std::string>> value_preimages;  // target -> names
  std::map<std::pair<std::string, std::string>, std::vector<std::string>>
      value_preimages_by_desc;  // (scheme desc, target) -> scheme value names

  explicit Inverter(const DCS& d) : dcs(d) {
    for (const auto& [name, target] : d.descriptor_map) {
      desc_preimages[target].push_back(name);
    }
    for (const auto& [key, target] : d.value_map) {
      value_preimages[target].insert(key.second);
      value_preimages_by_desc[{key.first, target}].push_back(key.second);
    }
  }

  CategoryRef invert_context_free(const CategoryRef& c, const std::string& at) {
    if (c.is_local()) return c;  // already scheme form
    auto dit = desc_preimages.find(c.name);
    if (dit != desc_preimages.end()) {
      if (dit->second.size() > 1) {
        throw Error(Errc::ambiguous_preimage,
                    "'" + c.name + "' has " + std::to_string(dit->second.size()) +
                        " scheme names (at " + at + ")");
      }
      return CategoryRef::local(dcs.scheme, dit->second.front());
    }
    auto vit = value_preimages.find(c.name);
    if (vit != value_preimages.end()) {
      if (vit->second.size() > 1) {
        throw Error(Errc::ambiguous_preimage,
                    "'" + c.name + "' has " + std::to_string(vit->second.size()) +
                        " scheme names (at " + at + ")");
      }
      return CategoryRef::local(dcs.scheme, *vit->second.begin());
    }
    throw Error(Errc::no_preimage,
                "'" + c.name + "' has no scheme name (at " + at + ")");
  }

  FeatureValue invert_value(const FeatureValue& v, const CategoryRef& inverted_desc,
                            const std::string& at) {
    if (v.kind != FeatureValue::Kind::Category || v.category.is_local()) return v;
    if (inverted_desc.is_local()) {
      auto it = value_preimages_by_desc.find(
          {inverted_desc.name, v.category.name});
      if (it != value_preimages_by_desc.end()) {
        if (it->second.size() > 1) {
          throw Error(Errc::ambiguous_preimage,
                      "'" + v.category.name + "' has " +
                          std::to_string(it->second.size()) +
                          " scheme names under '" + inverted_desc.name +
                          "' (at " + at + ")");
        }
        return FeatureValue::of_category(
            CategoryRef::local(dcs.scheme, it->second.front()));
      }
    }
    return FeatureValue::of_category(invert_context_free(v.category, at));
  }
};

}  // namespace

Document dcs_invert(const Document& doc, const DCS& dcs) {
  Inverter inv(dcs);
  DocumentBuilder b;
  for (const LogEntry& e : doc.log()) {
    switch (e.kind) {
      case RecordKind::Primary:
        b.add_primary(doc.primaries()[e.index]);
        break;
      case RecordKind::Layer:
        b.add_layer(doc.layers()[e.index]);
        break;
      case RecordKind::Region:
        b.add_region(doc.regions()[e.index]);
        break;
      case RecordKind::Node: {
        Node n = doc.nodes()[e.index];
        n.features.clear();
        n.type = inv.invert_context_free(n.type, "node " + n.nid);
        b.add_node(std::move(n));
        break;
      }
      case RecordKind::Feature: {
        const Node& n = doc.nodes()[e.index];
        FeatureAssignment fa = n.features[e.sub];
        std::string at = "node " + n.nid;
        CategoryRef desc = inv.invert_context_free(fa.descriptor, at);
        FeatureAssignment mapped;
        mapped.descriptor = desc;
        mapped.value = inv.invert_value(fa.value, desc, at);
        b.add_feature(n.nid, std::move(mapped));
        break;
      }
      case RecordKind::Group: {
        Group g = doc.groups()[e.index];
        for (GroupMember& m : g.members) {
          if (m.kind == GroupMember::Kind::Value &&
              m.value.kind == FeatureValue::Kind::Category &&
              !m.value.category.is_local()) {
            m.value.category =
                inv.invert_context_free(m.value.category, "group " + g.gid);
          }
        }
        b.add_group(std::move(g));
        break;
      }
    }
  }
  return b.close();
}

}  // namespace laf
