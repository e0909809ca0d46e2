#include "laf/layerops.hpp"

#include <algorithm>
#include <cstdio>

#include "laf/errors.hpp"
#include "laf/util.hpp"

namespace laf {

namespace {

std::string region_content_key(const Region& r) {
  std::string key = r.pid;
  for (std::uint64_t c : region_coords(r)) {
    key += ':' + std::to_string(c);
  }
  return key;
}

}  // namespace

Document merge(std::span<const Document> docs) {
  // Primaries sharing a pid must be identical declarations.
  std::map<std::string, const PrimaryDataRef*> primaries;
  for (const Document& d : docs) {
    for (const PrimaryDataRef& p : d.primaries()) {
      auto [it, fresh] = primaries.emplace(p.pid, &p);
      if (!fresh && !(*it->second == p)) {
        throw Error(Errc::primary_mismatch,
                    "primary '" + p.pid + "' differs between inputs");
      }
    }
  }
  // Layers sharing a lid must agree on dependencies and dcs_ref.
  std::map<std::string, const Layer*> layers;
  for (const Document& d : docs) {
    for (const Layer& l : d.layers()) {
      auto [it, fresh] = layers.emplace(l.lid, &l);
      if (!fresh && !(*it->second == l)) {
        throw Error(Errc::layer_id_clash,
                    "layer '" + l.lid + "' declared with incompatible dependencies");
      }
    }
  }

  // Identical (pid, boxes) regions deduplicate across sources onto the
  // first occurrence. Within one source nothing collapses, so merging with
  // the empty document reproduces the input exactly.
  std::map<std::string, std::string> region_alias;  // suffixed id -> kept id
  std::map<std::string, std::pair<std::size_t, std::string>> region_by_content;

  DocumentBuilder b;
  for (const auto& [pid, p] : primaries) b.add_primary(*p);
  for (const auto& [lid, l] : layers) b.add_layer(*l);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const Document& d = docs[i];
    const std::string suffix = "_" + std::to_string(i);
    auto nid_of = [&](const std::string& id) { return id + suffix; };
    for (const Region& r : d.regions()) {
      std::string id = r.rid + suffix;
      std::string key = region_content_key(r);
      auto it = region_by_content.find(key);
      if (it != region_by_content.end() && it->second.first < i) {
        region_alias[id] = it->second.second;
        continue;
      }
      if (it == region_by_content.end()) region_by_content[key] = {i, id};
      region_alias[id] = id;
      Region copy = r;
      copy.rid = id;
      b.add_region(copy);
    }
    for (const LogEntry& e : d.log()) {
      switch (e.kind) {
        case RecordKind::Primary:
        case RecordKind::Layer:
        case RecordKind::Region:
          break;
        case RecordKind::Node: {
          Node n = d.nodes()[e.index];
          n.nid = nid_of(n.nid);
          n.features.clear();
          for (TargetRef& t : n.targets) {
            t.id = t.kind == TargetRef::Kind::Region ? region_alias.at(t.id + suffix)
                                                     : nid_of(t.id);
          }
          b.add_node(std::move(n));
          break;
        }
        case RecordKind::Feature: {
          const Node& n = d.nodes()[e.index];
          FeatureAssignment fa = n.features[e.sub];
          if (fa.value.kind == FeatureValue::Kind::GroupRef) {
            fa.value.gid += suffix;
          }
          b.add_feature(nid_of(n.nid), std::move(fa));
          break;
        }
        case RecordKind::Group: {
          Group g = d.groups()[e.index];
          g.gid += suffix;
          for (GroupMember& m : g.members) {
            if (m.kind == GroupMember::Kind::Node) m.nid = nid_of(m.nid);
          }
          b.add_group(std::move(g));
          break;
        }
      }
    }
  }
  return canonicalize(b.close());
}

Document extract(const Document& doc, const std::vector<std::string>& layer_ids) {
  std::vector<std::string> closure = doc.layer_closure(layer_ids);
  std::set<std::string> keep_layers(closure.begin(), closure.end());

  std::set<std::string> keep_nodes;
  for (const Node& n : doc.nodes()) {
    if (keep_layers.count(n.layer)) keep_nodes.insert(n.nid);
  }
  std::set<std::string> keep_regions;
  for (const Node& n : doc.nodes()) {
    if (!keep_nodes.count(n.nid)) continue;
    for (const TargetRef& t : n.targets) {
      if (t.kind == TargetRef::Kind::Region) keep_regions.insert(t.id);
    }
  }
  // groups: all node members inside, and either node-membered or
  // referenced by a kept node's feature
  std::set<std::string> referenced_groups;
  for (const Node& n : doc.nodes()) {
    if (!keep_nodes.count(n.nid)) continue;
    for (const FeatureAssignment& fa : n.features) {
      if (fa.value.kind == FeatureValue::Kind::GroupRef) {
        referenced_groups.insert(fa.value.gid);
      }
    }
  }
  std::set<std::string> keep_groups;
  for (const Group& g : doc.groups()) {
    bool all_members_in = true, has_node_member = false;
    for (const GroupMember& m : g.members) {
      if (m.kind != GroupMember::Kind::Node) continue;
      has_node_member = true;
      all_members_in = all_members_in && keep_nodes.count(m.nid) > 0;
    }
    if (!all_members_in) continue;
    if (has_node_member || referenced_groups.count(g.gid)) keep_groups.insert(g.gid);
  }

  DocumentBuilder b;
  for (const LogEntry& e : doc.log()) {
    switch (e.kind) {
      case RecordKind::Primary:
        b.add_primary(doc.primaries()[e.index]);
        break;
      case RecordKind::Layer:
        if (keep_layers.count(doc.layers()[e.index].lid)) {
          b.add_layer(doc.layers()[e.index]);
        }
        break;
      case RecordKind::Region:
        if (keep_regions.count(doc.regions()[e.index].rid)) {
          b.add_region(doc.regions()[e.index]);
        }
        break;
      case RecordKind::Node: {
        const Node& n = doc.nodes()[e.index];
        if (keep_nodes.count(n.nid)) {
          Node copy = n;
          copy.features.clear();
          b.add_node(std::move(copy));
        }
        break;
      }
      case RecordKind::Feature: {
        const Node& n = doc.nodes()[e.index];
        if (keep_nodes.count(n.nid)) b.add_feature(n.nid, n.features[e.sub]);
        break;
      }
      case RecordKind::Group:
        if (keep_groups.count(doc.groups()[e.index].gid)) {
          b.add_group(doc.groups()[e.index]);
        }
        break;
    }
  }
  return b.close();
}

namespace {

std::string value_report_token(const Document& doc, const FeatureValue& v);

std::string group_report_token(const Document& doc, const Group& g) {
  std::vector<std::string> members;
  for (const GroupMember& m : g.members) {
    members.push_back(m.kind == GroupMember::Kind::Node
                          ? "n:" + m.nid
                          : value_report_token(doc, m.value));
  }
  if (g.kind != GroupKind::List) std::sort(members.begin(), members.end());
  return std::string(group_kind_name(g.kind)) + "{" + join(members, ',') + "}";
}

std::string value_report_token(const Document& doc, const FeatureValue& v) {
  switch (v.kind) {
    case FeatureValue::Kind::Category: return v.category.token();
    case FeatureValue::Kind::Literal: return "\"" + v.text + "\"";
    case FeatureValue::Kind::GroupRef: {
      const Group* g = doc.find_group(v.gid);
      return g ? group_report_token(doc, *g) : "g:" + v.gid;
    }
  }
  return {};
}

std::string region_label(const Region& r) {
  std::string out = r.pid;
  for (const Box& box : r.boxes) {
    out += " [";
    for (std::size_t axis = 0; axis < box.size(); ++axis) {
      if (axis) out += ",";
      out += std::to_string(box[axis].start) + "," + std::to_string(box[axis].end);
    }
    out += ")";
  }
  return out;
}

}  // namespace

AgreementReport diff(const Document& doc, const std::string& layer_a,
                     const std::string& layer_b, const std::string& descriptor,
                     const Registry& reg) {
  for (const std::string& lid : {layer_a, layer_b}) {
    if (!doc.find_layer(lid)) {
      throw Error(Errc::unknown_layer, "no layer '" + lid + "'");
    }
  }
  const DataCategoryEntry* entry = reg.find(descriptor);
  if (!entry || entry->kind != DataCategoryEntry::Kind::Descriptor) {
    throw Error(Errc::unknown_descriptor,
                "'" + descriptor + "' is not a registry descriptor");
  }
  {
    std::vector<std::string> pa = doc.layer_pids(layer_a);
    std::vector<std::string> pb = doc.layer_pids(layer_b);
    std::vector<std::string> common;
    std::set_intersection(pa.begin(), pa.end(), pb.begin(), pb.end(),
                          std::back_inserter(common));
    if (common.empty()) {
      throw Error(Errc::precondition,
                  "layers '" + layer_a + "' and '" + layer_b +
                      "' annotate different primaries");
    }
  }

  CategoryRef desc = CategoryRef::registry(descriptor);
  struct Position {
    Region region;
    std::set<std::string> values_a, values_b;
    bool in_a = false, in_b = false;
  };
  std::map<std::string, Position> positions;
  auto scan = [&](const std::string& lid, bool side_a) {
    for (const Node& n : doc.nodes()) {
      if (n.layer != lid) continue;
      std::set<std::string> values;
      for (const FeatureAssignment& fa : n.features) {
        if (fa.descriptor == desc) values.insert(value_report_token(doc, fa.value));
      }
      if (values.empty()) continue;
      Region fp = doc.footprint(n.nid);
      if (fp.boxes.empty()) continue;
      Position& pos = positions[region_content_key(fp)];
      pos.region = fp;
      if (side_a) {
        pos.in_a = true;
        pos.values_a.insert(values.begin(), values.end());
      } else {
        pos.in_b = true;
        pos.values_b.insert(values.begin(), values.end());
      }
    }
  };
  scan(layer_a, true);
  scan(layer_b, false);

  AgreementReport report;
  report.layer_a = layer_a;
  report.layer_b = layer_b;
  auto joined = [](const std::set<std::string>& values) {
    return join({values.begin(), values.end()}, '|');
  };
  for (const auto& [key, pos] : positions) {
    if (pos.in_a && pos.in_b) {
      ++report.item_count;
      if (pos.values_a == pos.values_b) {
        ++report.matches;
      } else {
        report.disagreements.push_back(
            {pos.region, joined(pos.values_a), joined(pos.values_b)});
      }
    } else if (pos.in_a) {
      report.disagreements.push_back({pos.region, joined(pos.values_a), std::nullopt});
    } else {
      report.disagreements.push_back({pos.region, std::nullopt, joined(pos.values_b)});
    }
  }
  if (report.item_count > 0) {
    report.rate = static_cast<double>(report.matches) /
                  static_cast<double>(report.item_count);
  }
  return report;
}

std::string render_report(const AgreementReport& report) {
  std::string out;
  out += "layers: " + report.layer_a + " " + report.layer_b + "\n";
  out += "items: " + std::to_string(report.item_count) + "\n";
  out += "matches: " + std::to_string(report.matches) + "\n";
  if (report.rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *report.rate);
    out += "rate: " + std::string(buf) + "\n";
  } else {
    out += "rate: n/a\n";
  }
  for (const AgreementReport::Disagreement& d : report.disagreements) {
    out += "disagree\t" + region_label(d.region) + "\t" +
           d.value_a.value_or("-") + "\t" + d.value_b.value_or("-") + "\n";
  }
  return out;
}

ConstraintSet ConstraintSet::load(std::string_view bytes) {
  ConstraintSet cs;
  std::size_t lineno = 0;
  for (std::string_view line : split(bytes, '\n')) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields[0] == "EMBED" || fields[0] == "APPLIES") {
      if (fields.size() < 3) {
        throw Error(Errc::arity_error,
                    std::string(fields[0]) + " needs a subject and at least one category",
                    lineno);
      }
      auto& rules = fields[0] == "EMBED" ? cs.embed_rules : cs.applies_rules;
      auto& allowed = rules[std::string(fields[1])];
      for (std::size_t i = 2; i < fields.size(); ++i) {
        allowed.insert(std::string(fields[i]));
      }
      continue;
    }
    throw Error(Errc::arity_error,
                "unknown constraint line '" + std::string(fields[0]) + "'", lineno);
  }
  return cs;
}

std::string_view finding_kind_name(ValidationFinding::Kind k) {
  switch (k) {
    case ValidationFinding::Kind::Embedding: return "embedding";
    case ValidationFinding::Kind::Applicability: return "applicability";
    case ValidationFinding::Kind::Compatibility: return "compatibility";
    case ValidationFinding::Kind::Orphan: return "orphan";
    case ValidationFinding::Kind::UndeclaredDependency: return "undeclared-dependency";
  }
  return "unknown";
}

std::vector<ValidationFinding> validate(const Document& doc, const Registry& reg,
                                        const ConstraintSet& constraints) {
  std::vector<ValidationFinding> findings;
  auto add = [&](ValidationFinding::Kind kind, const std::string& node,
                 std::string message) {
    findings.push_back({kind, node, std::move(message)});
  };

  // layer -> layers and pids reachable through declared dependencies
  std::map<std::string, std::set<std::string>> reach;
  for (const Layer& l : doc.layers()) {
    std::vector<std::string> one{l.lid};
    for (const std::string& lid : doc.layer_closure(one)) reach[l.lid].insert(lid);
    for (const std::string& pid : doc.layer_pids(l.lid)) reach[l.lid].insert(pid);
  }

  std::set<std::string> grouped;
  for (const Group& g : doc.groups()) {
    for (const GroupMember& m : g.members) {
      if (m.kind == GroupMember::Kind::Node) grouped.insert(m.nid);
    }
  }

  for (const Node& n : doc.nodes()) {
    const std::string type_token = n.type.token();
    const std::set<std::string>& visible = reach[n.layer];

    // embedding rules
    auto embed = constraints.embed_rules.find(type_token);
    for (const TargetRef& t : n.targets) {
      if (t.kind == TargetRef::Kind::Node) {
        const Node& child = *doc.find_node(t.id);
        if (embed != constraints.embed_rules.end() &&
            !embed->second.count(child.type.token())) {
          add(ValidationFinding::Kind::Embedding, n.nid,
              type_token + " node '" + n.nid + "' embeds " + child.type.token() +
                  " node '" + child.nid + "'");
        }
        if (child.layer != n.layer && !visible.count(child.layer)) {
          add(ValidationFinding::Kind::UndeclaredDependency, n.nid,
              "node '" + n.nid + "' in layer '" + n.layer + "' targets '" +
                  child.nid + "' in undeclared layer '" + child.layer + "'");
        }
      } else {
        const Region& r = *doc.find_region(t.id);
        if (!visible.count(r.pid)) {
          add(ValidationFinding::Kind::UndeclaredDependency, n.nid,
              "node '" + n.nid + "' in layer '" + n.layer +
                  "' anchors into undeclared primary '" + r.pid + "'");
        }
      }
    }

    // applicability and compatibility of features
    for (const FeatureAssignment& fa : n.features) {
      const std::string desc_token = fa.descriptor.token();
      auto applies = constraints.applies_rules.find(desc_token);
      if (applies != constraints.applies_rules.end() &&
          !applies->second.count(type_token)) {
        add(ValidationFinding::Kind::Applicability, n.nid,
            "descriptor " + desc_token + " does not apply to " + type_token +
                " node '" + n.nid + "'");
      }
      if (!fa.descriptor.is_local()) {
        const DataCategoryEntry* entry = reg.find(fa.descriptor.name);
        if (entry) {
          if (entry->kind != DataCategoryEntry::Kind::Descriptor) {
            add(ValidationFinding::Kind::Compatibility, n.nid,
                "'" + fa.descriptor.name + "' on node '" + n.nid +
                    "' is a value entry, not a descriptor");
          } else {
            Registry::CompatResult r =
                reg.check_compat(fa.descriptor.name, fa.value, &doc);
            if (!r.ok) {
              add(ValidationFinding::Kind::Compatibility, n.nid,
                  "node '" + n.nid + "': " + r.reason);
            }
          }
        }
      }
      // group-mediated cross-layer uses
      if (fa.value.kind == FeatureValue::Kind::GroupRef) {
        const Group* g = doc.find_group(fa.value.gid);
        for (const GroupMember& m : g->members) {
          if (m.kind != GroupMember::Kind::Node) continue;
          const Node& member = *doc.find_node(m.nid);
          if (member.layer != n.layer && !visible.count(member.layer)) {
            add(ValidationFinding::Kind::UndeclaredDependency, n.nid,
                "node '" + n.nid + "' aggregates '" + member.nid +
                    "' from undeclared layer '" + member.layer + "'");
          }
        }
      }
    }

    if (n.targets.empty() && !grouped.count(n.nid)) {
      add(ValidationFinding::Kind::Orphan, n.nid,
          "node '" + n.nid + "' has no targets and no group membership");
    }
  }
  return findings;
}

std::string render_report(std::span<const ValidationFinding> findings) {
  std::string out;
  for (const ValidationFinding& f : findings) {
    out += std::string(finding_kind_name(f.kind)) + "\t" + f.message + "\n";
  }
  return out;
}

}  // namespace laf
