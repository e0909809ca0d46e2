#include "laf/graph.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "laf/errors.hpp"
#include "laf/util.hpp"

namespace laf {

std::string CategoryRef::token() const {
  if (scheme.empty()) return name;
  return "~" + scheme + ":" + name;
}

CategoryRef CategoryRef::parse(std::string_view token) {
  if (!token.empty() && token[0] == '~') {
    std::size_t colon = token.find(':');
    if (colon == std::string_view::npos) {
      throw Error(Errc::malformed_id, "scheme-local category without ':': " +
                                          std::string(token));
    }
    std::string scheme(token.substr(1, colon - 1));
    std::string name(token.substr(colon + 1));
    if (!is_identifier(scheme) || !is_identifier(name)) {
      throw Error(Errc::malformed_id,
                  "bad scheme-local category: " + std::string(token));
    }
    return local(std::move(scheme), std::move(name));
  }
  if (!is_identifier(token)) {
    throw Error(Errc::malformed_id, "bad category: " + std::string(token));
  }
  return registry(std::string(token));
}

std::string_view group_kind_name(GroupKind k) {
  switch (k) {
    case GroupKind::Alt: return "ALT";
    case GroupKind::Set: return "SET";
    case GroupKind::List: return "LIST";
  }
  return "SET";
}

std::optional<GroupKind> group_kind_by_name(std::string_view name) {
  if (name == "ALT") return GroupKind::Alt;
  if (name == "SET") return GroupKind::Set;
  if (name == "LIST") return GroupKind::List;
  return std::nullopt;
}

namespace {

void require_identifier(const std::string& id, const char* what) {
  if (!is_identifier(id)) {
    throw Error(Errc::malformed_id, std::string(what) + " '" + id + "'");
  }
}

void require_category(const CategoryRef& c) {
  if (!is_identifier(c.name) || (!c.scheme.empty() && !is_identifier(c.scheme))) {
    throw Error(Errc::malformed_id, "bad category '" + c.token() + "'");
  }
}

void require_value(const FeatureValue& v, bool allow_group) {
  switch (v.kind) {
    case FeatureValue::Kind::Category:
      require_category(v.category);
      return;
    case FeatureValue::Kind::Literal:
      return;
    case FeatureValue::Kind::GroupRef:
      if (!allow_group) {
        throw Error(Errc::group_malformed,
                    "group members may not reference groups");
      }
      require_identifier(v.gid, "bad group reference");
      return;
  }
}

bool is_hex_hash(const std::string& h) {
  if (h.size() != 64) return false;
  for (char c : h) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

}  // namespace

bool DocumentBuilder::has_id(RecordKind kind, const std::string& id) const {
  switch (kind) {
    case RecordKind::Primary: return primary_ix_.count(id) != 0;
    case RecordKind::Layer: return layer_ix_.count(id) != 0;
    case RecordKind::Region: return region_ix_.count(id) != 0;
    case RecordKind::Node: return node_ix_.count(id) != 0;
    case RecordKind::Group: return group_ix_.count(id) != 0;
    case RecordKind::Feature: return false;
  }
  return false;
}

void DocumentBuilder::add_primary(PrimaryDataRef p) {
  require_identifier(p.pid, "bad pid");
  if (primary_ix_.count(p.pid)) {
    throw Error(Errc::duplicate_id, "primary '" + p.pid + "'");
  }
  if (p.extent.size() != static_cast<std::size_t>(p.space.dimension())) {
    throw Error(Errc::wrong_arity,
                "extent of '" + p.pid + "' needs " +
                    std::to_string(p.space.dimension()) + " entries");
  }
  if (!is_hex_hash(p.content_hash)) {
    throw Error(Errc::precondition,
                "content_hash of '" + p.pid + "' must be 64 lowercase hex digits");
  }
  primary_ix_[p.pid] = primaries_.size();
  log_.push_back({RecordKind::Primary, static_cast<std::uint32_t>(primaries_.size()), 0, {}});
  primaries_.push_back(std::move(p));
}

void DocumentBuilder::add_layer(Layer l) {
  require_identifier(l.lid, "bad lid");
  for (const std::string& dep : l.depends_on) require_identifier(dep, "bad dependency");
  if (layer_ix_.count(l.lid)) {
    throw Error(Errc::duplicate_id, "layer '" + l.lid + "'");
  }
  std::sort(l.depends_on.begin(), l.depends_on.end());
  l.depends_on.erase(std::unique(l.depends_on.begin(), l.depends_on.end()),
                     l.depends_on.end());
  layer_ix_[l.lid] = layers_.size();
  log_.push_back({RecordKind::Layer, static_cast<std::uint32_t>(layers_.size()), 0, {}});
  layers_.push_back(std::move(l));
}

void DocumentBuilder::add_region(const Region& r) {
  for (const Box& box : r.boxes) {
    for (const Span& s : box) {
      if (s.start > s.end) {
        throw Error(Errc::start_after_end, "region '" + r.rid + "'");
      }
    }
  }
  add_region_raw(r.rid, r.pid, region_coords(r));
}

void DocumentBuilder::add_region_raw(std::string rid, std::string pid,
                                     std::vector<std::uint64_t> coords) {
  require_identifier(rid, "bad rid");
  require_identifier(pid, "bad pid");
  if (region_ix_.count(rid)) {
    throw Error(Errc::duplicate_id, "region '" + rid + "'");
  }
  if (coords.empty() || coords.size() % 2 != 0) {
    throw Error(Errc::wrong_arity, "region '" + rid + "' coordinate count " +
                                       std::to_string(coords.size()));
  }
  for (std::size_t i = 0; i < coords.size(); i += 2) {
    if (coords[i] > coords[i + 1]) {
      throw Error(Errc::start_after_end, "region '" + rid + "'");
    }
  }
  region_ix_[rid] = regions_.size();
  log_.push_back({RecordKind::Region, static_cast<std::uint32_t>(regions_.size()), 0, {}});
  regions_.push_back({std::move(rid), std::move(pid), std::move(coords)});
}

void DocumentBuilder::add_node(Node n) {
  require_identifier(n.nid, "bad nid");
  require_identifier(n.layer, "bad layer id");
  require_category(n.type);
  for (const TargetRef& t : n.targets) require_identifier(t.id, "bad target");
  if (node_ix_.count(n.nid)) {
    throw Error(Errc::duplicate_id, "node '" + n.nid + "'");
  }
  std::vector<FeatureAssignment> features = std::move(n.features);
  n.features.clear();
  auto node_index = static_cast<std::uint32_t>(nodes_.size());
  node_ix_[n.nid] = nodes_.size();
  log_.push_back({RecordKind::Node, node_index, 0, n.layer});
  nodes_.push_back(std::move(n));
  for (FeatureAssignment& fa : features) {
    add_feature(nodes_.back().nid, std::move(fa));
  }
}

void DocumentBuilder::add_feature(const std::string& nid, FeatureAssignment fa) {
  require_identifier(nid, "bad nid");
  require_category(fa.descriptor);
  require_value(fa.value, /*allow_group=*/true);
  // Features are a set: an exact duplicate on an already-present node is a
  // no-op. Duplicates against not-yet-added nodes collapse at close.
  auto it = node_ix_.find(nid);
  if (it != node_ix_.end()) {
    Node& node = nodes_[it->second];
    if (std::find(node.features.begin(), node.features.end(), fa) !=
        node.features.end()) {
      return;
    }
    log_.push_back({RecordKind::Feature, static_cast<std::uint32_t>(it->second),
                    static_cast<std::uint32_t>(node.features.size()), node.layer});
    node.features.push_back(std::move(fa));
    return;
  }
  log_.push_back({RecordKind::Feature,
                  static_cast<std::uint32_t>(pending_features_.size()),
                  0xFFFFFFFFu, {}});
  pending_features_.push_back({nid, std::move(fa)});
}

Document DocumentBuilder::close() {
  std::set<std::string> unresolved;

  // Attach features that were added ahead of their node. Log entries are
  // rewritten from pending indices to (node, feature) positions; exact
  // duplicates drop out of the log entirely.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pending_pos(
      pending_features_.size(), {0, 0xFFFFFFFFu});
  for (std::size_t i = 0; i < pending_features_.size(); ++i) {
    const PendingFeature& pf = pending_features_[i];
    auto it = node_ix_.find(pf.nid);
    if (it == node_ix_.end()) {
      unresolved.insert(pf.nid);
      continue;
    }
    Node& node = nodes_[it->second];
    if (std::find(node.features.begin(), node.features.end(), pf.fa) !=
        node.features.end()) {
      continue;
    }
    pending_pos[i] = {static_cast<std::uint32_t>(it->second),
                      static_cast<std::uint32_t>(node.features.size())};
    node.features.push_back(pf.fa);
  }
  std::vector<LogEntry> log;
  log.reserve(log_.size());
  for (const LogEntry& e : log_) {
    if (e.kind == RecordKind::Feature && e.sub == 0xFFFFFFFFu) {
      auto [ix, sub] = pending_pos[e.index];
      if (sub == 0xFFFFFFFFu) continue;  // duplicate or unresolved
      log.push_back({RecordKind::Feature, ix, sub, nodes_[ix].layer});
      continue;
    }
    log.push_back(e);
  }

  for (const PendingRegion& pr : regions_) {
    if (!primary_ix_.count(pr.pid)) unresolved.insert(pr.pid);
  }
  for (const Node& n : nodes_) {
    if (!layer_ix_.count(n.layer)) unresolved.insert(n.layer);
    for (const TargetRef& t : n.targets) {
      if (t.kind == TargetRef::Kind::Region ? !region_ix_.count(t.id)
                                            : !node_ix_.count(t.id)) {
        unresolved.insert(t.id);
      }
    }
    for (const FeatureAssignment& fa : n.features) {
      if (fa.value.kind == FeatureValue::Kind::GroupRef &&
          !group_ix_.count(fa.value.gid)) {
        unresolved.insert(fa.value.gid);
      }
    }
  }
  for (const Group& g : groups_) {
    for (const GroupMember& m : g.members) {
      if (m.kind == GroupMember::Kind::Node && !node_ix_.count(m.nid)) {
        unresolved.insert(m.nid);
      }
    }
  }
  for (const Layer& l : layers_) {
    for (const std::string& dep : l.depends_on) {
      if (!layer_ix_.count(dep) && !primary_ix_.count(dep)) {
        unresolved.insert(dep);
      }
    }
  }
  if (!unresolved.empty()) {
    std::vector<std::string> ids(unresolved.begin(), unresolved.end());
    throw Error(Errc::unresolved_reference,
                "dangling references: " + join(ids, ' '), 0, ids);
  }

  // Materialize regions now that every pid resolves.
  std::vector<Region> regions;
  regions.reserve(regions_.size());
  for (const PendingRegion& pr : regions_) {
    const PrimaryDataRef& p = primaries_[primary_ix_.at(pr.pid)];
    std::vector<std::int64_t> coords;
    coords.reserve(pr.coords.size());
    for (std::uint64_t c : pr.coords) coords.push_back(static_cast<std::int64_t>(c));
    try {
      regions.push_back(make_region(pr.rid, pr.pid, p.space, coords, &p.extent));
    } catch (const Error& e) {
      throw Error(e.code(), "region '" + pr.rid + "': " + e.what());
    }
  }
  std::map<std::string, std::size_t, std::less<>> region_ix;
  for (std::size_t i = 0; i < regions.size(); ++i) region_ix[regions[i].rid] = i;

  // All direct region targets of one node must anchor the same primary.
  for (const Node& n : nodes_) {
    std::string pid;
    for (const TargetRef& t : n.targets) {
      if (t.kind != TargetRef::Kind::Region) continue;
      const Region& r = regions[region_ix.at(t.id)];
      if (pid.empty()) {
        pid = r.pid;
      } else if (pid != r.pid) {
        throw Error(Errc::mixed_pid_targets,
                    "node '" + n.nid + "' targets regions of '" + pid +
                        "' and '" + r.pid + "'");
      }
    }
  }

  // Node-to-node target acyclicity.
  {
    std::vector<int> color(nodes_.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < nodes_.size(); ++start) {
      if (color[start]) continue;
      stack.push_back(start);
      while (!stack.empty()) {
        std::size_t v = stack.back();
        if (color[v] == 0) {
          color[v] = 1;
          for (const TargetRef& t : nodes_[v].targets) {
            if (t.kind != TargetRef::Kind::Node) continue;
            std::size_t w = node_ix_.at(t.id);
            if (color[w] == 1) {
              throw Error(Errc::target_cycle,
                          "node targets form a cycle through '" +
                              nodes_[w].nid + "'",
                          0, {nodes_[w].nid, nodes_[v].nid});
            }
            if (color[w] == 0) stack.push_back(w);
          }
        } else {
          if (color[v] == 1) color[v] = 2;
          stack.pop_back();
        }
      }
    }
  }

  // Layer dependency acyclicity and grounding.
  {
    std::map<std::string, std::set<std::string>> layer_deps;
    for (const Layer& l : layers_) {
      for (const std::string& dep : l.depends_on) {
        if (layer_ix_.count(dep)) layer_deps[l.lid].insert(dep);
      }
    }
    std::map<std::string, int> color;
    std::function<void(const std::string&)> visit = [&](const std::string& lid) {
      color[lid] = 1;
      for (const std::string& dep : layer_deps[lid]) {
        if (color[dep] == 1) {
          throw Error(Errc::layer_cycle,
                      "layer dependencies form a cycle through '" + dep + "'",
                      0, {dep, lid});
        }
        if (color[dep] == 0) visit(dep);
      }
      color[lid] = 2;
    };
    for (const Layer& l : layers_) {
      if (color[l.lid] == 0) visit(l.lid);
    }

    std::map<std::string, bool> grounded;
    std::function<bool(const std::string&)> ground = [&](const std::string& lid) {
      auto it = grounded.find(lid);
      if (it != grounded.end()) return it->second;
      grounded[lid] = false;
      const Layer& l = layers_[layer_ix_.at(lid)];
      bool ok = false;
      for (const std::string& dep : l.depends_on) {
        if (primary_ix_.count(dep) || (layer_ix_.count(dep) && ground(dep))) {
          ok = true;
          break;
        }
      }
      grounded[lid] = ok;
      return ok;
    };
    for (const Layer& l : layers_) {
      if (!ground(l.lid)) {
        throw Error(Errc::layer_not_grounded,
                    "layer '" + l.lid + "' does not reach any primary");
      }
    }
  }

  Document doc;
  doc.primaries_ = std::move(primaries_);
  doc.layers_ = std::move(layers_);
  doc.regions_ = std::move(regions);
  doc.nodes_ = std::move(nodes_);
  doc.groups_ = std::move(groups_);
  doc.log_ = std::move(log);
  doc.primary_ix_ = std::move(primary_ix_);
  doc.layer_ix_ = std::move(layer_ix_);
  doc.region_ix_ = std::move(region_ix);
  doc.node_ix_ = std::move(node_ix_);
  doc.group_ix_ = std::move(group_ix_);
  *this = DocumentBuilder();
  return doc;
}

void DocumentBuilder::add_group(Group g) {
  require_identifier(g.gid, "bad gid");
  if (group_ix_.count(g.gid)) {
    throw Error(Errc::duplicate_id, "group '" + g.gid + "'");
  }
  bool has_nodes = false, has_values = false;
  for (const GroupMember& m : g.members) {
    if (m.kind == GroupMember::Kind::Node) {
      require_identifier(m.nid, "bad member");
      has_nodes = true;
    } else {
      require_value(m.value, /*allow_group=*/false);
      has_values = true;
    }
  }
  if (has_nodes && has_values) {
    throw Error(Errc::group_malformed,
                "group '" + g.gid + "' mixes node and value members");
  }
  if (g.kind == GroupKind::Alt) {
    if (g.members.size() < 2) {
      throw Error(Errc::group_malformed,
                  "ALT group '" + g.gid + "' needs at least two alternatives");
    }
  }
  if (g.kind == GroupKind::Alt || g.kind == GroupKind::Set) {
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      for (std::size_t j = i + 1; j < g.members.size(); ++j) {
        if (g.members[i] == g.members[j]) {
          throw Error(Errc::group_malformed,
                      "duplicate member in " +
                          std::string(group_kind_name(g.kind)) + " group '" +
                          g.gid + "'");
        }
      }
    }
  }
  group_ix_[g.gid] = groups_.size();
  log_.push_back({RecordKind::Group, static_cast<std::uint32_t>(groups_.size()), 0, {}});
  groups_.push_back(std::move(g));
}

const PrimaryDataRef* Document::find_primary(std::string_view pid) const {
  auto it = primary_ix_.find(pid);
  return it == primary_ix_.end() ? nullptr : &primaries_[it->second];
}
const Layer* Document::find_layer(std::string_view lid) const {
  auto it = layer_ix_.find(lid);
  return it == layer_ix_.end() ? nullptr : &layers_[it->second];
}
const Region* Document::find_region(std::string_view rid) const {
  auto it = region_ix_.find(rid);
  return it == region_ix_.end() ? nullptr : &regions_[it->second];
}
const Node* Document::find_node(std::string_view nid) const {
  auto it = node_ix_.find(nid);
  return it == node_ix_.end() ? nullptr : &nodes_[it->second];
}
const Group* Document::find_group(std::string_view gid) const {
  auto it = group_ix_.find(gid);
  return it == group_ix_.end() ? nullptr : &groups_[it->second];
}

Region Document::footprint(const std::string& nid) const {
  const Node* start = find_node(nid);
  if (!start) throw Error(Errc::unknown_node, "no node '" + nid + "'");
  std::set<std::string> seen_nodes, seen_regions;
  std::vector<const Node*> stack{start};
  seen_nodes.insert(nid);
  std::string pid;
  std::vector<Box> boxes;
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    for (const TargetRef& t : n->targets) {
      if (t.kind == TargetRef::Kind::Region) {
        if (!seen_regions.insert(t.id).second) continue;
        const Region& r = regions_[region_ix_.at(t.id)];
        if (pid.empty()) {
          pid = r.pid;
        } else if (pid != r.pid) {
          throw Error(Errc::cross_document,
                      "footprint of '" + nid + "' spans primaries '" + pid +
                          "' and '" + r.pid + "'");
        }
        boxes.insert(boxes.end(), r.boxes.begin(), r.boxes.end());
      } else if (seen_nodes.insert(t.id).second) {
        stack.push_back(&nodes_[node_ix_.at(t.id)]);
      }
    }
  }
  return Region{"", pid, coalesce_boxes(std::move(boxes))};
}

std::vector<std::string> Document::targeted_by(const std::string& id) const {
  std::vector<std::string> out;
  for (const Node& n : nodes_) {
    for (const TargetRef& t : n.targets) {
      if (t.id == id) {
        out.push_back(n.nid);
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> Document::member_of(const std::string& nid) const {
  std::vector<std::string> out;
  for (const Group& g : groups_) {
    for (const GroupMember& m : g.members) {
      if (m.kind == GroupMember::Kind::Node && m.nid == nid) {
        out.push_back(g.gid);
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> Document::layer_order() const {
  std::set<std::string> pendingset;
  for (const Layer& l : layers_) pendingset.insert(l.lid);
  std::vector<std::string> order;
  std::set<std::string> done;
  while (!pendingset.empty()) {
    for (const std::string& lid : pendingset) {
      const Layer& l = layers_[layer_ix_.at(lid)];
      bool ready = true;
      for (const std::string& dep : l.depends_on) {
        if (layer_ix_.count(dep) && !done.count(dep)) {
          ready = false;
          break;
        }
      }
      if (ready) {
        order.push_back(lid);
        done.insert(lid);
        pendingset.erase(lid);
        break;  // restart to keep lid-ascending among ready layers
      }
    }
  }
  return order;
}

std::vector<std::string> Document::layer_closure(
    std::span<const std::string> lids) const {
  std::set<std::string> want;
  std::vector<std::string> stack;
  for (const std::string& lid : lids) {
    if (!layer_ix_.count(lid)) {
      throw Error(Errc::unknown_layer, "no layer '" + lid + "'");
    }
    if (want.insert(lid).second) stack.push_back(lid);
  }
  while (!stack.empty()) {
    std::string lid = stack.back();
    stack.pop_back();
    for (const std::string& dep : layers_[layer_ix_.at(lid)].depends_on) {
      if (layer_ix_.count(dep) && want.insert(dep).second) stack.push_back(dep);
    }
  }
  std::vector<std::string> out;
  for (const std::string& lid : layer_order()) {
    if (want.count(lid)) out.push_back(lid);
  }
  return out;
}

std::vector<std::string> Document::layer_pids(const std::string& lid) const {
  std::vector<std::string> one{lid};
  std::set<std::string> pids;
  for (const std::string& l : layer_closure(one)) {
    for (const std::string& dep : layers_[layer_ix_.at(l)].depends_on) {
      if (primary_ix_.count(dep)) pids.insert(dep);
    }
  }
  return {pids.begin(), pids.end()};
}

void Document::verify() const { to_builder(*this).close(); }

DocumentBuilder to_builder(const Document& doc) {
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
        b.add_node(std::move(n));
        break;
      }
      case RecordKind::Feature: {
        const Node& n = doc.nodes()[e.index];
        b.add_feature(n.nid, n.features[e.sub]);
        break;
      }
      case RecordKind::Group:
        b.add_group(doc.groups()[e.index]);
        break;
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Canonicalization

namespace {

constexpr char kSep = '\x01';
constexpr char kSep2 = '\x02';

// Content key with a capped literal prefix. The prefix carries the true
// lexicographic field order; the rolling hash absorbs everything beyond the
// cap so unequal tails still separate. Residual ties fall through to the
// incoming-reference fingerprint and finally the pre-canonical id.
struct CanonKey {
  static constexpr std::size_t kCap = 4096;
  std::string prefix;
  std::uint64_t hash = 14695981039346656037ull;
  std::uint64_t len = 0;

  void append(std::string_view s) {
    if (prefix.size() < kCap) {
      prefix.append(s.substr(0, kCap - prefix.size()));
    }
    hash = fnv1a64(s, hash);
    len += s.size();
  }
  void append_key(const CanonKey& k) {
    if (prefix.size() < kCap) {
      prefix.append(std::string_view(k.prefix).substr(0, kCap - prefix.size()));
    }
    hash = fnv1a64_mix(hash, k.hash);
    hash = fnv1a64_mix(hash, k.len);
    len += k.len;
  }
  std::strong_ordering operator<=>(const CanonKey& o) const {
    if (auto c = prefix <=> o.prefix; c != 0) return c;
    if (auto c = hash <=> o.hash; c != 0) return c;
    return len <=> o.len;
  }
};

std::string serialize_key(const CanonKey& k) {
  return k.prefix + '\x04' + to_hex16(k.hash) + to_hex16(k.len);
}

std::string region_sort_key(const Region& r) {
  std::vector<std::uint64_t> min_start, max_end;
  for (const Box& box : r.boxes) {
    std::vector<std::uint64_t> s, e;
    for (const Span& sp : box) {
      s.push_back(sp.start);
      e.push_back(sp.end);
    }
    if (min_start.empty() || s < min_start) min_start = s;
    if (max_end.empty() || e > max_end) max_end = e;
  }
  std::string key;
  for (std::uint64_t v : min_start) key += to_hex16(v);
  key += kSep2;
  for (std::uint64_t v : max_end) key += to_hex16(v);
  key += kSep2;
  for (std::uint64_t v : region_coords(r)) key += to_hex16(v);
  return key;
}

std::string value_sort_token(const FeatureValue& v) {
  switch (v.kind) {
    case FeatureValue::Kind::Category: return "c:" + v.category.token();
    case FeatureValue::Kind::Literal:
      return "s:" + std::to_string(v.text.size()) + ":" + v.text;
    case FeatureValue::Kind::GroupRef: return "g:" + v.gid;
  }
  return {};
}

struct CanonState {
  const Document& doc;
  std::map<std::string, std::string> fp_keys;  // nid -> footprint sort key
  std::map<std::string, CanonKey> node_keys;
  // reachable-region bitsets; per-node footprint walks are quadratic on
  // deep documents, the memoized union is not
  std::map<std::string, std::size_t, std::less<>> region_ix;
  std::map<std::string, std::vector<std::uint64_t>> rsets;
  std::size_t words = 0;

  explicit CanonState(const Document& d) : doc(d) {
    for (std::size_t i = 0; i < d.regions().size(); ++i) {
      region_ix[d.regions()[i].rid] = i;
    }
    words = (d.regions().size() + 63) / 64;
  }

  const std::vector<std::uint64_t>& rset(const std::string& nid) {
    auto it = rsets.find(nid);
    if (it != rsets.end()) return it->second;
    std::vector<std::uint64_t> bits(words, 0);
    const Node& n = *doc.find_node(nid);
    for (const TargetRef& t : n.targets) {
      if (t.kind == TargetRef::Kind::Region) {
        std::size_t ix = region_ix.at(t.id);
        bits[ix / 64] |= std::uint64_t(1) << (ix % 64);
      } else {
        const std::vector<std::uint64_t>& child = rset(t.id);  // acyclic
        for (std::size_t w = 0; w < words; ++w) bits[w] |= child[w];
      }
    }
    return rsets.emplace(nid, std::move(bits)).first->second;
  }

  const std::string& fp_key(const std::string& nid) {
    auto it = fp_keys.find(nid);
    if (it != fp_keys.end()) return it->second;
    const std::vector<std::uint64_t>& bits = rset(nid);
    std::string pid;
    std::vector<Box> boxes;
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t word = bits[w];
      while (word) {
        std::size_t ix = w * 64 + static_cast<std::size_t>(__builtin_ctzll(word));
        word &= word - 1;
        const Region& r = doc.regions()[ix];
        if (pid.empty()) {
          pid = r.pid;
        } else if (pid != r.pid) {
          throw Error(Errc::cross_document,
                      "footprint of '" + nid + "' spans primaries '" + pid +
                          "' and '" + r.pid + "'");
        }
        boxes.insert(boxes.end(), r.boxes.begin(), r.boxes.end());
      }
    }
    std::string key;
    if (!boxes.empty()) {
      Region fp{"", pid, coalesce_boxes(std::move(boxes))};
      key = fp.pid + kSep + region_sort_key(fp);
    }
    return fp_keys.emplace(nid, std::move(key)).first->second;
  }

  std::string shallow_key(const std::string& nid) {
    const Node& n = *doc.find_node(nid);
    return n.layer + kSep + fp_key(nid) + kSep + n.type.token();
  }

  std::string group_content_key(const Group& g) {
    std::vector<std::string> members;
    for (const GroupMember& m : g.members) {
      if (m.kind == GroupMember::Kind::Node) {
        members.push_back("n" + std::string(1, kSep2) + shallow_key(m.nid));
      } else {
        members.push_back("v" + std::string(1, kSep2) + value_sort_token(m.value));
      }
    }
    if (g.kind != GroupKind::List) std::sort(members.begin(), members.end());
    std::string key(group_kind_name(g.kind));
    for (const std::string& m : members) key += kSep + m;
    return key;
  }

  std::string feature_key(const FeatureAssignment& fa) {
    std::string key = fa.descriptor.token();
    key += kSep2;
    if (fa.value.kind == FeatureValue::Kind::GroupRef) {
      key += "g";
      key += kSep2;
      key += group_content_key(*doc.find_group(fa.value.gid));
    } else {
      key += value_sort_token(fa.value);
    }
    return key;
  }

  const CanonKey& node_key(const std::string& nid) {
    auto it = node_keys.find(nid);
    if (it != node_keys.end()) return it->second;
    const Node& n = *doc.find_node(nid);
    CanonKey key;
    key.append(n.layer);
    key.append({&kSep, 1});
    key.append(fp_key(nid));
    key.append({&kSep, 1});
    key.append(n.type.token());
    key.append({&kSep, 1});
    for (const TargetRef& t : n.targets) {
      if (t.kind == TargetRef::Kind::Region) {
        // region content, not rank: node keys must not depend on region
        // ordering, whose twin tiebreaks in turn need full node keys
        const Region& r = *doc.find_region(t.id);
        key.append("r(");
        key.append(r.pid);
        key.append({&kSep, 1});
        key.append(region_sort_key(r));
        key.append(")");
      } else {
        key.append("n(");
        key.append_key(node_key(t.id));  // acyclic by seal
        key.append(")");
      }
    }
    key.append({&kSep, 1});
    std::vector<std::string> fkeys;
    for (const FeatureAssignment& fa : n.features) fkeys.push_back(feature_key(fa));
    std::sort(fkeys.begin(), fkeys.end());
    for (const std::string& fk : fkeys) {
      key.append(fk);
      key.append({&kSep, 1});
    }
    return node_keys.emplace(nid, std::move(key)).first->second;
  }
};

}  // namespace

Document canonicalize(const Document& doc) {
  CanonState st(doc);

  // Full content keys for every node first: they depend only on content
  // (region targets enter by coordinates, node targets recursively, group
  // values by their content), never on computed ranks or ids.
  for (const Node& n : doc.nodes()) st.node_key(n.nid);

  // Incoming-reference fingerprints. Content-identical records (twins) can
  // only be told apart by who references them, so ties fall through to the
  // sorted full keys of the referencing nodes (and for nodes also the
  // content keys of containing groups). Everything derives from content,
  // which keeps the order stable across rebuilds, merges and relabelings;
  // only fully automorphic constellations ever reach the id fallback, and
  // for those any consistent pick yields identical records.
  std::map<std::string, std::vector<std::string>> region_referrers, node_referrers,
      node_containers;
  std::map<std::string, std::uint64_t> group_in;
  for (const Node& n : doc.nodes()) {
    std::string full = serialize_key(st.node_key(n.nid));
    for (const TargetRef& t : n.targets) {
      (t.kind == TargetRef::Kind::Region ? region_referrers
                                         : node_referrers)[t.id]
          .push_back(full);
    }
    for (const FeatureAssignment& fa : n.features) {
      if (fa.value.kind == FeatureValue::Kind::GroupRef) ++group_in[fa.value.gid];
    }
  }
  for (const Group& g : doc.groups()) {
    std::string content = st.group_content_key(g);
    for (const GroupMember& m : g.members) {
      if (m.kind == GroupMember::Kind::Node) {
        node_containers[m.nid].push_back(content);
      }
    }
  }
  auto fingerprint = [](std::map<std::string, std::vector<std::string>>& refs,
                        const std::string& id) {
    auto it = refs.find(id);
    if (it == refs.end()) return std::string();
    std::sort(it->second.begin(), it->second.end());
    std::string out;
    for (const std::string& k : it->second) {
      out += k;
      out += '\x03';
    }
    return out;
  };

  // Regions: (pid, stated key, incoming referrers, old id).
  std::vector<std::size_t> region_order(doc.regions().size());
  for (std::size_t i = 0; i < region_order.size(); ++i) region_order[i] = i;
  {
    std::vector<std::string> keys(doc.regions().size());
    std::vector<std::string> inrefs(doc.regions().size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      keys[i] = region_sort_key(doc.regions()[i]);
      inrefs[i] = fingerprint(region_referrers, doc.regions()[i].rid);
    }
    std::sort(region_order.begin(), region_order.end(),
              [&](std::size_t a, std::size_t b) {
                const Region& ra = doc.regions()[a];
                const Region& rb = doc.regions()[b];
                if (ra.pid != rb.pid) return ra.pid < rb.pid;
                if (keys[a] != keys[b]) return keys[a] < keys[b];
                if (inrefs[a] != inrefs[b]) return inrefs[a] < inrefs[b];
                return ra.rid < rb.rid;
              });
  }
  std::map<std::string, std::string> region_names;
  for (std::size_t i = 0; i < region_order.size(); ++i) {
    const Region& r = doc.regions()[region_order[i]];
    region_names[r.rid] = "r" + std::to_string(i + 1);
  }

  // Nodes: (stated key + features, incoming referrers and containing
  // groups, old id).
  std::vector<std::size_t> node_order(doc.nodes().size());
  for (std::size_t i = 0; i < node_order.size(); ++i) node_order[i] = i;
  std::map<std::string, std::string> node_inref, node_incont;
  for (const Node& n : doc.nodes()) {
    node_inref[n.nid] = fingerprint(node_referrers, n.nid);
    node_incont[n.nid] = fingerprint(node_containers, n.nid);
  }
  std::sort(node_order.begin(), node_order.end(), [&](std::size_t a, std::size_t b) {
    const Node& na = doc.nodes()[a];
    const Node& nb = doc.nodes()[b];
    if (auto c = st.node_key(na.nid) <=> st.node_key(nb.nid); c != 0) {
      return c == std::strong_ordering::less;
    }
    if (node_inref[na.nid] != node_inref[nb.nid]) {
      return node_inref[na.nid] < node_inref[nb.nid];
    }
    if (node_incont[na.nid] != node_incont[nb.nid]) {
      return node_incont[na.nid] < node_incont[nb.nid];
    }
    return na.nid < nb.nid;
  });
  std::map<std::string, std::string> node_names;
  for (std::size_t i = 0; i < node_order.size(); ++i) {
    node_names[doc.nodes()[node_order[i]].nid] = "n" + std::to_string(i + 1);
  }

  // Groups: (kind, canonical member tokens, incoming, old id).
  auto member_token = [&](const GroupMember& m) {
    if (m.kind == GroupMember::Kind::Node) return "n:" + node_names.at(m.nid);
    return value_sort_token(m.value);
  };
  auto canon_members = [&](const Group& g) {
    std::vector<std::string> toks;
    for (const GroupMember& m : g.members) toks.push_back(member_token(m));
    if (g.kind != GroupKind::List) std::sort(toks.begin(), toks.end());
    return toks;
  };
  std::map<std::string, std::vector<std::string>> group_referrers;
  for (const Node& n : doc.nodes()) {
    for (const FeatureAssignment& fa : n.features) {
      if (fa.value.kind == FeatureValue::Kind::GroupRef) {
        group_referrers[fa.value.gid].push_back(node_names.at(n.nid));
      }
    }
  }
  std::map<std::string, std::string> group_inref;
  for (const Group& g : doc.groups()) {
    group_inref[g.gid] = fingerprint(group_referrers, g.gid);
  }
  std::vector<std::size_t> group_order(doc.groups().size());
  for (std::size_t i = 0; i < group_order.size(); ++i) group_order[i] = i;
  std::sort(group_order.begin(), group_order.end(), [&](std::size_t a, std::size_t b) {
    const Group& ga = doc.groups()[a];
    const Group& gb = doc.groups()[b];
    auto ka = std::string(group_kind_name(ga.kind));
    auto kb = std::string(group_kind_name(gb.kind));
    if (ka != kb) return ka < kb;
    auto ma = canon_members(ga), mb = canon_members(gb);
    if (ma != mb) return ma < mb;
    if (group_in[ga.gid] != group_in[gb.gid]) {
      return group_in[ga.gid] < group_in[gb.gid];
    }
    if (group_inref[ga.gid] != group_inref[gb.gid]) {
      return group_inref[ga.gid] < group_inref[gb.gid];
    }
    return ga.gid < gb.gid;
  });
  std::map<std::string, std::string> group_names;
  for (std::size_t i = 0; i < group_order.size(); ++i) {
    group_names[doc.groups()[group_order[i]].gid] = "g" + std::to_string(i + 1);
  }

  // Rebuild in canonical order.
  Document out;
  out.primaries_.assign(doc.primaries().begin(), doc.primaries().end());
  std::sort(out.primaries_.begin(), out.primaries_.end(),
            [](const PrimaryDataRef& a, const PrimaryDataRef& b) {
              return a.pid < b.pid;
            });
  std::vector<std::string> layer_seq = doc.layer_order();
  for (const std::string& lid : layer_seq) {
    out.layers_.push_back(*doc.find_layer(lid));
  }
  for (std::size_t i : region_order) {
    Region r = doc.regions()[i];
    r.rid = region_names.at(r.rid);
    out.regions_.push_back(std::move(r));
  }
  auto remap_value = [&](FeatureValue v) {
    if (v.kind == FeatureValue::Kind::GroupRef) v.gid = group_names.at(v.gid);
    return v;
  };
  for (std::size_t i : node_order) {
    Node n = doc.nodes()[i];
    n.nid = node_names.at(n.nid);
    for (TargetRef& t : n.targets) {
      t.id = t.kind == TargetRef::Kind::Region ? region_names.at(t.id)
                                               : node_names.at(t.id);
    }
    for (FeatureAssignment& fa : n.features) fa.value = remap_value(fa.value);
    std::sort(n.features.begin(), n.features.end(),
              [](const FeatureAssignment& a, const FeatureAssignment& b) {
                auto ta = a.descriptor.token(), tb = b.descriptor.token();
                if (ta != tb) return ta < tb;
                return value_sort_token(a.value) < value_sort_token(b.value);
              });
    out.nodes_.push_back(std::move(n));
  }
  for (std::size_t i : group_order) {
    Group g = doc.groups()[i];
    g.gid = group_names.at(g.gid);
    for (GroupMember& m : g.members) {
      if (m.kind == GroupMember::Kind::Node) {
        m.nid = node_names.at(m.nid);
      } else {
        m.value = remap_value(m.value);
      }
    }
    if (g.kind != GroupKind::List) {
      std::sort(g.members.begin(), g.members.end(),
                [&](const GroupMember& a, const GroupMember& b) {
                  auto ta = a.kind == GroupMember::Kind::Node
                                ? "n:" + a.nid
                                : value_sort_token(a.value);
                  auto tb = b.kind == GroupMember::Kind::Node
                                ? "n:" + b.nid
                                : value_sort_token(b.value);
                  return ta < tb;
                });
    }
    out.groups_.push_back(std::move(g));
  }
  for (std::size_t i = 0; i < out.primaries_.size(); ++i) {
    out.primary_ix_[out.primaries_[i].pid] = i;
  }
  for (std::size_t i = 0; i < out.layers_.size(); ++i) {
    out.layer_ix_[out.layers_[i].lid] = i;
  }
  for (std::size_t i = 0; i < out.regions_.size(); ++i) {
    out.region_ix_[out.regions_[i].rid] = i;
  }
  for (std::size_t i = 0; i < out.nodes_.size(); ++i) {
    out.node_ix_[out.nodes_[i].nid] = i;
  }
  for (std::size_t i = 0; i < out.groups_.size(); ++i) {
    out.group_ix_[out.groups_[i].gid] = i;
  }

  // Layer-grouped log: regions sit with the first layer (in dependency
  // order) whose nodes target them, groups with the last layer of their
  // member nodes (so every header+prefix of whole layers resolves), and
  // anything unreferenced trails.
  std::map<std::string, std::size_t> layer_rank;
  for (std::size_t i = 0; i < layer_seq.size(); ++i) layer_rank[layer_seq[i]] = i;
  const std::size_t kTrailing = layer_seq.size();

  std::vector<std::size_t> region_seg(out.regions_.size(), kTrailing);
  std::vector<std::size_t> group_seg(out.groups_.size(), kTrailing);
  for (const Node& n : out.nodes_) {
    std::size_t rank = layer_rank.at(n.layer);
    for (const TargetRef& t : n.targets) {
      if (t.kind == TargetRef::Kind::Region) {
        std::size_t ix = out.region_ix_.at(t.id);
        region_seg[ix] = std::min(region_seg[ix], rank);
      }
    }
  }
  for (std::size_t gi = 0; gi < out.groups_.size(); ++gi) {
    const Group& g = out.groups_[gi];
    std::size_t max_member = 0;
    bool has_member = false;
    for (const GroupMember& m : g.members) {
      if (m.kind != GroupMember::Kind::Node) continue;
      has_member = true;
      max_member = std::max(
          max_member, layer_rank.at(out.nodes_[out.node_ix_.at(m.nid)].layer));
    }
    if (has_member) {
      group_seg[gi] = max_member;
      continue;
    }
    std::size_t min_ref = kTrailing;
    for (const Node& n : out.nodes_) {
      for (const FeatureAssignment& fa : n.features) {
        if (fa.value.kind == FeatureValue::Kind::GroupRef && fa.value.gid == g.gid) {
          min_ref = std::min(min_ref, layer_rank.at(n.layer));
        }
      }
    }
    group_seg[gi] = min_ref;
  }

  for (std::size_t i = 0; i < out.primaries_.size(); ++i) {
    out.log_.push_back({RecordKind::Primary, static_cast<std::uint32_t>(i), 0, {}});
  }
  for (std::size_t i = 0; i < out.layers_.size(); ++i) {
    out.log_.push_back({RecordKind::Layer, static_cast<std::uint32_t>(i), 0, {}});
  }
  for (std::size_t seg = 0; seg <= layer_seq.size(); ++seg) {
    std::string hint = seg < layer_seq.size() ? layer_seq[seg] : std::string();
    for (std::size_t i = 0; i < out.regions_.size(); ++i) {
      if (region_seg[i] == seg) {
        out.log_.push_back({RecordKind::Region, static_cast<std::uint32_t>(i), 0, hint});
      }
    }
    for (std::size_t i = 0; i < out.nodes_.size(); ++i) {
      if (seg < layer_seq.size() && out.nodes_[i].layer == layer_seq[seg]) {
        out.log_.push_back({RecordKind::Node, static_cast<std::uint32_t>(i), 0, hint});
      }
    }
    for (std::size_t i = 0; i < out.nodes_.size(); ++i) {
      if (seg < layer_seq.size() && out.nodes_[i].layer == layer_seq[seg]) {
        for (std::size_t f = 0; f < out.nodes_[i].features.size(); ++f) {
          out.log_.push_back({RecordKind::Feature, static_cast<std::uint32_t>(i),
                              static_cast<std::uint32_t>(f), hint});
        }
      }
    }
    for (std::size_t i = 0; i < out.groups_.size(); ++i) {
      if (group_seg[i] == seg) {
        out.log_.push_back({RecordKind::Group, static_cast<std::uint32_t>(i), 0, hint});
      }
    }
  }
  return out;
}

bool doc_equal(const Document& a, const Document& b) {
  Document ca = canonicalize(a);
  Document cb = canonicalize(b);
  return std::equal(ca.primaries().begin(), ca.primaries().end(),
                    cb.primaries().begin(), cb.primaries().end()) &&
         std::equal(ca.layers().begin(), ca.layers().end(), cb.layers().begin(),
                    cb.layers().end()) &&
         std::equal(ca.regions().begin(), ca.regions().end(),
                    cb.regions().begin(), cb.regions().end()) &&
         std::equal(ca.nodes().begin(), ca.nodes().end(), cb.nodes().begin(),
                    cb.nodes().end()) &&
         std::equal(ca.groups().begin(), ca.groups().end(), cb.groups().begin(),
                    cb.groups().end());
}

std::pair<Document, std::string> mark_parallel(const Document& doc,
                                               const std::vector<std::string>& nids) {
  if (nids.size() < 2) {
    throw Error(Errc::precondition, "parallelism needs at least two nodes");
  }
  std::optional<Region> common;
  for (const std::string& nid : nids) {
    Region fp = doc.footprint(nid);  // throws UnknownNode
    if (fp.boxes.empty()) {
      throw Error(Errc::not_coextensive, "node '" + nid + "' has no anchor");
    }
    if (!common) {
      common = std::move(fp);
    } else if (common->pid != fp.pid || common->boxes != fp.boxes) {
      throw Error(Errc::not_coextensive,
                  "node '" + nid + "' does not cover the common region");
    }
  }
  DocumentBuilder b = to_builder(doc);
  std::string gid;
  for (std::size_t k = 1;; ++k) {
    gid = "par" + std::to_string(k);
    if (!b.has_id(RecordKind::Group, gid)) break;
  }
  Group g{gid, GroupKind::Set, {}};
  for (const std::string& nid : nids) g.members.push_back(GroupMember::of_node(nid));
  b.add_group(std::move(g));
  return {b.close(), gid};
}

std::vector<std::string> parallel_groups(const Document& doc) {
  std::vector<std::string> out;
  for (const Group& g : doc.groups()) {
    if (g.kind != GroupKind::Set || g.members.size() < 2) continue;
    bool all_nodes = true;
    for (const GroupMember& m : g.members) {
      all_nodes = all_nodes && m.kind == GroupMember::Kind::Node;
    }
    if (!all_nodes) continue;
    std::optional<Region> common;
    bool equal = true;
    for (const GroupMember& m : g.members) {
      Region fp = doc.footprint(m.nid);
      if (fp.boxes.empty()) {
        equal = false;
        break;
      }
      if (!common) {
        common = std::move(fp);
      } else if (common->pid != fp.pid || common->boxes != fp.boxes) {
        equal = false;
        break;
      }
    }
    if (equal) out.push_back(g.gid);
  }
  return out;
}

}  // namespace laf
