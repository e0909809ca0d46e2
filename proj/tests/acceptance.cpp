// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// anything fails. Tolerances are exact equality throughout.

#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "laf/dcr.hpp"
#include "laf/dump.hpp"
#include "laf/errors.hpp"
#include "laf/graph.hpp"
#include "laf/layerops.hpp"
#include "laf/sha256.hpp"
#include "laf/transducers.hpp"
#include "laf/util.hpp"
#include "oracles.hpp"
#include "testdocs.hpp"
#include "testinputs.hpp"

using namespace laf;
using laf::testing::kChar;

namespace {

const std::string kFixtures = LAF_FIXTURES_DIR;

struct Checker {
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::string first_failure;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) {
      ++failures;
      if (first_failure.empty()) first_failure = what;
    }
  }
};

std::string fixture(const char* name) { return read_file(kFixtures + "/" + name); }

const Registry& core() {
  static Registry reg = Registry::load(fixture("core.dcr"), "core.dcr");
  return reg;
}
const DCS& mini() {
  static DCS d = DCS::load(fixture("mini.dcs"), core());
  return d;
}

std::vector<Document> corpus(std::mt19937& rng) {
  std::vector<Document> docs;
  // fixtures first
  docs.push_back(ingest_inline(fixture("sample.inline"), mini(), core()));
  docs.push_back(ingest_columnar(fixture("sample.conll"), mini(), core()));
  docs.push_back(ingest_brackets(fixture("sample.brackets"), mini(), core()));
  docs.push_back(laf::testing::bracket_fixture());
  docs.push_back(DocumentBuilder().close());
  // 100 random documents, a few of them large (hundreds of records)
  for (int i = 0; i < 100; ++i) {
    laf::testing::RandomDocOptions o;
    if (i % 20 == 0) {
      o.layers = 4;
      o.regions = 120;
      o.nodes = 300;
      o.groups = 12;
      o.features = 250;
    } else {
      o.layers = 1 + i % 3;
      o.regions = 4 + i % 12;
      o.nodes = 5 + i % 25;
      o.groups = i % 4;
      o.features = i % 15;
    }
    docs.push_back(laf::testing::random_document(rng, o));
  }
  return docs;
}

void criterion_1(Checker& c, std::mt19937& rng, const std::vector<Document>& docs) {
  for (const Document& d : docs) {
    std::string bytes = write_dump(d, /*canonical=*/true);
    Document back = read_dump(bytes);
    c.expect(doc_equal(back, d), "round trip not doc_equal");
    for (int s = 0; s < 2; ++s) {
      Document shuffled = laf::testing::shuffled_rebuild(d, rng);
      c.expect(write_dump(shuffled, true) == bytes,
               "canonical bytes differ across insertion orders");
    }
  }
}

void criterion_2(Checker& c, std::mt19937& rng, const std::vector<Document>& docs) {
  bool saw_forward_ref = false;
  for (const Document& d : docs) {
    for (bool canonical : {true, false}) {
      // non-canonical bytes replay insertion order, which after a shuffled
      // rebuild contains genuine forward references
      Document source = canonical ? d : laf::testing::shuffled_rebuild(d, rng);
      std::string bytes = write_dump(source, canonical);
      Document batch = read_dump(bytes);
      std::vector<StreamEvent> events = stream_read(bytes);
      for (const StreamEvent& ev : events) {
        if (ev.kind == StreamEvent::Kind::ReferenceResolved) saw_forward_ref = true;
      }
      Document folded = fold_events(events);
      c.expect(doc_equal(folded, batch), "stream fold differs from batch read");
    }
  }
  // an explicit node-before-region file
  std::string hash = sha256_hex("the cat");
  std::string forward =
      "#LAF-DUMP 1\n"
      "N\tn1\tseg\tTOKEN\tr:r1\n"
      "R\tr1\tP1\t0\t3\n"
      "#LAYER\tseg\tP1\t-\n"
      "#PRIMARY\tP1\tdata:,the cat\tchar\t7\t" + hash + "\n"
      "#END\t4\n";
  Document batch = read_dump(forward);
  std::vector<StreamEvent> events = stream_read(forward);
  for (const StreamEvent& ev : events) {
    if (ev.kind == StreamEvent::Kind::ReferenceResolved) saw_forward_ref = true;
  }
  c.expect(doc_equal(fold_events(events), batch), "forward-ref fold differs");
  c.expect(saw_forward_ref, "no forward reference was exercised");
}

void criterion_3(Checker& c, std::mt19937& rng) {
  std::vector<std::string> inline_files{fixture("sample.inline"), ""};
  std::vector<std::string> columnar_files{fixture("sample.conll"), ""};
  std::vector<std::string> bracket_files{fixture("sample.brackets"), ""};
  for (int i = 0; i < 20; ++i) {
    inline_files.push_back(laf::testing::random_inline_text(rng));
    columnar_files.push_back(laf::testing::random_columnar_text(rng));
    bracket_files.push_back(laf::testing::random_brackets_text(rng));
  }
  for (const std::string& text : inline_files) {
    Document d = ingest_inline(text, mini(), core());
    c.expect(emit_inline(d, mini()) == text, "inline emission is not byte-identical");
    c.expect(doc_equal(ingest_inline(emit_inline(d, mini()), mini(), core()), d),
             "inline ingest∘emit is not the identity");
  }
  for (const std::string& text : columnar_files) {
    Document d = ingest_columnar(text, mini(), core());
    c.expect(emit_columnar(d, mini()) == text,
             "columnar emission is not byte-identical");
    c.expect(doc_equal(ingest_columnar(emit_columnar(d, mini()), mini(), core()), d),
             "columnar ingest∘emit is not the identity");
  }
  for (const std::string& text : bracket_files) {
    Document d = ingest_brackets(text, mini(), core());
    c.expect(emit_brackets(d, mini()) == text,
             "bracket emission is not byte-identical");
    c.expect(doc_equal(ingest_brackets(emit_brackets(d, mini()), mini(), core()), d),
             "bracket ingest∘emit is not the identity");
  }
}

/// 50-token text annotated for gender under one scheme's vocabulary.
Document scheme_gender_doc(const std::string& scheme, const std::string& desc,
                           const std::vector<std::string>& values) {
  DocumentBuilder b;
  std::string text;
  for (int i = 0; i < 50; ++i) {
    if (i) text += ' ';
    text += "w" + std::to_string(i + 1);
  }
  b.add_primary(make_inline_primary("P1", kChar, text));
  b.add_layer({"seg", {"P1"}, ""});
  std::uint64_t at = 0;
  for (int i = 0; i < 50; ++i) {
    std::string word = "w" + std::to_string(i + 1);
    auto len = static_cast<std::uint64_t>(word.size());
    std::string rid = "r" + std::to_string(i + 1);
    b.add_region(make_region(rid, "P1", kChar,
                             std::vector<std::int64_t>{
                                 static_cast<std::int64_t>(at),
                                 static_cast<std::int64_t>(at + len)}));
    b.add_node({"t" + std::to_string(i + 1), "seg",
                CategoryRef::local(scheme, "token"),
                {TargetRef::region(rid)},
                {{CategoryRef::local(scheme, desc),
                  FeatureValue::of_category(CategoryRef::local(
                      scheme, values[static_cast<std::size_t>(i) % values.size()]))}}});
    at += len + 1;
  }
  return b.close();
}

void criterion_4(Checker& c) {
  DCS fr = DCS::load(fixture("fr-morph.dcs"), core());
  DCS ta = DCS::load(fixture("tag-a.dcs"), core());
  Document doc_fr = scheme_gender_doc("fr-morph", "genre", {"masc", "fem", "neut"});
  Document doc_ta = scheme_gender_doc("tag-a", "gen", {"m", "f", "n"});
  Document norm_fr = dcs_apply(doc_fr, fr, core());
  Document norm_ta = dcs_apply(doc_ta, ta, core());
  c.expect(doc_equal(norm_fr, norm_ta),
           "instantiations do not normalize to equal documents");
  c.expect(write_dump(norm_fr, true) == write_dump(norm_ta, true),
           "normalized canonical bytes differ");
  Document back_fr = dcs_invert(norm_fr, fr);
  Document back_ta = dcs_invert(norm_ta, ta);
  c.expect(doc_equal(back_fr, doc_fr), "fr-morph inversion is not exact");
  c.expect(doc_equal(back_ta, doc_ta), "tag-a inversion is not exact");
  c.expect(doc_equal(dcs_apply(back_fr, fr, core()), norm_fr),
           "apply∘invert is not the identity");
}

void criterion_5(Checker& c) {
  Document brackets = ingest_brackets(fixture("sample.brackets"), mini(), core());
  // crossing segmentation: one chunk over chars 2..9, across the NP boundary
  DocumentBuilder cb;
  cb.add_primary(brackets.primaries()[0]);
  cb.add_layer({"chunk", {"text"}, ""});
  cb.add_region(make_region("c1", "text", kChar, std::vector<std::int64_t>{2, 9}));
  cb.add_node({"k1", "chunk", CategoryRef::registry("CHUNK"),
               {TargetRef::region("c1")}, {}});
  Document chunks = cb.close();

  std::vector<Document> parts{brackets, chunks};
  Document merged = merge(parts);  // seals
  c.expect(merged.find_layer("chunk") != nullptr, "merge lost the chunk layer");

  ConstraintSet rules = ConstraintSet::load(fixture("constraints.rules"));
  c.expect(validate(merged, core(), rules).empty(),
           "overlapping hierarchies do not validate cleanly");

  Document back = read_dump(write_dump(merged, true));
  c.expect(doc_equal(back, merged), "overlapping document does not round trip");

  for (const char* lid : {"syn", "chunk"}) {
    Document part = extract(merged, {lid});
    part.verify();
    c.expect(part.find_layer(lid) != nullptr, "extract dropped the layer");
    c.expect(doc_equal(read_dump(write_dump(part, true)), part),
             "extracted layer is not a valid stand-off document");
  }
}

void criterion_6(Checker& c, std::mt19937& rng) {
  Document empty = DocumentBuilder().close();
  for (int trial = 0; trial < 10; ++trial) {
    laf::testing::RandomDocOptions oa;
    oa.layer_prefix = "A";
    oa.id_prefix = "a.";
    oa.text = "one shared primary for the algebra";
    laf::testing::RandomDocOptions ob = oa, oc = oa;
    ob.layer_prefix = "B";
    ob.id_prefix = "b.";
    oc.layer_prefix = "C";
    oc.id_prefix = "c.";
    Document a = laf::testing::random_document(rng, oa);
    Document b = laf::testing::random_document(rng, ob);
    Document cdoc = laf::testing::random_document(rng, oc);

    std::vector<Document> ab{a, b}, bc{b, cdoc};
    std::vector<Document> left{merge(ab), cdoc}, right{a, merge(bc)};
    c.expect(doc_equal(merge(left), merge(right)), "merge is not associative");

    std::vector<Document> with_empty{a, empty};
    c.expect(doc_equal(merge(with_empty), a), "empty is not a right identity");
    std::vector<Document> with_empty2{empty, a};
    c.expect(doc_equal(merge(with_empty2), a), "empty is not a left identity");

    std::vector<std::string> layers_a;
    for (const Layer& l : a.layers()) layers_a.push_back(l.lid);
    Document m = merge(ab);
    c.expect(doc_equal(extract(m, layers_a), canonicalize(a)),
             "extract(merge(a,b), layers(a)) != canonicalize(a)");
  }
}

void criterion_7(Checker& c) {
  ConstraintSet rules = ConstraintSet::load(fixture("constraints.rules"));

  for (const char* file : {"sample.inline", "sample.conll", "sample.brackets"}) {
    std::string text = fixture(file);
    Document d = std::string(file).find("inline") != std::string::npos
                     ? ingest_inline(text, mini(), core())
                 : std::string(file).find("conll") != std::string::npos
                     ? ingest_columnar(text, mini(), core())
                     : ingest_brackets(text, mini(), core());
    c.expect(validate(d, core(), rules).empty(),
             std::string("clean fixture reports findings: ") + file);
  }

  Document base = ingest_brackets(fixture("sample.brackets"), mini(), core());
  {
    std::string token_id;
    for (const Node& n : base.nodes()) {
      if (n.type == CategoryRef::registry("TOKEN")) token_id = n.nid;
    }
    DocumentBuilder b = to_builder(base);
    b.add_feature(token_id,
                  {CategoryRef::registry("GENDER"),
                   FeatureValue::of_category(CategoryRef::registry("PLURAL"))});
    auto findings = validate(b.close(), core(), rules);
    c.expect(findings.size() == 1 &&
                 findings[0].kind == ValidationFinding::Kind::Compatibility,
             "GENDER/PLURAL violation not detected exactly once");
  }
  {
    std::string s_id, np_layer;
    for (const Node& n : base.nodes()) {
      if (n.type == CategoryRef::registry("S")) s_id = n.nid;
      if (n.type == CategoryRef::registry("NP")) np_layer = n.layer;
    }
    DocumentBuilder b = to_builder(base);
    b.add_node({"bad", np_layer, CategoryRef::registry("NP"),
                {TargetRef::node(s_id)}, {}});
    auto findings = validate(b.close(), core(), rules);
    c.expect(findings.size() == 1 &&
                 findings[0].kind == ValidationFinding::Kind::Embedding,
             "NP-embeds-S violation not detected exactly once");
  }
}

void criterion_8(Checker& c, std::mt19937& rng) {
  // region_relate against point-set enumeration, extent <= 32
  auto random_region = [&](int dim) {
    std::uniform_int_distribution<std::uint64_t> coord(0, 32);
    std::uniform_int_distribution<int> nbox(1, 3);
    std::vector<std::int64_t> coords;
    for (int b = 0, n = nbox(rng); b < n; ++b) {
      for (int axis = 0; axis < dim; ++axis) {
        std::uint64_t x = coord(rng), y = coord(rng);
        coords.push_back(static_cast<std::int64_t>(std::min(x, y)));
        coords.push_back(static_cast<std::int64_t>(std::max(x, y)));
      }
    }
    return make_region("r", "P1", dim == 1 ? AnchorSpace{SpaceKind::Char}
                                           : AnchorSpace{SpaceKind::Pixel},
                       coords);
  };
  for (int i = 0; i < 300; ++i) {
    Region a = random_region(1), b = random_region(1);
    c.expect(region_relate(a, b) == oracle::relate(a, b),
             "region_relate differs from the point-set oracle (1d)");
  }
  for (int i = 0; i < 100; ++i) {
    Region a = random_region(2), b = random_region(2);
    c.expect(region_relate(a, b) == oracle::relate(a, b),
             "region_relate differs from the point-set oracle (2d)");
  }

  // footprint containment along target edges (documents <= 200 nodes)
  for (int trial = 0; trial < 5; ++trial) {
    laf::testing::RandomDocOptions o;
    o.layers = 3;
    o.regions = 30;
    o.nodes = 200;
    o.features = 40;
    Document d = laf::testing::random_document(rng, o);
    for (const Node& n : d.nodes()) {
      Region fp = d.footprint(n.nid);
      if (fp.boxes.empty()) continue;
      for (const TargetRef& t : n.targets) {
        if (t.kind != TargetRef::Kind::Node) continue;
        Region fc = d.footprint(t.id);
        if (fc.boxes.empty()) continue;
        bool lib = region_relate(fp, fc).count(Relation::Contains) == 1;
        bool ora = oracle::relate(fp, fc).count(Relation::Contains) == 1;
        c.expect(lib && ora, "footprint containment fails on a target edge");
      }
    }
  }

  // dependency closure against brute-force reachability
  for (int trial = 0; trial < 5; ++trial) {
    laf::testing::RandomDocOptions o;
    o.layers = 4;
    Document d = laf::testing::random_document(rng, o);
    std::map<std::string, std::set<std::string>> edges;
    for (const Layer& l : d.layers()) {
      for (const std::string& dep : l.depends_on) {
        if (d.find_layer(dep)) edges[l.lid].insert(dep);
      }
    }
    auto closure = oracle::closure(edges);
    for (const Layer& l : d.layers()) {
      Document part = extract(d, {l.lid});
      std::set<std::string> got;
      for (const Layer& pl : part.layers()) got.insert(pl.lid);
      std::set<std::string> expect = closure[l.lid];
      expect.insert(l.lid);
      c.expect(got == expect, "extract closure differs from brute force");
    }
  }

  // diff agreement rates against brute-force pairwise comparison
  std::uniform_int_distribution<int> gender(0, 2);
  for (int trial = 0; trial < 10; ++trial) {
    static const char* kGender[] = {"MASCULINE", "FEMININE", "NEUTER"};
    DocumentBuilder b;
    b.add_primary(make_inline_primary("P1", kChar, std::string(64, 'x')));
    b.add_layer({"seg", {"P1"}, ""});
    b.add_layer({"x", {"seg"}, ""});
    b.add_layer({"y", {"seg"}, ""});
    int tokens = 4 + trial;
    std::vector<std::string> va, vb;
    for (int i = 0; i < tokens; ++i) {
      std::string rid = "r" + std::to_string(i + 1);
      b.add_region(make_region(rid, "P1", kChar,
                               std::vector<std::int64_t>{i * 4, i * 4 + 3}));
      std::string tid = "t" + std::to_string(i + 1);
      b.add_node({tid, "seg", CategoryRef::registry("TOKEN"),
                  {TargetRef::region(rid)}, {}});
      va.push_back(kGender[gender(rng)]);
      vb.push_back(kGender[gender(rng)]);
      b.add_node({"x" + std::to_string(i + 1), "x", CategoryRef::registry("GENDER"),
                  {TargetRef::node(tid)},
                  {{CategoryRef::registry("GENDER"),
                    FeatureValue::of_category(CategoryRef::registry(va.back()))}}});
      b.add_node({"y" + std::to_string(i + 1), "y", CategoryRef::registry("GENDER"),
                  {TargetRef::node(tid)},
                  {{CategoryRef::registry("GENDER"),
                    FeatureValue::of_category(CategoryRef::registry(vb.back()))}}});
    }
    Document d = b.close();
    AgreementReport r = diff(d, "x", "y", "GENDER", core());
    std::size_t bf_matches = 0;
    for (int i = 0; i < tokens; ++i) {
      if (va[static_cast<std::size_t>(i)] == vb[static_cast<std::size_t>(i)]) {
        ++bf_matches;
      }
    }
    c.expect(r.item_count == static_cast<std::size_t>(tokens),
             "diff item count differs from brute force");
    c.expect(r.matches == bf_matches, "diff matches differ from brute force");
    bool rate_ok = r.item_count == 0
                       ? !r.rate.has_value()
                       : *r.rate == static_cast<double>(bf_matches) /
                                        static_cast<double>(tokens);
    c.expect(rate_ok, "diff rate differs from brute force");
  }
}

int run_criterion(int number, const char* title,
                  const std::function<void(Checker&)>& body) {
  Checker c;
  std::string error;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  if (c.failures == 0) {
    std::printf("PASS criterion %d: %s (%zu checks)\n", number, title, c.checks);
    return 0;
  }
  std::printf("FAIL criterion %d: %s (%zu of %zu checks failed; first: %s)\n",
              number, title, c.failures, c.checks, c.first_failure.c_str());
  return 1;
}

}  // namespace

int main() {
  std::mt19937 rng(20240808);
  std::vector<Document> docs = corpus(rng);
  int failures = 0;
  failures += run_criterion(1, "round-trip integrity and canonical determinism",
                            [&](Checker& c) { criterion_1(c, rng, docs); });
  failures += run_criterion(2, "streaming equivalence with forward references",
                            [&](Checker& c) { criterion_2(c, rng, docs); });
  failures += run_criterion(3, "legacy format round trips (inline, columnar, brackets)",
                            [&](Checker& c) { criterion_3(c, rng); });
  failures += run_criterion(4, "cross-scheme semantic equality and inversion",
                            [&](Checker& c) { criterion_4(c); });
  failures += run_criterion(5, "overlapping hierarchies seal, validate, dump, extract, merge",
                            [&](Checker& c) { criterion_5(c); });
  failures += run_criterion(6, "merge/extract algebra (associativity, identity, inverse)",
                            [&](Checker& c) { criterion_6(c, rng); });
  failures += run_criterion(7, "constraint enforcement on perturbed and clean fixtures",
                            [&](Checker& c) { criterion_7(c); });
  failures += run_criterion(8, "brute-force oracles (relate, footprint, closure, diff)",
                            [&](Checker& c) { criterion_8(c, rng); });
  return failures == 0 ? 0 : 1;
}
