#include "laf/layerops.hpp"

#include <random>

#include "doctest.h"
#include "laf/dump.hpp"
#include "laf/errors.hpp"
#include "laf/transducers.hpp"
#include "laf/util.hpp"
#include "oracles.hpp"
#include "testdocs.hpp"

using namespace laf;
using laf::testing::kChar;

namespace {

std::string fixture(const char* name) {
  return read_file(std::string(LAF_FIXTURES_DIR) + "/" + name);
}

const Registry& reg() {
  static Registry r = Registry::load(fixture("core.dcr"));
  return r;
}

const DCS& mini() {
  static DCS d = DCS::load(fixture("mini.dcs"), reg());
  return d;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::io_error;
}

/// seg+pos and seg+syn documents over the same reconstructed primary.
Document inline_doc() {
  return ingest_inline("the/DT cat/NN sat/VBD\n", mini(), reg());
}
Document brackets_doc() {
  return ingest_brackets("(S (NP (DT the) (NN cat)) (VP (VBD sat)))\n", mini(), reg());
}

/// Two annotator layers over four shared tokens, agreeing on 3 of 4.
Document agreement_doc() {
  DocumentBuilder b;
  b.add_primary(make_inline_primary("P1", kChar, "aa bb cc dd"));
  b.add_layer({"seg", {"P1"}, ""});
  b.add_layer({"ann-a", {"seg"}, ""});
  b.add_layer({"ann-b", {"seg"}, ""});
  const char* values_a[] = {"MASCULINE", "FEMININE", "NEUTER", "MASCULINE"};
  const char* values_b[] = {"MASCULINE", "FEMININE", "NEUTER", "FEMININE"};
  for (int i = 0; i < 4; ++i) {
    std::string rid = "r" + std::to_string(i + 1);
    b.add_region(make_region(rid, "P1", kChar,
                             std::vector<std::int64_t>{i * 3, i * 3 + 2}));
    std::string tid = "t" + std::to_string(i + 1);
    b.add_node({tid, "seg", CategoryRef::registry("TOKEN"), {TargetRef::region(rid)}, {}});
    b.add_node({"a" + std::to_string(i + 1), "ann-a", CategoryRef::registry("GENDER"),
                {TargetRef::node(tid)},
                {{CategoryRef::registry("GENDER"),
                  FeatureValue::of_category(CategoryRef::registry(values_a[i]))}}});
    b.add_node({"b" + std::to_string(i + 1), "ann-b", CategoryRef::registry("GENDER"),
                {TargetRef::node(tid)},
                {{CategoryRef::registry("GENDER"),
                  FeatureValue::of_category(CategoryRef::registry(values_b[i]))}}});
  }
  return b.close();
}

}  // namespace

TEST_CASE("merge with the empty document is an identity") {
  Document empty = DocumentBuilder().close();
  Document d = inline_doc();
  std::vector<Document> docs{d, empty};
  CHECK(doc_equal(merge(docs), d));
  std::vector<Document> docs2{empty, d};
  CHECK(doc_equal(merge(docs2), d));
}

TEST_CASE("merge unifies layers and deduplicates shared regions") {
  Document a = inline_doc();    // layers seg, pos
  Document c = brackets_doc();  // layers seg, syn over the same text
  std::vector<Document> docs{a, c};
  Document m = merge(docs);
  CHECK(m.layers().size() == 3);
  CHECK(m.find_layer("seg") != nullptr);
  CHECK(m.find_layer("pos") != nullptr);
  CHECK(m.find_layer("syn") != nullptr);
  // 3 token regions shared by both inputs collapse; token nodes duplicate
  CHECK(m.regions().size() == 3);
  CHECK(m.nodes().size() == a.nodes().size() + c.nodes().size());
  CHECK(m.primaries().size() == 1);
}

TEST_CASE("merge rejects diverging primaries and layer clashes") {
  Document a = inline_doc();
  Document other = ingest_inline("a/DT b/NN\n", mini(), reg());  // different text
  std::vector<Document> docs{a, other};
  CHECK(code_of([&] { (void)merge(docs); }) == Errc::primary_mismatch);

  DocumentBuilder b;
  b.add_primary(a.primaries()[0]);
  b.add_layer({"seg", {"text"}, "other-ref"});  // same lid, different dcs_ref
  Document clash = b.close();
  std::vector<Document> docs2{a, clash};
  CHECK(code_of([&] { (void)merge(docs2); }) == Errc::layer_id_clash);
}

TEST_CASE("merge is associative up to doc_equal") {
  std::mt19937 rng(5555);
  for (int trial = 0; trial < 8; ++trial) {
    laf::testing::RandomDocOptions oa, ob, oc;
    oa.layer_prefix = "A";
    oa.id_prefix = "a.";
    oa.text = "shared primary text for the merge suites";
    ob = oa;
    ob.layer_prefix = "B";
    ob.id_prefix = "b.";
    oc = oa;
    oc.layer_prefix = "C";
    oc.id_prefix = "c.";
    Document a = laf::testing::random_document(rng, oa);
    Document b = laf::testing::random_document(rng, ob);
    Document c = laf::testing::random_document(rng, oc);
    std::vector<Document> ab{a, b};
    Document m_ab = merge(ab);
    std::vector<Document> bc{b, c};
    Document m_bc = merge(bc);
    std::vector<Document> left{m_ab, c};
    std::vector<Document> right{a, m_bc};
    CHECK(doc_equal(merge(left), merge(right)));
  }
}

TEST_CASE("extract computes the dependency closure") {
  Document a = inline_doc();
  Document c = brackets_doc();
  std::vector<Document> docs{a, c};
  Document m = merge(docs);

  Document pos_only = extract(m, {"pos"});
  CHECK(pos_only.find_layer("pos") != nullptr);
  CHECK(pos_only.find_layer("seg") != nullptr);
  CHECK(pos_only.find_layer("syn") == nullptr);

  // oracle: brute-force reachability over declared layer dependencies
  std::map<std::string, std::set<std::string>> edges;
  for (const Layer& l : m.layers()) {
    for (const std::string& dep : l.depends_on) {
      if (m.find_layer(dep)) edges[l.lid].insert(dep);
    }
  }
  auto closure = oracle::closure(edges);
  std::set<std::string> expect = closure["pos"];
  expect.insert("pos");
  std::set<std::string> got;
  for (const Layer& l : pos_only.layers()) got.insert(l.lid);
  CHECK(got == expect);
}

TEST_CASE("extract of all layers is the identity, unknown layers fail") {
  Document d = inline_doc();
  std::vector<std::string> all;
  for (const Layer& l : d.layers()) all.push_back(l.lid);
  CHECK(doc_equal(extract(d, all), d));
  CHECK(code_of([&] { (void)extract(d, {"missing"}); }) == Errc::unknown_layer);
}

TEST_CASE("extract after merge recovers the disjoint-layer input") {
  std::mt19937 rng(6666);
  laf::testing::RandomDocOptions oa, ob;
  oa.layer_prefix = "A";
  oa.id_prefix = "a.";
  oa.text = "shared primary text for the merge suites";
  ob = oa;
  ob.layer_prefix = "B";
  ob.id_prefix = "b.";
  Document a = laf::testing::random_document(rng, oa);
  Document b = laf::testing::random_document(rng, ob);
  std::vector<Document> docs{a, b};
  Document m = merge(docs);
  std::vector<std::string> layers_a;
  for (const Layer& l : a.layers()) layers_a.push_back(l.lid);
  CHECK(doc_equal(extract(m, layers_a), canonicalize(a)));
}

TEST_CASE("diff reports 3-of-4 agreement as 0.75") {
  Document d = agreement_doc();
  AgreementReport r = diff(d, "ann-a", "ann-b", "GENDER", reg());
  CHECK(r.item_count == 4);
  CHECK(r.matches == 3);
  REQUIRE(r.rate.has_value());
  CHECK(*r.rate == doctest::Approx(0.75));
  REQUIRE(r.disagreements.size() == 1);
  CHECK(r.disagreements[0].value_a == "MASCULINE");
  CHECK(r.disagreements[0].value_b == "FEMININE");
  std::string report = render_report(r);
  CHECK(report.find("rate: 0.75") != std::string::npos);

  // brute force over all node pairs with equal footprints
  std::size_t bf_items = 0, bf_matches = 0;
  for (const Node& na : d.nodes()) {
    if (na.layer != "ann-a") continue;
    for (const Node& nb : d.nodes()) {
      if (nb.layer != "ann-b") continue;
      Region fa = d.footprint(na.nid), fb = d.footprint(nb.nid);
      if (fa.pid != fb.pid || fa.boxes != fb.boxes) continue;
      ++bf_items;
      if (na.features[0].value == nb.features[0].value) ++bf_matches;
    }
  }
  CHECK(bf_items == r.item_count);
  CHECK(bf_matches == r.matches);
}

TEST_CASE("diff of a layer against itself is total agreement") {
  Document d = agreement_doc();
  AgreementReport r = diff(d, "ann-a", "ann-a", "GENDER", reg());
  CHECK(r.item_count == 4);
  CHECK(r.matches == 4);
  CHECK(*r.rate == doctest::Approx(1.0));
  CHECK(r.disagreements.empty());
  AgreementReport ba = diff(d, "ann-b", "ann-a", "GENDER", reg());
  AgreementReport ab = diff(d, "ann-a", "ann-b", "GENDER", reg());
  CHECK(ab.rate == ba.rate);
  CHECK(ab.matches == ba.matches);
}

TEST_CASE("diff over disjoint segmentations is vacuous") {
  DocumentBuilder b;
  b.add_primary(make_inline_primary("P1", kChar, "abcdef"));
  b.add_layer({"seg", {"P1"}, ""});
  b.add_layer({"x", {"seg"}, ""});
  b.add_layer({"y", {"seg"}, ""});
  b.add_region(make_region("r1", "P1", kChar, std::vector<std::int64_t>{0, 2}));
  b.add_region(make_region("r2", "P1", kChar, std::vector<std::int64_t>{3, 5}));
  b.add_node({"x1", "x", CategoryRef::registry("GENDER"), {TargetRef::region("r1")},
              {{CategoryRef::registry("GENDER"),
                FeatureValue::of_category(CategoryRef::registry("MASCULINE"))}}});
  b.add_node({"y1", "y", CategoryRef::registry("GENDER"), {TargetRef::region("r2")},
              {{CategoryRef::registry("GENDER"),
                FeatureValue::of_category(CategoryRef::registry("FEMININE"))}}});
  Document d = b.close();
  AgreementReport r = diff(d, "x", "y", "GENDER", reg());
  CHECK(r.item_count == 0);
  CHECK(!r.rate.has_value());
  CHECK(r.disagreements.size() == 2);  // absent markers on both sides
  CHECK(render_report(r).find("rate: n/a") != std::string::npos);
  CHECK(code_of([&] { (void)diff(d, "x", "nope", "GENDER", reg()); }) ==
        Errc::unknown_layer);
  CHECK(code_of([&] { (void)diff(d, "x", "y", "NOPE", reg()); }) ==
        Errc::unknown_descriptor);
}

TEST_CASE("validate: clean bracket fixture under the shipped constraints") {
  Document d = brackets_doc();
  ConstraintSet cs = ConstraintSet::load(fixture("constraints.rules"));
  auto findings = validate(d, reg(), cs);
  CHECK(render_report(findings) == "");
  CHECK(findings.empty());
}

TEST_CASE("validate: GENDER/PLURAL compatibility violation detected once") {
  DocumentBuilder b = to_builder(brackets_doc());
  b.add_feature("t1", {CategoryRef::registry("GENDER"),
                       FeatureValue::of_category(CategoryRef::registry("PLURAL"))});
  Document d = b.close();
  ConstraintSet cs = ConstraintSet::load(fixture("constraints.rules"));
  auto findings = validate(d, reg(), cs);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].kind == ValidationFinding::Kind::Compatibility);
  CHECK(findings[0].node == "t1");
}

TEST_CASE("validate: NP embedding S is detected exactly once") {
  Document base = brackets_doc();
  std::string np_id, s_id;
  for (const Node& n : base.nodes()) {
    if (n.type == CategoryRef::registry("NP")) np_id = n.nid;
    if (n.type == CategoryRef::registry("S")) s_id = n.nid;
  }
  REQUIRE(!np_id.empty());
  // rebuild with an extra NP node that targets the S root
  DocumentBuilder b = to_builder(base);
  b.add_node({"bad", "syn", CategoryRef::registry("NP"), {TargetRef::node(s_id)}, {}});
  Document d = b.close();
  ConstraintSet cs = ConstraintSet::load(fixture("constraints.rules"));
  auto findings = validate(d, reg(), cs);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].kind == ValidationFinding::Kind::Embedding);
  CHECK(findings[0].node == "bad");
}

TEST_CASE("validate: applicability, orphans and undeclared dependencies") {
  DocumentBuilder b;
  b.add_primary(make_inline_primary("P1", kChar, "ab cd"));
  b.add_primary(make_inline_primary("P2", kChar, "zz"));
  b.add_layer({"seg", {"P1"}, ""});
  b.add_layer({"other", {"P1"}, ""});
  b.add_region(make_region("r1", "P1", kChar, std::vector<std::int64_t>{0, 2}));
  b.add_region(make_region("r2", "P2", kChar, std::vector<std::int64_t>{0, 2}));
  b.add_node({"t1", "seg", CategoryRef::registry("TOKEN"), {TargetRef::region("r1")},
              {{CategoryRef::registry("GENDER"),
                FeatureValue::of_category(CategoryRef::registry("MASCULINE"))}}});
  b.add_node({"s1", "seg", CategoryRef::registry("S"), {TargetRef::node("t1")},
              {{CategoryRef::registry("GENDER"),
                FeatureValue::of_category(CategoryRef::registry("FEMININE"))}}});
  b.add_node({"lost", "seg", CategoryRef::registry("TOKEN"), {}, {}});
  b.add_node({"x1", "other", CategoryRef::registry("TOKEN"),
              {TargetRef::node("t1"), TargetRef::region("r2")}, {}});
  Document d = b.close();

  ConstraintSet cs;
  cs.applies_rules["GENDER"] = {"TOKEN"};
  auto findings = validate(d, reg(), cs);

  int applicability = 0, orphan = 0, undeclared = 0;
  for (const ValidationFinding& f : findings) {
    if (f.kind == ValidationFinding::Kind::Applicability) {
      ++applicability;
      CHECK(f.node == "s1");
    }
    if (f.kind == ValidationFinding::Kind::Orphan) {
      ++orphan;
      CHECK(f.node == "lost");
    }
    if (f.kind == ValidationFinding::Kind::UndeclaredDependency) ++undeclared;
  }
  CHECK(applicability == 1);
  CHECK(orphan == 1);
  CHECK(undeclared == 2);  // node target into seg, region into P2
}

TEST_CASE("constraint file grammar") {
  ConstraintSet cs = ConstraintSet::load("EMBED\tS\tNP\tVP\nAPPLIES\tGENDER\tTOKEN\n");
  CHECK(cs.embed_rules.at("S") == std::set<std::string>{"NP", "VP"});
  CHECK(cs.applies_rules.at("GENDER") == std::set<std::string>{"TOKEN"});
  CHECK_THROWS_AS(ConstraintSet::load("EMBED\tS\n"), Error);
  CHECK_THROWS_AS(ConstraintSet::load("WHAT\tS\tNP\n"), Error);
}
