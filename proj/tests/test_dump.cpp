#include "laf/dump.hpp"

#include <random>

#include "doctest.h"
#include "laf/errors.hpp"
#include "laf/sha256.hpp"
#include "laf/util.hpp"
#include "testdocs.hpp"

using namespace laf;
using laf::testing::bracket_fixture;
using laf::testing::kChar;

namespace {

std::mt19937 rng(424242);

Errc read_error(std::string_view bytes) {
  try {
    read_dump(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a read error");
  return Errc::io_error;
}

std::string noun_plural_fixture_dump() {
  // one region, one noun node, one number=plural feature
  DocumentBuilder b;
  b.add_primary(make_inline_primary("P1", kChar, "cats"));
  b.add_layer({"morph", {"P1"}, ""});
  b.add_region(make_region("W1r", "P1", kChar, std::vector<std::int64_t>{0, 4}));
  b.add_node({"W1", "morph", CategoryRef::registry("NOUN"),
              {TargetRef::region("W1r")},
              {{CategoryRef::registry("NUMBER"),
                FeatureValue::of_category(CategoryRef::registry("PLURAL"))}}});
  return write_dump(b.close(), true);
}

}  // namespace

TEST_CASE("escape round-trips the delimiter set") {
  CHECK(escape("a b") == "a b");
  CHECK(escape("a\tb") == "a\\tb");
  CHECK(escape("a\nb") == "a\\nb");
  CHECK(escape("a\\b") == "a\\\\b");
  CHECK(unescape("a\\tb") == "a\tb");
  CHECK_THROWS_AS(unescape("abc\\"), Error);
  CHECK_THROWS_AS(unescape("a\\qb"), Error);

  std::uniform_int_distribution<int> len(0, 40), chr(0, 255);
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    int n = len(rng);
    for (int k = 0; k < n; ++k) s += static_cast<char>(chr(rng));
    CHECK(unescape(escape(s)) == s);
  }
}

TEST_CASE("empty document dumps to header plus END 0") {
  Document empty = DocumentBuilder().close();
  CHECK(write_dump(empty, true) == "#LAF-DUMP 1\n#END\t0\n");
  Document back = read_dump("#LAF-DUMP 1\n#END\t0\n");
  CHECK(back.empty());
  CHECK(doc_equal(back, empty));
}

TEST_CASE("single-node fixture has one R, one N, one F record") {
  std::string dump = noun_plural_fixture_dump();
  std::size_t r = 0, n = 0, f = 0;
  for (std::string_view line : split(dump, '\n')) {
    if (line.rfind("R\t", 0) == 0) ++r;
    if (line.rfind("N\t", 0) == 0) ++n;
    if (line.rfind("F\t", 0) == 0) ++f;
  }
  CHECK(r == 1);
  CHECK(n == 1);
  CHECK(f == 1);
  // body records: 1 PRIMARY + 1 LAYER + R + N + F
  CHECK(dump.find("#END\t5\n") != std::string::npos);
}

TEST_CASE("round trip preserves documents") {
  Document d = bracket_fixture();
  Document back = read_dump(write_dump(d, true));
  CHECK(doc_equal(back, d));
  // non-canonical writing round-trips too
  Document back2 = read_dump(write_dump(d, false));
  CHECK(doc_equal(back2, d));
}

TEST_CASE("canonical bytes stable across shuffled rebuilds") {
  Document d = laf::testing::random_document(rng);
  std::string bytes = write_dump(d, true);
  for (int i = 0; i < 10; ++i) {
    Document shuffled = laf::testing::shuffled_rebuild(d, rng);
    CHECK(write_dump(shuffled, true) == bytes);
  }
}

TEST_CASE("tampering with a coordinate breaks equality") {
  Document d = bracket_fixture();
  std::string dump = write_dump(d, true);
  std::string tampered = dump;
  std::size_t pos = tampered.find("R\tr1\tP1\t0\t3");
  REQUIRE(pos != std::string::npos);
  tampered.replace(pos, 11, "R\tr1\tP1\t0\t2");
  Document back = read_dump(tampered);
  CHECK(!doc_equal(back, d));
}

TEST_CASE("reader errors") {
  CHECK(read_error("") == Errc::bad_magic);
  CHECK(read_error("#LAF-DUMP 2\n") == Errc::bad_magic);
  CHECK(read_error("#LAF-DUMP 1\nQ\tx\n#END\t1\n") == Errc::unknown_record_kind);
  CHECK(read_error("#LAF-DUMP 1\n#END\t7\n") == Errc::count_mismatch);
  CHECK(read_error("#LAF-DUMP 1\n") == Errc::count_mismatch);  // no END
  CHECK(read_error("#LAF-DUMP 1\n#END\t0\nextra\n") == Errc::trailing_data);
  CHECK(read_error("#LAF-DUMP 1\nF\tn1\tPOS\n#END\t1\n") == Errc::arity_error);
  // dangling reference at END
  std::string dangling =
      "#LAF-DUMP 1\n"
      "#PRIMARY\tP1\tdata:,ab\tchar\t2\t" + sha256_hex("ab") + "\n"
      "#LAYER\tseg\tP1\t-\n"
      "N\tn1\tseg\tTOKEN\tr:R9\n"
      "#END\t3\n";
  CHECK(read_error(dangling) == Errc::unresolved_at_end);
}

TEST_CASE("truncation before END is detected") {
  std::string dump = write_dump(bracket_fixture(), true);
  std::size_t cut = dump.rfind("#END");
  std::string truncated = dump.substr(0, cut);
  Errc code = read_error(truncated);
  CHECK((code == Errc::unresolved_at_end || code == Errc::count_mismatch));
}

TEST_CASE("hash mismatch detected for inline primaries") {
  std::string hash = sha256_hex("not the text");
  std::string dump =
      "#LAF-DUMP 1\n"
      "#PRIMARY\tP1\tdata:,abc\tchar\t3\t" + hash + "\n"
      "#END\t1\n";
  CHECK(read_error(dump) == Errc::hash_mismatch);
  ReadOptions opts;
  opts.verify_hashes = false;
  CHECK_NOTHROW(read_dump(dump, opts));
}

TEST_CASE("forward references resolve at END") {
  std::string hash = sha256_hex("the cat");
  std::string dump =
      "#LAF-DUMP 1\n"
      "N\tn1\tseg\tTOKEN\tr:r1\n"
      "R\tr1\tP1\t0\t3\n"
      "#LAYER\tseg\tP1\t-\n"
      "#PRIMARY\tP1\tdata:,the cat\tchar\t7\t" + hash + "\n"
      "#END\t4\n";
  Document d = read_dump(dump);
  CHECK(d.find_node("n1") != nullptr);
  CHECK(d.find_region("r1")->boxes[0][0] == Span{0, 3});
}

TEST_CASE("stream events for the empty document") {
  auto events = stream_read("#LAF-DUMP 1\n#END\t0\n");
  REQUIRE(events.size() == 2);
  CHECK(events[0].kind == StreamEvent::Kind::DocumentStart);
  CHECK(events[1].kind == StreamEvent::Kind::DocumentEnd);
  CHECK(events[1].record_count == 0);
}

TEST_CASE("NodeSeen precedes ReferenceResolved for a forward region") {
  std::string hash = sha256_hex("the cat");
  std::string dump =
      "#LAF-DUMP 1\n"
      "#PRIMARY\tP1\tdata:,the cat\tchar\t7\t" + hash + "\n"
      "#LAYER\tseg\tP1\t-\n"
      "N\tn1\tseg\tTOKEN\tr:r1\n"
      "R\tr1\tP1\t0\t3\n"
      "#END\t4\n";
  auto events = stream_read(dump);
  std::size_t node_at = 0, resolved_at = 0, region_at = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].kind == StreamEvent::Kind::NodeSeen) node_at = i;
    if (events[i].kind == StreamEvent::Kind::RegionSeen) region_at = i;
    if (events[i].kind == StreamEvent::Kind::ReferenceResolved) {
      CHECK(events[i].id == "r1");
      resolved_at = i;
    }
  }
  CHECK(node_at < region_at);
  CHECK(region_at < resolved_at);
}

TEST_CASE("ReferenceResolved fires at most once per forward-referenced id") {
  std::string hash = sha256_hex("the cat");
  // two records reference r1 before it is declared
  std::string dump =
      "#LAF-DUMP 1\n"
      "#PRIMARY\tP1\tdata:,the cat\tchar\t7\t" + hash + "\n"
      "#LAYER\tseg\tP1\t-\n"
      "N\tn1\tseg\tTOKEN\tr:r1\n"
      "N\tn2\tseg\tTOKEN\tr:r1\n"
      "R\tr1\tP1\t0\t3\n"
      "#END\t5\n";
  auto events = stream_read(dump);
  std::size_t resolved = 0, ends = 0;
  for (const StreamEvent& ev : events) {
    if (ev.kind == StreamEvent::Kind::ReferenceResolved) {
      ++resolved;
      CHECK(ev.id == "r1");
    }
    if (ev.kind == StreamEvent::Kind::DocumentEnd) ++ends;
  }
  CHECK(resolved == 1);
  CHECK(ends == 1);
}

TEST_CASE("folding stream events equals batch reading") {
  for (int trial = 0; trial < 10; ++trial) {
    Document d = laf::testing::random_document(rng);
    for (bool canonical : {true, false}) {
      std::string bytes = write_dump(d, canonical);
      Document batch = read_dump(bytes);
      Document folded = fold_events(stream_read(bytes));
      CHECK(doc_equal(batch, folded));
      CHECK(doc_equal(batch, d));
    }
  }
}

TEST_CASE("incremental feeding in odd-sized chunks") {
  Document d = bracket_fixture();
  std::string bytes = write_dump(d, true);
  StreamReader reader;
  for (std::size_t i = 0; i < bytes.size(); i += 7) {
    reader.feed(std::string_view(bytes).substr(i, 7));
  }
  reader.finish();
  std::vector<StreamEvent> events;
  while (auto ev = reader.poll()) events.push_back(std::move(*ev));
  Document folded = fold_events(events);
  CHECK(doc_equal(folded, d));
}

TEST_CASE("stream errors are terminal events") {
  auto events = stream_read("#LAF-DUMP 1\nN\tn1\tseg\tTOKEN\n#END\t9\n");
  REQUIRE(!events.empty());
  CHECK(events.back().kind == StreamEvent::Kind::Error);
  CHECK_THROWS_AS(fold_events(events), Error);

  auto truncated = stream_read("#LAF-DUMP 1\nN\tn1\tseg\tTOKEN\tr:r9\n");
  CHECK(truncated.back().kind == StreamEvent::Kind::Error);
  CHECK(truncated.back().error == Errc::unresolved_at_end);
}

TEST_CASE("streaming equivalence holds at the 10^4 record scale") {
  std::mt19937 big_rng(515151);
  laf::testing::RandomDocOptions o;
  o.layers = 4;
  o.regions = 2000;
  o.nodes = 4000;
  o.features = 3000;
  o.groups = 100;
  o.extent = 64;
  Document d = laf::testing::random_document(big_rng, o);
  std::string bytes = write_dump(d, /*canonical=*/false);
  std::size_t records = split(bytes, '\n').size();
  CHECK(records > 9000);
  Document folded = fold_events(stream_read(bytes));
  Document batch = read_dump(bytes);
  CHECK(doc_equal(folded, batch));
}

TEST_CASE("two primaries and a pixel-space region round trip") {
  DocumentBuilder b;
  b.add_primary(make_inline_primary("txt", laf::testing::kChar, "ab"));
  PrimaryDataRef img;
  img.pid = "img";
  img.uri = "scans/page1.png";
  img.space = AnchorSpace{SpaceKind::Pixel};
  img.extent = {640, 480};
  img.content_hash = sha256_hex("png-bytes-stand-in");
  b.add_primary(img);
  b.add_layer({"seg", {"txt"}, ""});
  b.add_layer({"zones", {"img"}, ""});
  b.add_region(make_region("r1", "txt", laf::testing::kChar,
                           std::vector<std::int64_t>{0, 2}));
  b.add_region(make_region("z1", "img", AnchorSpace{SpaceKind::Pixel},
                           std::vector<std::int64_t>{10, 200, 20, 100}));
  b.add_node({"t1", "seg", CategoryRef::registry("TOKEN"), {TargetRef::region("r1")}, {}});
  b.add_node({"v1", "zones", CategoryRef::registry("ZONE"), {TargetRef::region("z1")}, {}});
  Document d = b.close();
  std::string bytes = write_dump(d, true);
  CHECK(bytes.find("#PRIMARY\timg\tscans/page1.png\tpixel\t640\t480\t") !=
        std::string::npos);
  CHECK(bytes.find("R\tr1\timg\t10\t200\t20\t100") != std::string::npos);
  Document back = read_dump(bytes);  // file uri unavailable: hash not checked
  CHECK(doc_equal(back, d));
}

TEST_CASE("canonical dumps split at layer boundaries into valid prefixes") {
  Document d = bracket_fixture();
  DumpLayout layout = write_dump_layout(d);
  REQUIRE(layout.segments.size() == 2);
  CHECK(layout.segments[0].first == "seg");
  CHECK(layout.segments[1].first == "syn");
  CHECK(layout.trailing.empty());
  std::size_t running = layout.header_records;
  std::string prefix = layout.header;
  for (std::size_t i = 0; i < layout.segments.size(); ++i) {
    prefix += layout.segments[i].second;
    running += layout.segment_records[i];
    std::string candidate = prefix + "#END\t" + std::to_string(running) + "\n";
    Document part = read_dump(candidate);
    CHECK(part.layers().size() == d.layers().size());
  }
  // full assembly equals write_dump
  std::string full = prefix + layout.trailing + "#END\t" +
                     std::to_string(running + layout.trailing_records) + "\n";
  CHECK(full == write_dump(d, true));
}

TEST_CASE("uri and literal escaping survive round trips") {
  DocumentBuilder b;
  PrimaryDataRef p = make_inline_primary("P1", kChar, "line one\nline\ttwo");
  b.add_primary(p);
  b.add_layer({"seg", {"P1"}, "maps/my mapping\twith tab"});
  b.add_node({"n1", "seg", CategoryRef::registry("TOKEN"), {},
              {{CategoryRef::registry("NOTE"),
                FeatureValue::of_literal("a\tb\\c\nd")}}});
  Document d = b.close();
  Document back = read_dump(write_dump(d, true));
  CHECK(doc_equal(back, d));
  CHECK(back.find_layer("seg")->dcs_ref == "maps/my mapping\twith tab");
  CHECK(back.find_node("n1")->features[0].value.text == "a\tb\\c\nd");
  auto content = resolve_primary_content(*back.find_primary("P1"));
  REQUIRE(content.has_value());
  CHECK(*content == "line one\nline\ttwo");
}

TEST_CASE("duplicate declarations fail in both readers") {
  std::string hash = sha256_hex("ab");
  std::string dump =
      "#LAF-DUMP 1\n"
      "#PRIMARY\tP1\tdata:,ab\tchar\t2\t" + hash + "\n"
      "#LAYER\tseg\tP1\t-\n"
      "R\tr1\tP1\t0\t1\n"
      "R\tr1\tP1\t1\t2\n"
      "#END\t4\n";
  CHECK(read_error(dump) == Errc::duplicate_id);
  auto events = stream_read(dump);
  CHECK(events.back().kind == StreamEvent::Kind::Error);
  CHECK(events.back().error == Errc::duplicate_id);
}
