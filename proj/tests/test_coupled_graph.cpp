#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mail/error.hpp"
#include "mail/graph/corpus.hpp"
#include "mail/numeric/random.hpp"
#include "test_support.hpp"

using namespace mail::graph;
using mail::testing::sakura_instance;

namespace {

bool has_code(const ValidationReport& report, ViolationCode code) {
  return std::any_of(report.begin(), report.end(), [&](const Violation& v) { return v.code == code; });
}

}  // namespace

TEST_CASE("relation vocabulary holds the twelve condensed relations") {
  const RelationVocabulary& vocab = RelationVocabulary::standard();
  REQUIRE(vocab.size() == 12);
  const std::vector<std::string> spatial = {"at_location", "next_to", "in_front_of", "surrounded_by",
                                            "covered_by", "includes", "holds"};
  const std::vector<std::string> object = {"has_property", "has_color", "made_of", "wears", "intends_to"};
  std::set<std::string_view> names;
  for (const RelationEntry& e : vocab.entries()) {
    names.insert(e.name);
    for (char ch : e.name) CHECK((std::islower(static_cast<unsigned char>(ch)) || ch == '_'));
    const std::string name(e.name);
    const bool is_spatial = std::find(spatial.begin(), spatial.end(), name) != spatial.end();
    const bool is_object = std::find(object.begin(), object.end(), name) != object.end();
    CHECK(is_spatial != is_object);
    CHECK((e.category == RelationCategory::kSpatial) == is_spatial);
  }
  CHECK(names.size() == 12);
  CHECK_FALSE(vocab.contains("near"));
}

TEST_CASE("entity normalisation case-folds and trims") {
  CHECK(normalize_entity("  Keep   Warm ") == "keep warm");
  CHECK(normalize_entity("SAKURA") == "sakura");
  CHECK(normalize_entity("") == "");
  CHECK(is_normalized_entity("spring blooming"));
  CHECK_FALSE(is_normalized_entity("Spring"));
}

TEST_CASE("validate accepts the sakura instance") {
  const CoupledInstance inst = sakura_instance();
  CHECK(validate(inst).empty());
}

TEST_CASE("validate reports machine-readable violations") {
  SUBCASE("off-vocabulary scene relation") {
    CoupledInstance inst = sakura_instance();
    inst.scene_graph.triples.push_back({"woman", "near", "tree"});
    CHECK(has_code(validate(inst), ViolationCode::kUnknownRelation));
  }
  SUBCASE("gold answer outside the candidate set") {
    CoupledInstance inst = sakura_instance();
    inst.gold_answers.push_back({"summer", 1.0});
    CHECK(has_code(validate(inst), ViolationCode::kGoldNotCandidate));
  }
  SUBCASE("structural violations") {
    CoupledInstance inst = sakura_instance();
    inst.id.clear();
    inst.scene_graph.triples.push_back(inst.scene_graph.triples.front());
    inst.scene_graph.mentions.push_back("ghost");
    inst.scene_graph.triples.push_back({"woman", "holds", "phone"});
    inst.concept_graph.provenance.pop_back();
    inst.gold_answers.push_back({"spring", 0.0});
    inst.topic_entities.push_back("weather");
    const ValidationReport report = validate(inst);
    CHECK(has_code(report, ViolationCode::kEmptyId));
    CHECK(has_code(report, ViolationCode::kDuplicateTriple));
    CHECK(has_code(report, ViolationCode::kMentionNotEntity));
    CHECK(has_code(report, ViolationCode::kEndpointNotEntity));
    CHECK(has_code(report, ViolationCode::kProvenanceMismatch));
    CHECK(has_code(report, ViolationCode::kBadGoldWeight));
    CHECK(has_code(report, ViolationCode::kTopicNotInConcept));
    // Pure: the same input yields the same report.
    const ValidationReport again = validate(inst);
    REQUIRE(again.size() == report.size());
    for (std::size_t i = 0; i < report.size(); ++i) {
      CHECK(again[i].code == report[i].code);
      CHECK(again[i].detail == report[i].detail);
    }
  }
  SUBCASE("no mediums and no gold") {
    CoupledInstance inst = sakura_instance();
    inst.concept_graph = make_concept_graph(std::vector<Triple>{{"x", "related_to", "y"}}, {}, Provenance::kKg);
    inst.topic_entities.clear();
    inst.gold_answers.clear();
    const ValidationReport report = validate(inst);
    CHECK(has_code(report, ViolationCode::kNoMediums));
    CHECK(has_code(report, ViolationCode::kNoGoldAnswers));
  }
}

TEST_CASE("mediums intersect mentions with concept entities in mention order") {
  SceneGraph scene;
  scene.mentions = {"coat", "sakura"};
  scene.entities = {"coat", "sakura"};
  ConceptGraph cg;
  cg.entities = {"coat", "sakura", "spring"};
  CHECK(mediums(scene, cg) == std::vector<std::string>{"coat", "sakura"});

  ConceptGraph disjoint;
  disjoint.entities = {"x", "y"};
  CHECK(mediums(scene, disjoint).empty());

  SceneGraph repeated;
  repeated.mentions = {"a", "b", "a"};
  ConceptGraph only_a;
  only_a.entities = {"a"};
  CHECK(mediums(repeated, only_a) == std::vector<std::string>{"a"});
}

TEST_CASE("mediums are contained in both graphs for random instances") {
  mail::numeric::Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    SceneGraph scene;
    ConceptGraph cg;
    for (int i = 0; i < 8; ++i) {
      const std::string e = "e" + std::to_string(rng.index(12));
      if (rng.uniform() < 0.6) scene.mentions.push_back(e);
      if (rng.uniform() < 0.5) cg.entities.insert(e);
    }
    const auto m = mediums(scene, cg);
    std::set<std::string> unique(m.begin(), m.end());
    CHECK(unique.size() == m.size());
    for (const std::string& e : m) {
      CHECK(std::find(scene.mentions.begin(), scene.mentions.end(), e) != scene.mentions.end());
      CHECK(cg.entities.count(e) == 1);
    }
  }
}

TEST_CASE("make_scene_graph collapses duplicate mentions and triples") {
  const std::vector<Triple> triples = {{"Coat", "has_color", "red"}, {"coat", "has_color", "red"}};
  const std::vector<std::string> mentions = {"coat", "the Coat", "coat", "woman"};
  const SceneGraph g = make_scene_graph(triples, mentions);
  CHECK(g.mentions == std::vector<std::string>{"coat", "the coat", "woman"});
  CHECK(g.triples.size() == 1);
  CHECK(g.entities == std::set<std::string>{"coat", "red", "the coat", "woman"});
}

TEST_CASE("relation histogram") {
  CHECK(relation_histogram({}).total() == 0);
  for (std::size_t c : relation_histogram({}).counts) CHECK(c == 0);

  const auto corpus = load_corpus(mail::testing::fixture_corpus());
  const RelationHistogram h = relation_histogram(corpus);
  std::size_t triples = 0;
  for (const auto& inst : corpus) triples += inst.scene_graph.triples.size();
  CHECK(h.total() == triples);

  const std::string table = format_histogram(h);
  CHECK(table.find("at_location") != std::string::npos);
  CHECK(table.find("intends_to") != std::string::npos);
}

TEST_CASE("shipped fixture matches its independently computed manifest") {
  const auto corpus = load_corpus(mail::testing::fixture_corpus());
  const CorpusManifest expected = read_manifest(manifest_path(mail::testing::fixture_corpus()));
  REQUIRE(corpus.size() == expected.instances.size());
  CHECK(relation_histogram(corpus) == expected.relation_counts);
  // Byte-canonical serialisation: re-serialising reproduces each record's checksum.
  CHECK(build_manifest(corpus) == expected);
  for (const auto& inst : corpus) {
    CAPTURE(inst.id);
    CHECK(validate(inst).empty());
  }
}

TEST_CASE("corpus save/load round-trips") {
  const auto dir = mail::testing::scratch_dir("corpus");
  const std::vector<CoupledInstance> corpus = {sakura_instance()};
  save_corpus(corpus, dir / "one.jsonl");
  CHECK(load_corpus(dir / "one.jsonl") == corpus);
  CHECK(read_manifest(manifest_path(dir / "one.jsonl")) == build_manifest(corpus));
}

TEST_CASE("truncated record is a PARSE_ERROR naming the record index") {
  const auto dir = mail::testing::scratch_dir("truncated");
  const std::string good = serialize_record(sakura_instance());
  {
    std::ofstream out(dir / "bad.jsonl");
    out << good << '\n' << good.substr(0, good.size() / 2) << '\n';
  }
  try {
    load_corpus(dir / "bad.jsonl");
    FAIL("expected PARSE_ERROR");
  } catch (const mail::Error& e) {
    CHECK(e.code() == mail::ErrorCode::kParseError);
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
  CHECK_THROWS_AS(load_corpus(dir / "missing.jsonl"), mail::Error);
}
