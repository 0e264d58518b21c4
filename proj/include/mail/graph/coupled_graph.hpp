#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mail::graph {

enum class RelationCategory { kSpatial, kObject };

std::string_view to_string(RelationCategory category) noexcept;

struct RelationEntry {
  std::string_view name;
  RelationCategory category;
};

// The twelve condensed scene relations. Scene graphs may only use these;
// concept graphs carry an open relation vocabulary from the knowledge graph.
class RelationVocabulary {
 public:
  static constexpr std::size_t kSize = 12;

  static const RelationVocabulary& standard();

  std::span<const RelationEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(std::string_view name) const noexcept { return index_of(name).has_value(); }
  std::optional<std::size_t> index_of(std::string_view name) const noexcept;
  // "at_location, next_to, ..." in vocabulary order.
  std::string joined(std::string_view separator = ", ") const;

 private:
  RelationVocabulary();
  std::array<RelationEntry, kSize> entries_;
};

// Case-folds ASCII letters, trims surrounding whitespace and collapses
// interior whitespace runs to one space.
std::string normalize_entity(std::string_view text);
bool is_normalized_entity(std::string_view text);

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const Triple&) const = default;
};

struct SceneGraph {
  std::set<std::string> entities;
  std::vector<Triple> triples;
  // Entities named in the caption, in order of first appearance.
  std::vector<std::string> mentions;

  bool operator==(const SceneGraph&) const = default;
};

enum class Provenance { kKg, kSynthetic };

std::string_view to_string(Provenance provenance) noexcept;
std::optional<Provenance> provenance_from_string(std::string_view text) noexcept;

struct ConceptGraph {
  std::set<std::string> entities;  // also the candidate answer set
  std::vector<Triple> triples;
  std::vector<Provenance> provenance;  // one tag per triple

  bool operator==(const ConceptGraph&) const = default;
};

struct GoldAnswer {
  std::string entity;
  double weight = 1.0;  // in (0, 1]

  bool operator==(const GoldAnswer&) const = default;
};

struct CoupledInstance {
  std::string id;
  SceneGraph scene_graph;
  ConceptGraph concept_graph;
  std::string question;
  std::vector<std::string> topic_entities;
  std::vector<GoldAnswer> gold_answers;

  bool operator==(const CoupledInstance&) const = default;
};

// Builds a scene graph whose entity set is the mentions plus every triple
// endpoint. Identifiers are normalised; duplicate mentions and triples keep
// their first occurrence.
SceneGraph make_scene_graph(std::span<const Triple> triples, std::span<const std::string> mentions);
ConceptGraph make_concept_graph(std::span<const Triple> triples, std::span<const std::string> seeds,
                                Provenance provenance);

enum class ViolationCode {
  kEmptyId,
  kEmptyEntity,
  kNonNormalizedEntity,
  kUnknownRelation,
  kEndpointNotEntity,
  kMentionNotEntity,
  kDuplicateTriple,
  kProvenanceMismatch,
  kTopicNotInConcept,
  kNoMediums,
  kNoGoldAnswers,
  kGoldNotCandidate,
  kBadGoldWeight,
};

std::string_view to_string(ViolationCode code) noexcept;

struct Violation {
  ViolationCode code;
  std::string detail;
};

using ValidationReport = std::vector<Violation>;

// Lists every structural violation; an empty report means the instance is a
// valid training instance. Pure.
ValidationReport validate(const CoupledInstance& instance);

// scene.mentions ∩ concept.entities in mention order, first occurrence only.
std::vector<std::string> mediums(const SceneGraph& scene, const ConceptGraph& concept_graph);

struct RelationHistogram {
  std::array<std::size_t, RelationVocabulary::kSize> counts{};

  std::size_t count(std::string_view relation) const;
  std::size_t total() const;
  bool operator==(const RelationHistogram&) const = default;
};

// Scene-triple counts per vocabulary relation; off-vocabulary relations
// (invalid instances) are not counted.
RelationHistogram relation_histogram(std::span<const CoupledInstance> corpus);
std::string format_histogram(const RelationHistogram& histogram);

}  // namespace mail::graph
