#include "mail/graph/coupled_graph.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <unordered_set>

namespace mail::graph {

std::string_view to_string(RelationCategory category) noexcept {
  return category == RelationCategory::kSpatial ? "spatial" : "object";
}

RelationVocabulary::RelationVocabulary()
    : entries_{{
          {"at_location", RelationCategory::kSpatial},
          {"next_to", RelationCategory::kSpatial},
          {"in_front_of", RelationCategory::kSpatial},
          {"surrounded_by", RelationCategory::kSpatial},
          {"covered_by", RelationCategory::kSpatial},
          {"includes", RelationCategory::kSpatial},
          {"holds", RelationCategory::kSpatial},
          {"has_property", RelationCategory::kObject},
          {"has_color", RelationCategory::kObject},
          {"made_of", RelationCategory::kObject},
          {"wears", RelationCategory::kObject},
          {"intends_to", RelationCategory::kObject},
      }} {}

const RelationVocabulary& RelationVocabulary::standard() {
  static const RelationVocabulary vocabulary;
  return vocabulary;
}

std::optional<std::size_t> RelationVocabulary::index_of(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

std::string RelationVocabulary::joined(std::string_view separator) const {
  std::string out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) out += separator;
    out += entries_[i].name;
  }
  return out;
}

std::string normalize_entity(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

bool is_normalized_entity(std::string_view text) { return normalize_entity(text) == text; }

std::string_view to_string(Provenance provenance) noexcept {
  return provenance == Provenance::kKg ? "kg" : "synthetic";
}

std::optional<Provenance> provenance_from_string(std::string_view text) noexcept {
  if (text == "kg") return Provenance::kKg;
  if (text == "synthetic") return Provenance::kSynthetic;
  return std::nullopt;
}

namespace {

Triple normalized(const Triple& t) {
  return Triple{normalize_entity(t.head), normalize_entity(t.relation), normalize_entity(t.tail)};
}

}  // namespace

SceneGraph make_scene_graph(std::span<const Triple> triples, std::span<const std::string> mentions) {
  SceneGraph g;
  std::set<std::string> seen_mentions;
  for (const std::string& m : mentions) {
    std::string id = normalize_entity(m);
    if (id.empty() || !seen_mentions.insert(id).second) continue;
    g.entities.insert(id);
    g.mentions.push_back(std::move(id));
  }
  std::set<Triple> seen;
  for (const Triple& raw : triples) {
    Triple t = normalized(raw);
    if (!seen.insert(t).second) continue;
    g.entities.insert(t.head);
    g.entities.insert(t.tail);
    g.triples.push_back(std::move(t));
  }
  return g;
}

ConceptGraph make_concept_graph(std::span<const Triple> triples, std::span<const std::string> seeds,
                                Provenance provenance) {
  ConceptGraph g;
  for (const std::string& s : seeds) {
    std::string id = normalize_entity(s);
    if (!id.empty()) g.entities.insert(std::move(id));
  }
  std::set<Triple> seen;
  for (const Triple& raw : triples) {
    Triple t = normalized(raw);
    if (!seen.insert(t).second) continue;
    g.entities.insert(t.head);
    g.entities.insert(t.tail);
    g.triples.push_back(std::move(t));
    g.provenance.push_back(provenance);
  }
  return g;
}

std::string_view to_string(ViolationCode code) noexcept {
  switch (code) {
    case ViolationCode::kEmptyId: return "EMPTY_ID";
    case ViolationCode::kEmptyEntity: return "EMPTY_ENTITY";
    case ViolationCode::kNonNormalizedEntity: return "NON_NORMALIZED_ENTITY";
    case ViolationCode::kUnknownRelation: return "UNKNOWN_RELATION";
    case ViolationCode::kEndpointNotEntity: return "ENDPOINT_NOT_ENTITY";
    case ViolationCode::kMentionNotEntity: return "MENTION_NOT_ENTITY";
    case ViolationCode::kDuplicateTriple: return "DUPLICATE_TRIPLE";
    case ViolationCode::kProvenanceMismatch: return "PROVENANCE_MISMATCH";
    case ViolationCode::kTopicNotInConcept: return "TOPIC_NOT_IN_CONCEPT";
    case ViolationCode::kNoMediums: return "NO_MEDIUMS";
    case ViolationCode::kNoGoldAnswers: return "NO_GOLD_ANSWERS";
    case ViolationCode::kGoldNotCandidate: return "GOLD_NOT_CANDIDATE";
    case ViolationCode::kBadGoldWeight: return "BAD_GOLD_WEIGHT";
  }
  return "UNKNOWN";
}

namespace {

std::string describe(const Triple& t) { return "(" + t.head + ", " + t.relation + ", " + t.tail + ")"; }

void check_entity_ids(const std::set<std::string>& entities, const char* graph, ValidationReport& out) {
  for (const std::string& e : entities) {
    if (e.empty()) {
      out.push_back({ViolationCode::kEmptyEntity, std::string(graph) + " graph has an empty entity"});
    } else if (!is_normalized_entity(e)) {
      out.push_back({ViolationCode::kNonNormalizedEntity, std::string(graph) + " entity '" + e + "'"});
    }
  }
}

void check_triples(const std::vector<Triple>& triples, const std::set<std::string>& entities, const char* graph,
                   bool closed_vocabulary, ValidationReport& out) {
  std::set<Triple> seen;
  for (const Triple& t : triples) {
    const std::string where = std::string(graph) + " triple " + describe(t);
    if (t.head.empty() || t.tail.empty()) out.push_back({ViolationCode::kEmptyEntity, where});
    if (closed_vocabulary && !RelationVocabulary::standard().contains(t.relation)) {
      out.push_back({ViolationCode::kUnknownRelation, where});
    }
    if (!entities.count(t.head) || !entities.count(t.tail)) {
      out.push_back({ViolationCode::kEndpointNotEntity, where});
    }
    if (!seen.insert(t).second) out.push_back({ViolationCode::kDuplicateTriple, where});
  }
}

}  // namespace

ValidationReport validate(const CoupledInstance& instance) {
  ValidationReport out;
  if (instance.id.empty()) out.push_back({ViolationCode::kEmptyId, "instance id is empty"});

  const SceneGraph& scene = instance.scene_graph;
  const ConceptGraph& concept_graph = instance.concept_graph;
  check_entity_ids(scene.entities, "scene", out);
  check_entity_ids(concept_graph.entities, "concept", out);
  check_triples(scene.triples, scene.entities, "scene", /*closed_vocabulary=*/true, out);
  check_triples(concept_graph.triples, concept_graph.entities, "concept", /*closed_vocabulary=*/false, out);

  for (const std::string& m : scene.mentions) {
    if (!scene.entities.count(m)) out.push_back({ViolationCode::kMentionNotEntity, "mention '" + m + "'"});
  }
  if (concept_graph.provenance.size() != concept_graph.triples.size()) {
    out.push_back({ViolationCode::kProvenanceMismatch,
                   std::to_string(concept_graph.provenance.size()) + " provenance tags for " +
                       std::to_string(concept_graph.triples.size()) + " concept triples"});
  }
  for (const std::string& topic : instance.topic_entities) {
    if (!concept_graph.entities.count(topic)) {
      out.push_back({ViolationCode::kTopicNotInConcept, "topic entity '" + topic + "'"});
    }
  }
  if (mediums(scene, concept_graph).empty()) {
    out.push_back({ViolationCode::kNoMediums, "scene mentions and concept entities are disjoint"});
  }
  if (instance.gold_answers.empty()) out.push_back({ViolationCode::kNoGoldAnswers, "no gold answers"});
  for (const GoldAnswer& gold : instance.gold_answers) {
    if (!concept_graph.entities.count(gold.entity)) {
      out.push_back({ViolationCode::kGoldNotCandidate, "gold answer '" + gold.entity + "'"});
    }
    if (!(gold.weight > 0.0 && gold.weight <= 1.0)) {
      out.push_back({ViolationCode::kBadGoldWeight, "gold answer '" + gold.entity + "' weight " +
                                                        std::to_string(gold.weight)});
    }
  }
  return out;
}

std::vector<std::string> mediums(const SceneGraph& scene, const ConceptGraph& concept_graph) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const std::string& m : scene.mentions) {
    if (concept_graph.entities.count(m) && seen.insert(m).second) out.push_back(m);
  }
  return out;
}

std::size_t RelationHistogram::count(std::string_view relation) const {
  const auto idx = RelationVocabulary::standard().index_of(relation);
  return idx ? counts[*idx] : 0;
}

std::size_t RelationHistogram::total() const {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  return n;
}

RelationHistogram relation_histogram(std::span<const CoupledInstance> corpus) {
  RelationHistogram h;
  const RelationVocabulary& vocab = RelationVocabulary::standard();
  for (const CoupledInstance& instance : corpus) {
    for (const Triple& t : instance.scene_graph.triples) {
      if (auto idx = vocab.index_of(t.relation)) ++h.counts[*idx];
    }
  }
  return h;
}

std::string format_histogram(const RelationHistogram& histogram) {
  std::string out;
  char line[96];
  std::snprintf(line, sizeof line, "%-10s %-16s %10s\n", "category", "relation", "count");
  out += line;
  out += std::string(38, '-') + '\n';
  const auto entries = RelationVocabulary::standard().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string name(entries[i].name);
    const std::string category(to_string(entries[i].category));
    std::snprintf(line, sizeof line, "%-10s %-16s %10zu\n", category.c_str(), name.c_str(), histogram.counts[i]);
    out += line;
  }
  out += std::string(38, '-') + '\n';
  std::snprintf(line, sizeof line, "%-10s %-16s %10zu\n", "total", "", histogram.total());
  out += line;
  return out;
}

}  // namespace mail::graph
