#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mail/construction/clients.hpp"
#include "mail/construction/prompts.hpp"
#include "mail/graph/coupled_graph.hpp"

namespace mail::construction {

struct CaptionRecord {
  std::string image_ref;
  std::string text;
  std::string model_tag;

  bool operator==(const CaptionRecord&) const = default;
};

// Throws Error(kEmptyResponse) for a blank completion.
CaptionRecord generate_caption(const std::string& image_ref, LlmClient& llm, const PromptTemplate& tpl,
                               const std::string& model_tag = "");

// Content words of the caption in order of first appearance.
std::vector<std::string> extract_mentions(const std::string& caption);

enum class RejectReason { kMalformed, kUnknownRelation, kDuplicate };

std::string_view to_string(RejectReason reason) noexcept;

struct RejectedLine {
  std::string line;
  RejectReason reason;

  bool operator==(const RejectedLine&) const = default;
};

struct ExtractionResult {
  std::string raw_response;
  std::vector<graph::Triple> accepted;
  std::vector<RejectedLine> rejected;
  std::vector<std::string> warnings;

  bool operator==(const ExtractionResult&) const = default;
};

// "(head, relation, tail)" with optional surrounding whitespace; nullopt for
// anything else.
std::optional<graph::Triple> parse_triple_line(const std::string& line);

// Parses a completion line by line; blank lines are skipped. Heads outside
// the mentions are kept with a warning.
ExtractionResult parse_scene_triples(const std::string& response, std::span<const std::string> mentions,
                                     const graph::RelationVocabulary& vocab);

// Throws Error(kAllLinesRejected) when nothing usable comes back.
ExtractionResult extract_scene_triples(const CaptionRecord& caption, std::span<const std::string> mentions,
                                       const graph::RelationVocabulary& vocab, LlmClient& llm,
                                       const PromptTemplate& tpl);

struct LinkResult {
  graph::ConceptGraph graph;
  std::vector<std::string> warnings;
};

// Union of the KG neighbourhoods of every seed. Seeds that fail become
// warnings; if every seed fails, Error(kServiceUnavailable).
LinkResult link_concepts(std::span<const std::string> mentions, std::span<const std::string> topic_entities,
                         KgClient& kg, std::size_t hop_limit = 1);

struct ConstructionInput {
  std::string id;
  std::string image_ref;
  std::string caption;  // used as is when set, otherwise generated
  std::string question;
  std::vector<std::string> topic_entities;
  std::vector<graph::GoldAnswer> gold_answers;
};

// JSONL, one ConstructionInput per line. Throws Error(kParseError).
std::vector<ConstructionInput> load_construction_inputs(const std::filesystem::path& path);

struct ConstructionOptions {
  PromptTemplate caption_template = default_template(TemplateKind::kCaption);
  PromptTemplate scene_template = default_template(TemplateKind::kSceneGraph);
  std::size_t hop_limit = 1;
  std::string model_tag;
};

struct ConstructedInstance {
  graph::CoupledInstance instance;
  CaptionRecord caption;
  ExtractionResult extraction;
  std::vector<std::string> warnings;
};

ConstructedInstance construct_instance(const ConstructionInput& input, LlmClient& llm, KgClient& kg,
                                       const ConstructionOptions& options);

}  // namespace mail::construction
