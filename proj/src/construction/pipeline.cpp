#include "mail/construction/pipeline.hpp"

#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "mail/error.hpp"

namespace mail::construction {

namespace {

// Function words, colours and frequent caption verbs/adjectives.
const std::unordered_set<std::string>& non_mentions() {
  static const std::unordered_set<std::string> words = {
      "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "another", "other",
      "in", "on", "at", "of", "to", "from", "by", "with", "without", "under", "over", "above", "below", "behind",
      "beside", "between", "near", "into", "onto", "through", "across", "along", "around", "against", "among",
      "inside", "outside", "up", "down", "off", "out", "for", "about", "like", "while", "during", "next", "front",
      "top", "bottom", "side", "left", "right", "middle", "and", "or", "but", "nor", "so", "yet", "as", "than",
      "he", "she", "it", "they", "we", "you", "i", "his", "her", "its", "their", "our", "your", "my", "him",
      "them", "us", "me", "who", "which", "what", "where", "there", "here", "is", "are", "was", "were", "be",
      "been", "being", "has", "have", "had", "does", "do", "did", "can", "could", "will", "would", "may",
      "might", "appears", "seems", "looks", "stands", "sits", "wears", "holds", "carries", "shows", "contains",
      "also", "very", "too", "just", "not", "no", "all", "both", "many", "several", "few", "one", "two", "three",
      "four", "five", "red", "orange", "yellow", "green", "blue", "purple", "pink", "brown", "black", "white",
      "gray", "grey", "silver", "gold", "large", "small", "big", "little", "tall", "short", "long", "old",
      "young", "new", "bright", "dark", "light", "colorful", "wooden", "metal", "plastic", "pink", "detailed",
      "image", "picture", "photo", "scene", "background", "foreground",
  };
  return words;
}

bool is_mention_token(const std::string& w) {
  if (w.size() < 2 || non_mentions().count(w) != 0) return false;
  if (std::isdigit(static_cast<unsigned char>(w[0]))) return false;
  auto ends_with = [&](const char* s) {
    const std::size_t n = std::char_traits<char>::length(s);
    return w.size() > n + 2 && w.compare(w.size() - n, n, s) == 0;
  };
  // participles and adverbs
  return !ends_with("ing") && !ends_with("ly");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

CaptionRecord generate_caption(const std::string& image_ref, LlmClient& llm, const PromptTemplate& tpl,
                               const std::string& model_tag) {
  std::string text = llm.complete(render_caption_prompt(tpl, image_ref));
  if (trim(text).empty()) throw Error(ErrorCode::kEmptyResponse, "empty caption for '" + image_ref + "'");
  return CaptionRecord{image_ref, std::move(text), model_tag};
}

std::vector<std::string> extract_mentions(const std::string& caption) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string word;
  auto flush = [&] {
    if (!word.empty() && is_mention_token(word) && seen.insert(word).second) out.push_back(word);
    word.clear();
  };
  for (char ch : caption) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || (ch == '-' && !word.empty())) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::string_view to_string(RejectReason reason) noexcept {
  switch (reason) {
    case RejectReason::kMalformed: return "MALFORMED";
    case RejectReason::kUnknownRelation: return "UNKNOWN_RELATION";
    case RejectReason::kDuplicate: return "DUPLICATE";
  }
  return "?";
}

std::optional<graph::Triple> parse_triple_line(const std::string& line) {
  static const std::regex pattern(R"(^\s*\(\s*([^(),]+?)\s*,\s*([^(),]+?)\s*,\s*([^(),]+?)\s*\)\s*$)");
  std::smatch m;
  if (!std::regex_match(line, m, pattern)) return std::nullopt;
  graph::Triple t{graph::normalize_entity(m[1].str()), graph::normalize_entity(m[2].str()),
                  graph::normalize_entity(m[3].str())};
  if (t.head.empty() || t.relation.empty() || t.tail.empty()) return std::nullopt;
  return t;
}

ExtractionResult parse_scene_triples(const std::string& response, std::span<const std::string> mentions,
                                     const graph::RelationVocabulary& vocab) {
  ExtractionResult result;
  result.raw_response = response;
  std::set<std::string> mentioned;
  for (const auto& m : mentions) mentioned.insert(graph::normalize_entity(m));
  std::set<graph::Triple> seen;
  std::istringstream in(response);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto t = parse_triple_line(line);
    if (!t) {
      result.rejected.push_back({line, RejectReason::kMalformed});
    } else if (!vocab.contains(t->relation)) {
      result.rejected.push_back({line, RejectReason::kUnknownRelation});
    } else if (!seen.insert(*t).second) {
      result.rejected.push_back({line, RejectReason::kDuplicate});
    } else {
      if (mentioned.count(t->head) == 0) result.warnings.push_back("head '" + t->head + "' is not a mentioned entity");
      result.accepted.push_back(*t);
    }
  }
  return result;
}

ExtractionResult extract_scene_triples(const CaptionRecord& caption, std::span<const std::string> mentions,
                                       const graph::RelationVocabulary& vocab, LlmClient& llm,
                                       const PromptTemplate& tpl) {
  if (mentions.empty()) throw Error(ErrorCode::kInvalidConfig, "triple extraction needs at least one mention");
  std::vector<std::string> relations;
  for (const auto& e : vocab.entries()) relations.emplace_back(e.name);
  ExtractionResult result =
      parse_scene_triples(llm.complete(render_scene_prompt(tpl, caption.text, mentions, relations)), mentions, vocab);
  if (result.accepted.empty()) {
    throw Error(ErrorCode::kAllLinesRejected, "no usable triple among " + std::to_string(result.rejected.size()) +
                                                  " lines for '" + caption.image_ref + "'");
  }
  return result;
}

LinkResult link_concepts(std::span<const std::string> mentions, std::span<const std::string> topic_entities,
                         KgClient& kg, std::size_t hop_limit) {
  if (hop_limit == 0) throw Error(ErrorCode::kInvalidConfig, "hop_limit must be at least 1");
  std::vector<std::string> seeds;
  std::set<std::string> seen;
  for (auto list : {mentions, topic_entities}) {
    for (const auto& s : list) {
      std::string id = graph::normalize_entity(s);
      if (!id.empty() && seen.insert(id).second) seeds.push_back(std::move(id));
    }
  }
  LinkResult result;
  std::vector<graph::Triple> triples;
  std::size_t failures = 0;
  for (const auto& seed : seeds) {
    try {
      for (graph::Triple& t : kg.neighbours(seed, hop_limit)) {
        if (graph::normalize_entity(t.head).empty() || graph::normalize_entity(t.tail).empty() ||
            graph::normalize_entity(t.relation).empty()) {
          result.warnings.push_back("dropped kg triple with an empty field for '" + seed + "'");
          continue;
        }
        triples.push_back(std::move(t));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kServiceUnavailable) throw;
      ++failures;
      result.warnings.push_back("kg lookup failed for '" + seed + "': " + e.what());
    }
  }
  if (!seeds.empty() && failures == seeds.size()) {
    throw Error(ErrorCode::kServiceUnavailable, "kg lookup failed for all " + std::to_string(seeds.size()) + " seeds");
  }
  result.graph = graph::make_concept_graph(triples, seeds, graph::Provenance::kKg);
  return result;
}

std::vector<ConstructionInput> load_construction_inputs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<ConstructionInput> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const nlohmann::json doc = nlohmann::json::parse(line);
      ConstructionInput input;
      input.id = doc.at("id").get<std::string>();
      input.image_ref = doc.value("image_ref", "");
      input.caption = doc.value("caption", "");
      input.question = doc.value("question", "");
      input.topic_entities = doc.value("topic_entities", std::vector<std::string>{});
      for (const auto& g : doc.value("gold_answers", nlohmann::json::array())) {
        if (g.is_string()) {
          input.gold_answers.push_back({g.get<std::string>(), 1.0});
        } else {
          input.gold_answers.push_back({g.at("entity").get<std::string>(), g.value("weight", 1.0)});
        }
      }
      if (input.image_ref.empty() && input.caption.empty()) {
        throw Error(ErrorCode::kParseError, "record needs image_ref or caption");
      }
      out.push_back(std::move(input));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ConstructedInstance construct_instance(const ConstructionInput& input, LlmClient& llm, KgClient& kg,
                                       const ConstructionOptions& options) {
  ConstructedInstance out;
  out.caption = input.caption.empty()
                    ? generate_caption(input.image_ref, llm, options.caption_template, options.model_tag)
                    : CaptionRecord{input.image_ref, input.caption, "provided"};
  const std::vector<std::string> mentions = extract_mentions(out.caption.text);
  out.extraction = extract_scene_triples(out.caption, mentions, graph::RelationVocabulary::standard(), llm,
                                         options.scene_template);
  LinkResult linked = link_concepts(mentions, input.topic_entities, kg, options.hop_limit);

  graph::CoupledInstance& inst = out.instance;
  inst.id = input.id;
  inst.scene_graph = graph::make_scene_graph(out.extraction.accepted, mentions);
  inst.concept_graph = std::move(linked.graph);
  inst.question = input.question;
  for (const auto& t : input.topic_entities) inst.topic_entities.push_back(graph::normalize_entity(t));
  for (const auto& g : input.gold_answers) inst.gold_answers.push_back({graph::normalize_entity(g.entity), g.weight});

  out.warnings = out.extraction.warnings;
  out.warnings.insert(out.warnings.end(), linked.warnings.begin(), linked.warnings.end());
  for (const auto& v : graph::validate(inst)) {
    out.warnings.push_back(std::string(graph::to_string(v.code)) + ": " + v.detail);
  }
  return out;
}

}  // namespace mail::construction
