#include "mail/harness/synthetic.hpp"

#include <array>
#include <cstdio>

#include "mail/error.hpp"
#include "mail/numeric/random.hpp"

namespace mail::harness {

namespace {

struct Tool {
  const char* object;
  const char* use;
};

constexpr std::array<Tool, 24> kTools = {{
    {"umbrella", "stay dry"},      {"coat", "keep warm"},        {"kite", "fly in wind"},
    {"knife", "cut food"},         {"bicycle", "ride to work"},  {"camera", "take photos"},
    {"guitar", "play music"},      {"ladder", "reach high"},     {"shovel", "dig soil"},
    {"towel", "dry off"},          {"helmet", "protect head"},   {"lamp", "light room"},
    {"broom", "sweep floor"},      {"hammer", "drive nails"},    {"scissors", "cut paper"},
    {"blanket", "stay cozy"},      {"bucket", "carry water"},    {"skateboard", "do tricks"},
    {"surfboard", "ride waves"},   {"racket", "hit ball"},       {"oven", "bake bread"},
    {"pillow", "rest head"},       {"backpack", "carry books"},  {"map", "find route"},
}};

constexpr std::array<const char*, 8> kActors = {"woman", "man", "child", "boy", "girl", "chef", "worker", "student"};

constexpr std::array<const char*, 12> kAttributes = {"table",  "street", "bench", "red",  "blue",  "wood",
                                                     "shelf", "grass",  "window", "wall", "metal", "green"};

constexpr std::array<const char*, 12> kDistractors = {"store",  "factory", "plastic", "shop", "weather", "summer",
                                                      "travel", "kitchen", "office",  "beach", "park",   "garage"};

constexpr std::array<const char*, 6> kAttributeRelations = {"at_location", "next_to",    "has_color",
                                                            "made_of",     "covered_by", "in_front_of"};

std::string concept_name(const std::string& entity, SyntheticFamily family) {
  return family == SyntheticFamily::kNoMediums ? "kb " + entity : entity;
}

std::vector<std::size_t> sample(numeric::Rng& rng, std::size_t pool, std::size_t k) {
  std::vector<std::size_t> idx(pool);
  for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
  rng.shuffle(idx);
  idx.resize(k);
  return idx;
}

}  // namespace

std::string_view to_string(SyntheticFamily family) noexcept {
  return family == SyntheticFamily::kCrossModal ? "cross_modal" : "no_mediums";
}

SyntheticFamily parse_family(std::string_view name) {
  if (name == "cross_modal") return SyntheticFamily::kCrossModal;
  if (name == "no_mediums") return SyntheticFamily::kNoMediums;
  throw Error(ErrorCode::kInvalidConfig, "unknown synthetic family '" + std::string(name) + "'");
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInfeasibleSpec, why); };
  if (n_instances == 0) fail("n_instances must be positive");
  if (mediums == 0) fail("at least one medium is required");
  if (mediums > kTools.size()) fail("at most " + std::to_string(kTools.size()) + " mediums supported");
  if (scene_entities < mediums + 1) {
    fail("scene_entities (" + std::to_string(scene_entities) + ") must leave room for the actor and " +
         std::to_string(mediums) + " mediums");
  }
  if (scene_entities - mediums - 1 > kAttributes.size()) fail("too many scene entities");
  if (distractors > kDistractors.size()) fail("at most " + std::to_string(kDistractors.size()) + " distractors");
  if (answer_depth != 1 && answer_depth != 2) fail("answer_depth must be 1 or 2");
}

std::vector<graph::CoupledInstance> generate_synthetic(const SyntheticSpec& spec) {
  using graph::Triple;
  spec.validate();
  numeric::Rng rng(spec.seed);
  const std::size_t n_attributes = spec.scene_entities - spec.mediums - 1;
  std::vector<graph::CoupledInstance> out;
  out.reserve(spec.n_instances);

  for (std::size_t n = 0; n < spec.n_instances; ++n) {
    const std::vector<std::size_t> tools = sample(rng, kTools.size(), spec.mediums);
    const std::string actor = kActors[rng.index(kActors.size())];
    const std::vector<std::size_t> attrs = sample(rng, kAttributes.size(), n_attributes);
    const std::size_t key = rng.index(spec.mediums);

    std::vector<Triple> scene;
    std::vector<std::string> mentions = {actor};
    for (std::size_t j = 0; j < spec.mediums; ++j) {
      const std::string m = kTools[tools[j]].object;
      mentions.push_back(m);
      if (j == key) {
        scene.push_back({actor, "intends_to", m});
      } else if (rng.index(2) == 0) {
        scene.push_back({actor, "holds", m});
      }
      if (n_attributes > 0) {
        scene.push_back({m, kAttributeRelations[rng.index(kAttributeRelations.size())],
                         kAttributes[attrs[rng.index(n_attributes)]]});
      }
    }
    for (std::size_t a : attrs) mentions.emplace_back(kAttributes[a]);

    std::vector<Triple> concept_triples;
    std::string gold;
    for (std::size_t j = 0; j < spec.mediums; ++j) {
      const std::string m = concept_name(kTools[tools[j]].object, spec.family);
      const std::string use = kTools[tools[j]].use;
      if (spec.answer_depth == 1) {
        concept_triples.push_back({m, "used_for", use});
      } else {
        const std::string via = m + " function";
        concept_triples.push_back({m, "used_for", via});
        concept_triples.push_back({via, "related_to", use});
      }
      if (j == key) gold = use;
    }
    for (std::size_t d : sample(rng, kDistractors.size(), spec.distractors)) {
      const std::string m = concept_name(kTools[tools[rng.index(spec.mediums)]].object, spec.family);
      concept_triples.push_back({m, "related_to", kDistractors[d]});
    }
    const std::vector<std::string> seeds = {kSyntheticTopic};

    graph::CoupledInstance inst;
    char id[48];
    std::snprintf(id, sizeof id, "syn-%llu-%04zu", static_cast<unsigned long long>(spec.seed), n + 1);
    inst.id = id;
    inst.scene_graph = graph::make_scene_graph(scene, mentions);
    inst.concept_graph = graph::make_concept_graph(concept_triples, seeds, graph::Provenance::kSynthetic);
    inst.question = kSyntheticQuestion;
    inst.topic_entities = {kSyntheticTopic};
    inst.gold_answers = {{gold, 1.0}};
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace mail::harness
