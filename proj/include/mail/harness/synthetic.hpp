#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mail/graph/coupled_graph.hpp"

namespace mail::harness {

enum class SyntheticFamily {
  // Which medium matters is marked only in the scene graph; the concept graph
  // holds one answer per medium.
  kCrossModal,
  // Same layout, but the concept graph names its entities differently, so no
  // entity is shared and there is nothing to exchange.
  kNoMediums,
};

std::string_view to_string(SyntheticFamily family) noexcept;
SyntheticFamily parse_family(std::string_view name);

struct SyntheticSpec {
  std::size_t n_instances = 200;
  std::size_t scene_entities = 6;  // actor + mediums + attribute entities
  std::size_t mediums = 3;
  std::size_t distractors = 2;
  std::size_t answer_depth = 1;  // hops from the medium to its answer, 1 or 2
  std::uint64_t seed = 7;
  SyntheticFamily family = SyntheticFamily::kCrossModal;

  // Throws Error(kInfeasibleSpec).
  void validate() const;
};

inline constexpr const char* kSyntheticQuestion = "What is the person going to use this for?";
inline constexpr const char* kSyntheticTopic = "purpose";

// Deterministic per spec. In every instance an actor `intends_to` one medium
// (the key); the gold answer is the concept-graph node `answer_depth` hops
// from the key medium along its usage chain. Other mediums have answers of
// their own, so the concept graph alone cannot tell the key apart.
std::vector<graph::CoupledInstance> generate_synthetic(const SyntheticSpec& spec);

}  // namespace mail::harness
