#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mail/graph/coupled_graph.hpp"
#include "mail/numeric/embedding_table.hpp"
#include "mail/numeric/ops.hpp"
#include "mail/numeric/random.hpp"

namespace mail::fusion {

using numeric::ParameterStore;
using numeric::Tape;
using numeric::Tensor;
using numeric::Var;

enum class AttentionMode {
  kSoftmax,  // alpha = exp(a) / sum exp(a)
  kLiteral,  // alpha = a / sum a; undefined for non-positive sums
};

enum class SubNetwork { kScene, kConcept };

std::string_view to_string(SubNetwork net) noexcept;

struct FusionConfig {
  std::size_t layers = 3;
  std::size_t dim = 64;
  std::size_t context_dim = 64;
  double leaky_slope = numeric::kLeakySlope;
  bool exchange_enabled = true;
  AttentionMode attention = AttentionMode::kSoftmax;

  static constexpr std::size_t kMaxLayers = 8;

  // Throws Error(kInvalidConfig) unless 1 <= layers <= 8 and dims are positive.
  void validate() const;
};

// Maps relation names to rows of a sub-network's relation embedding table.
// Every relation has a forward row and an inverse row used by the reciprocal
// edge added for each triple. Names outside the vocabulary share an
// "unknown" row.
class RelationIndex {
 public:
  explicit RelationIndex(std::vector<std::string> names);
  static RelationIndex scene();

  std::size_t rows() const noexcept { return 2 * (names_.size() + 1); }
  std::size_t forward_row(const std::string& relation) const;
  std::size_t inverse_row(const std::string& relation) const;
  const std::vector<std::string>& names() const noexcept { return names_; }
  // Name used in attention traces for a row ("r" or "r^-1").
  std::string row_label(std::size_t row) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

struct Edge {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;
};

// Weight-independent structure of one graph: entity rows (sorted by
// identifier) and directed edges grouped by head. Neighbourhood N_h is the
// set of edges leaving h, which includes the reciprocal of every triple
// ending at h.
class GraphTopology {
 public:
  GraphTopology(const std::set<std::string>& entities, std::span<const graph::Triple> triples,
                const RelationIndex& relations);

  std::size_t entity_count() const noexcept { return entities_.size(); }
  const std::vector<std::string>& entities() const noexcept { return entities_; }
  bool contains(const std::string& entity) const { return rows_.count(entity) != 0; }
  // Throws Error(kMissingEmbedding) for unknown entities.
  std::size_t row_of(const std::string& entity) const;

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  // For edge i: index into heads() of its head.
  const std::vector<std::size_t>& segments() const noexcept { return segments_; }
  // Entity rows with at least one outgoing edge, ascending.
  const std::vector<std::size_t>& heads() const noexcept { return heads_; }
  const RelationIndex& relations() const noexcept { return *relations_; }

 private:
  std::vector<std::string> entities_;
  std::unordered_map<std::string, std::size_t> rows_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> segments_;
  std::vector<std::size_t> heads_;
  const RelationIndex* relations_;
};

// Entity and relation embeddings of one graph at a given layer.
struct GraphState {
  const GraphTopology* topology = nullptr;
  Var entities;   // [entity_count, dim]
  Var relations;  // [relation rows, dim]
  std::size_t layer = 0;

  Tensor embedding(const std::string& entity) const;
};

// Trainable weights of one layer of one sub-network.
struct LayerWeights {
  Var message;    // [dim, 3 dim]: m = W (e_h, e_r, e_t)
  Var attention;  // [dim + context_dim]: a = leaky(a . (m || c))
  Var mlp_w1;     // [dim, dim]
  Var mlp_b1;     // [dim]
  Var mlp_w2;     // [dim, dim]
  Var mlp_b2;     // [dim]
};

std::string parameter_prefix(SubNetwork net, std::size_t layer);
std::string relation_parameter(SubNetwork net);

// Adds every fusion parameter to the store: per sub-network relation tables
// (initialised from hashed relation-name vectors) and per-layer weights.
void init_fusion_parameters(ParameterStore& store, const FusionConfig& config, const RelationIndex& scene_relations,
                            const RelationIndex& concept_relations, std::uint64_t seed);

LayerWeights bind_layer(Tape& tape, ParameterStore& store, SubNetwork net, std::size_t layer);

// Initial state: entity rows from the input table, relation rows from the
// sub-network's trainable table.
GraphState initial_state(Tape& tape, ParameterStore& store, const GraphTopology& topology, SubNetwork net,
                         const numeric::EmbeddingTable& entity_table);

// Message of a single triple; throws Error(kMissingEmbedding) when an
// endpoint is not part of the state.
Var compute_message(const GraphState& state, const graph::Triple& triple, const LayerWeights& weights,
                    bool inverse = false);

// Context-aware attention over one neighbourhood's messages.
Var attention_weights(std::span<const Var> messages, Var context, const LayerWeights& weights,
                      AttentionMode mode = AttentionMode::kSoftmax, double slope = numeric::kLeakySlope);

struct AttentionRecord {
  SubNetwork net;
  std::size_t layer;
  std::string head;
  std::string relation;
  std::string tail;
  double alpha;
};

using AttentionTrace = std::vector<AttentionRecord>;

// One synchronous message-passing layer: every head reads the pre-layer
// state; e_h <- J(sum alpha m) + e_h; heads without edges keep their row.
GraphState layer_update(const GraphState& state, Var context, const LayerWeights& weights,
                        const FusionConfig& config, SubNetwork net = SubNetwork::kScene,
                        AttentionTrace* trace = nullptr);

// Swaps medium rows between the two graphs after layer `layer`; identity at
// layer 0. Throws Error(kMediumMissing) if a medium is absent from a graph.
std::pair<GraphState, GraphState> medium_exchange(const GraphState& scene, const GraphState& concept_state,
                                                  std::span<const std::string> mediums, std::size_t layer);

struct FusionResult {
  GraphState scene;
  GraphState concept_state;
  std::vector<std::size_t> exchanged_after;  // layers whose exchange swapped rows
  std::size_t scene_updates = 0;
  std::size_t concept_updates = 0;
};

FusionResult forward(Tape& tape, ParameterStore& store, const GraphTopology& scene, const GraphTopology& concept_graph,
                     std::span<const std::string> mediums, Var context, const FusionConfig& config,
                     const numeric::EmbeddingTable& entity_table, AttentionTrace* trace = nullptr);

}  // namespace mail::fusion
