#include "mail/fusion/fusion_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mail/error.hpp"

namespace mail::fusion {

using numeric::Shape;

std::string_view to_string(SubNetwork net) noexcept { return net == SubNetwork::kScene ? "scene" : "concept"; }

void FusionConfig::validate() const {
  if (layers < 1 || layers > kMaxLayers) {
    throw Error(ErrorCode::kInvalidConfig, "layer count must be in [1, 8], got " + std::to_string(layers));
  }
  if (dim == 0 || context_dim == 0) throw Error(ErrorCode::kInvalidConfig, "embedding dimensions must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "leaky slope must be in [0, 1)");
  }
}

RelationIndex::RelationIndex(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!lookup_.emplace(names_[i], i).second) {
      throw Error(ErrorCode::kInvalidConfig, "duplicate relation '" + names_[i] + "'");
    }
  }
}

RelationIndex RelationIndex::scene() {
  std::vector<std::string> names;
  for (const auto& e : graph::RelationVocabulary::standard().entries()) names.emplace_back(e.name);
  return RelationIndex(std::move(names));
}

std::size_t RelationIndex::forward_row(const std::string& relation) const {
  auto it = lookup_.find(relation);
  return it == lookup_.end() ? names_.size() : it->second;
}

std::size_t RelationIndex::inverse_row(const std::string& relation) const {
  return names_.size() + 1 + forward_row(relation);
}

std::string RelationIndex::row_label(std::size_t row) const {
  const std::size_t base = row % (names_.size() + 1);
  std::string name = base < names_.size() ? names_[base] : "<unk>";
  return row > names_.size() ? name + "^-1" : name;
}

GraphTopology::GraphTopology(const std::set<std::string>& entities, std::span<const graph::Triple> triples,
                             const RelationIndex& relations)
    : entities_(entities.begin(), entities.end()), relations_(&relations) {
  for (std::size_t i = 0; i < entities_.size(); ++i) rows_.emplace(entities_[i], i);
  std::vector<Edge> edges;
  edges.reserve(2 * triples.size());
  for (const graph::Triple& t : triples) {
    const std::size_t h = row_of(t.head);
    const std::size_t tl = row_of(t.tail);
    edges.push_back(Edge{h, relations.forward_row(t.relation), tl});
    edges.push_back(Edge{tl, relations.inverse_row(t.relation), h});
  }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.head < b.head; });
  edges_ = std::move(edges);
  for (const Edge& e : edges_) {
    if (heads_.empty() || heads_.back() != e.head) heads_.push_back(e.head);
    segments_.push_back(heads_.size() - 1);
  }
}

std::size_t GraphTopology::row_of(const std::string& entity) const {
  auto it = rows_.find(entity);
  if (it == rows_.end()) throw Error(ErrorCode::kMissingEmbedding, "no embedding for entity '" + entity + "'");
  return it->second;
}

Tensor GraphState::embedding(const std::string& entity) const {
  const std::size_t r = topology->row_of(entity);
  auto src = entities.value().row(r);
  return Tensor::vector(std::vector<double>(src.begin(), src.end()));
}

std::string parameter_prefix(SubNetwork net, std::size_t layer) {
  return std::string(to_string(net)) + "/layer" + std::to_string(layer) + "/";
}

std::string relation_parameter(SubNetwork net) { return std::string(to_string(net)) + "/relations"; }

namespace {

// Glorot-uniform bound for a [fan_out, fan_in] matrix.
double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void init_network(ParameterStore& store, const FusionConfig& config, SubNetwork net, const RelationIndex& relations,
                  std::uint64_t seed) {
  const std::size_t d = config.dim;
  Tensor table(Shape{relations.rows(), d});
  for (std::size_t r = 0; r < relations.rows(); ++r) {
    const Tensor v = numeric::hashed_vector(relations.row_label(r), seed, d);
    std::copy(v.data().begin(), v.data().end(), table.row(r).begin());
  }
  store.add(relation_parameter(net), std::move(table));

  numeric::Rng rng(seed ^ numeric::fnv1a64(to_string(net)));
  for (std::size_t layer = 0; layer < config.layers; ++layer) {
    const std::string p = parameter_prefix(net, layer);
    store.add(p + "message", numeric::uniform_tensor(Shape{d, 3 * d}, glorot(3 * d, d), rng));
    store.add(p + "attention", numeric::uniform_tensor(Shape{d + config.context_dim},
                                                       std::sqrt(3.0 / static_cast<double>(d + config.context_dim)), rng));
    store.add(p + "mlp_w1", numeric::uniform_tensor(Shape{d, d}, glorot(d, d), rng));
    store.add(p + "mlp_b1", Tensor(Shape{d}));
    store.add(p + "mlp_w2", numeric::uniform_tensor(Shape{d, d}, glorot(d, d), rng));
    store.add(p + "mlp_b2", Tensor(Shape{d}));
  }
}

}  // namespace

void init_fusion_parameters(ParameterStore& store, const FusionConfig& config, const RelationIndex& scene_relations,
                            const RelationIndex& concept_relations, std::uint64_t seed) {
  config.validate();
  init_network(store, config, SubNetwork::kScene, scene_relations, seed);
  init_network(store, config, SubNetwork::kConcept, concept_relations, seed + 1);
}

LayerWeights bind_layer(Tape& tape, ParameterStore& store, SubNetwork net, std::size_t layer) {
  const std::string p = parameter_prefix(net, layer);
  return LayerWeights{tape.parameter(store, p + "message"), tape.parameter(store, p + "attention"),
                      tape.parameter(store, p + "mlp_w1"),  tape.parameter(store, p + "mlp_b1"),
                      tape.parameter(store, p + "mlp_w2"),  tape.parameter(store, p + "mlp_b2")};
}

GraphState initial_state(Tape& tape, ParameterStore& store, const GraphTopology& topology, SubNetwork net,
                         const numeric::EmbeddingTable& entity_table) {
  const std::size_t d = entity_table.dim();
  Tensor rows(Shape{topology.entity_count(), d});
  for (std::size_t i = 0; i < topology.entity_count(); ++i) {
    const Tensor v = entity_table.lookup(topology.entities()[i]);
    std::copy(v.data().begin(), v.data().end(), rows.row(i).begin());
  }
  Var relations = tape.parameter(store, relation_parameter(net));
  if (relations.value().rows() != topology.relations().rows() || relations.value().cols() != d) {
    throw Error(ErrorCode::kDimensionMismatch, "relation table " + numeric::shape_string(relations.shape()) +
                                                   " does not match topology");
  }
  return GraphState{&topology, tape.constant(std::move(rows)), relations, 0};
}

Var compute_message(const GraphState& state, const graph::Triple& triple, const LayerWeights& weights, bool inverse) {
  const GraphTopology& topo = *state.topology;
  const std::size_t h = topo.row_of(inverse ? triple.tail : triple.head);
  const std::size_t t = topo.row_of(inverse ? triple.head : triple.tail);
  const std::size_t r = inverse ? topo.relations().inverse_row(triple.relation) : topo.relations().forward_row(triple.relation);
  const Var parts[] = {numeric::row(state.entities, h), numeric::row(state.relations, r),
                       numeric::row(state.entities, t)};
  return numeric::linear(numeric::concat(parts), weights.message);
}

Var attention_weights(std::span<const Var> messages, Var context, const LayerWeights& weights, AttentionMode mode,
                      double slope) {
  if (messages.empty()) throw Error(ErrorCode::kShapeMismatch, "attention over an empty neighbourhood");
  std::vector<Var> scores;
  scores.reserve(messages.size());
  for (const Var& m : messages) {
    const Var joined[] = {m, context};
    scores.push_back(numeric::leaky_relu(numeric::dot(weights.attention, numeric::concat(joined)), slope));
  }
  Var stacked = numeric::concat(scores);
  const std::vector<std::size_t> one_segment(messages.size(), 0);
  return mode == AttentionMode::kSoftmax ? numeric::segment_softmax(stacked, one_segment, 1)
                                         : numeric::segment_normalize(stacked, one_segment, 1);
}

GraphState layer_update(const GraphState& state, Var context, const LayerWeights& weights, const FusionConfig& config,
                        SubNetwork net, AttentionTrace* trace) {
  const GraphTopology& topo = *state.topology;
  GraphState next = state;
  next.layer = state.layer + 1;
  const std::size_t n_edges = topo.edges().size();
  if (n_edges == 0) return next;

  std::vector<std::size_t> heads(n_edges), relations(n_edges), tails(n_edges);
  for (std::size_t i = 0; i < n_edges; ++i) {
    heads[i] = topo.edges()[i].head;
    relations[i] = topo.edges()[i].relation;
    tails[i] = topo.edges()[i].tail;
  }
  const Var triple_rows[] = {numeric::gather_rows(state.entities, heads),
                             numeric::gather_rows(state.relations, relations),
                             numeric::gather_rows(state.entities, tails)};
  Var messages = numeric::linear(numeric::concat_cols(triple_rows), weights.message);

  const Var scored[] = {messages, numeric::broadcast_rows(context, n_edges)};
  Var raw = numeric::leaky_relu(numeric::matvec(numeric::concat_cols(scored), weights.attention), config.leaky_slope);
  const std::size_t n_heads = topo.heads().size();
  Var alpha = config.attention == AttentionMode::kSoftmax
                  ? numeric::segment_softmax(raw, topo.segments(), n_heads)
                  : numeric::segment_normalize(raw, topo.segments(), n_heads);

  Var aggregated = numeric::segment_weighted_sum(messages, alpha, topo.segments(), n_heads);
  Var hidden = numeric::leaky_relu(numeric::linear(aggregated, weights.mlp_w1, weights.mlp_b1), config.leaky_slope);
  Var combined = numeric::linear(hidden, weights.mlp_w2, weights.mlp_b2);
  next.entities = numeric::scatter_add_rows(state.entities, topo.heads(), combined);

  if (trace != nullptr) {
    const Tensor& a = alpha.value();
    for (std::size_t i = 0; i < n_edges; ++i) {
      trace->push_back(AttentionRecord{net, state.layer, topo.entities()[heads[i]],
                                       topo.relations().row_label(relations[i]), topo.entities()[tails[i]], a[i]});
    }
  }
  return next;
}

std::pair<GraphState, GraphState> medium_exchange(const GraphState& scene, const GraphState& concept_state,
                                                  std::span<const std::string> mediums, std::size_t layer) {
  std::vector<std::size_t> scene_rows, concept_rows;
  for (const std::string& m : mediums) {
    if (!scene.topology->contains(m) || !concept_state.topology->contains(m)) {
      throw Error(ErrorCode::kMediumMissing, "medium '" + m + "' is not present in both graphs");
    }
    scene_rows.push_back(scene.topology->row_of(m));
    concept_rows.push_back(concept_state.topology->row_of(m));
  }
  if (layer == 0 || mediums.empty()) return {scene, concept_state};
  GraphState s = scene;
  GraphState c = concept_state;
  s.entities = numeric::replace_rows(scene.entities, scene_rows, concept_state.entities, concept_rows);
  c.entities = numeric::replace_rows(concept_state.entities, concept_rows, scene.entities, scene_rows);
  return {s, c};
}

FusionResult forward(Tape& tape, ParameterStore& store, const GraphTopology& scene, const GraphTopology& concept_graph,
                     std::span<const std::string> mediums, Var context, const FusionConfig& config,
                     const numeric::EmbeddingTable& entity_table, AttentionTrace* trace) {
  config.validate();
  if (entity_table.dim() != config.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "entity table dim " + std::to_string(entity_table.dim()) +
                                                   " != model dim " + std::to_string(config.dim));
  }
  if (context.value().numel() != config.context_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "context embedding has " + std::to_string(context.value().numel()) +
                                                   " values, expected " + std::to_string(config.context_dim));
  }
  FusionResult result{initial_state(tape, store, scene, SubNetwork::kScene, entity_table),
                      initial_state(tape, store, concept_graph, SubNetwork::kConcept, entity_table),
                      {}, 0, 0};
  for (std::size_t layer = 0; layer < config.layers; ++layer) {
    const LayerWeights ws = bind_layer(tape, store, SubNetwork::kScene, layer);
    const LayerWeights wc = bind_layer(tape, store, SubNetwork::kConcept, layer);
    result.scene = layer_update(result.scene, context, ws, config, SubNetwork::kScene, trace);
    result.concept_state = layer_update(result.concept_state, context, wc, config, SubNetwork::kConcept, trace);
    ++result.scene_updates;
    ++result.concept_updates;
    if (config.exchange_enabled) {
      auto [s, c] = medium_exchange(result.scene, result.concept_state, mediums, layer);
      if (layer >= 1 && !mediums.empty()) result.exchanged_after.push_back(layer);
      result.scene = s;
      result.concept_state = c;
    }
  }
  return result;
}

}  // namespace mail::fusion
