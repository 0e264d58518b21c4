#include "mail/harness/model.hpp"

#include <cstdio>
#include <set>

#include "mail/error.hpp"

namespace mail::harness {

using numeric::Tensor;

namespace {

std::string_view attention_name(fusion::AttentionMode mode) {
  return mode == fusion::AttentionMode::kSoftmax ? "softmax" : "literal";
}

fusion::AttentionMode parse_attention(const std::string& name) {
  if (name == "softmax") return fusion::AttentionMode::kSoftmax;
  if (name == "literal") return fusion::AttentionMode::kLiteral;
  throw Error(ErrorCode::kInvalidConfig, "unknown attention mode '" + name + "'");
}

std::unique_ptr<numeric::EmbeddingTable> make_table(const std::string& path, std::size_t dim, std::uint64_t seed) {
  if (path.empty()) return std::make_unique<numeric::EmbeddingTable>(dim, seed);
  return std::make_unique<numeric::EmbeddingTable>(numeric::EmbeddingTable::load(path, dim, seed));
}

}  // namespace

void ModelConfig::validate() const {
  fusion.validate();
  objectives::KernelConfig{sigma}.validate();
  if (answer_hidden == 0) throw Error(ErrorCode::kInvalidConfig, "answer_hidden must be positive");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"layers", c.fusion.layers},
          {"dim", c.fusion.dim},
          {"context_dim", c.fusion.context_dim},
          {"leaky_slope", c.fusion.leaky_slope},
          {"exchange_enabled", c.fusion.exchange_enabled},
          {"attention", attention_name(c.fusion.attention)},
          {"sigma", c.sigma},
          {"answer_hidden", c.answer_hidden},
          {"seed", c.seed},
          {"embedding_seed", c.embedding_seed},
          {"entity_embeddings", c.entity_embeddings},
          {"context_embeddings", c.context_embeddings}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc) {
  ModelConfig c;
  c.fusion.layers = doc.at("layers").get<std::size_t>();
  c.fusion.dim = doc.at("dim").get<std::size_t>();
  c.fusion.context_dim = doc.at("context_dim").get<std::size_t>();
  c.fusion.leaky_slope = doc.at("leaky_slope").get<double>();
  c.fusion.exchange_enabled = doc.at("exchange_enabled").get<bool>();
  c.fusion.attention = parse_attention(doc.at("attention").get<std::string>());
  c.sigma = doc.at("sigma").get<double>();
  c.answer_hidden = doc.at("answer_hidden").get<std::size_t>();
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.embedding_seed = doc.at("embedding_seed").get<std::uint64_t>();
  c.entity_embeddings = doc.value("entity_embeddings", "");
  c.context_embeddings = doc.value("context_embeddings", "");
  return c;
}

MailModel::MailModel(ModelConfig config, std::vector<std::string> concept_relations)
    : config_(std::move(config)),
      scene_relations_(std::make_unique<fusion::RelationIndex>(fusion::RelationIndex::scene())),
      concept_relations_(std::make_unique<fusion::RelationIndex>(std::move(concept_relations))) {
  config_.validate();
  entity_table_ = make_table(config_.entity_embeddings, config_.fusion.dim, config_.embedding_seed);
  context_table_ = make_table(config_.context_embeddings, config_.fusion.context_dim, config_.embedding_seed + 1);
  fusion::init_fusion_parameters(store_, config_.fusion, *scene_relations_, *concept_relations_, config_.seed);
  objectives::init_answer_head(store_, config_.fusion.dim, config_.fusion.context_dim, config_.answer_hidden,
                               config_.seed);
}

std::vector<std::string> MailModel::concept_relations_of(std::span<const graph::CoupledInstance> corpus) {
  std::set<std::string> names;
  for (const auto& inst : corpus)
    for (const auto& t : inst.concept_graph.triples) names.insert(t.relation);
  return {names.begin(), names.end()};
}

PreparedInstance MailModel::prepare(const graph::CoupledInstance& inst) const {
  return PreparedInstance{inst.id,
                          fusion::GraphTopology(inst.scene_graph.entities, inst.scene_graph.triples, *scene_relations_),
                          fusion::GraphTopology(inst.concept_graph.entities, inst.concept_graph.triples,
                                                *concept_relations_),
                          graph::mediums(inst.scene_graph, inst.concept_graph),
                          inst.gold_answers,
                          graph::normalize_entity(inst.question)};
}

std::string MailModel::context_parameter(const std::string& question) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(numeric::fnv1a64(graph::normalize_entity(question))));
  return std::string("context/") + hex;
}

void MailModel::register_contexts(std::span<const graph::CoupledInstance> corpus) {
  for (const auto& inst : corpus) {
    const std::string name = context_parameter(inst.question);
    if (!store_.contains(name)) store_.add(name, context_table_->lookup(graph::normalize_entity(inst.question)), true);
  }
}

Var MailModel::context(Tape& tape, const std::string& question) {
  const std::string name = context_parameter(question);
  if (store_.contains(name)) return tape.parameter(store_, name);
  return tape.constant(context_table_->lookup(graph::normalize_entity(question)));
}

InstancePass MailModel::run(Tape& tape, const PreparedInstance& inst, double lambda, bool medium_loss,
                            AttentionTrace* trace) {
  Var c = context(tape, inst.question);
  InstancePass pass{fusion::forward(tape, store_, inst.scene, inst.concept_graph, inst.mediums, c, config_.fusion,
                                    *entity_table_, trace),
                    {}, {}, {}, {}};
  pass.scores = objectives::answer_scores(pass.fusion.concept_state, c, objectives::bind_answer_head(tape, store_),
                                          config_.fusion.leaky_slope);
  pass.inference = objectives::inference_loss(pass.scores, inst.concept_graph.entities(), inst.gold_answers);
  if (!medium_loss) {
    pass.joint = pass.inference;
    return pass;
  }
  std::vector<Var> scene_rows, concept_rows;
  for (const std::string& m : inst.mediums) {
    scene_rows.push_back(numeric::row(pass.fusion.scene.entities, inst.scene.row_of(m)));
    concept_rows.push_back(numeric::row(pass.fusion.concept_state.entities, inst.concept_graph.row_of(m)));
  }
  pass.medium = objectives::mmd_loss(tape, scene_rows, concept_rows, config_.sigma);
  pass.joint = objectives::joint_loss(pass.inference, pass.medium, lambda);
  return pass;
}

std::map<std::string, double> MailModel::scores(const PreparedInstance& inst, AttentionTrace* trace) {
  Tape tape;
  Var c = context(tape, inst.question);
  fusion::FusionResult r = fusion::forward(tape, store_, inst.scene, inst.concept_graph, inst.mediums, c,
                                           config_.fusion, *entity_table_, trace);
  Var s = objectives::answer_scores(r.concept_state, c, objectives::bind_answer_head(tape, store_),
                                    config_.fusion.leaky_slope);
  return objectives::score_map(r.concept_state, s);
}

nlohmann::json MailModel::checkpoint() const {
  return {{"format", "mail-model"},
          {"version", 1},
          {"config", to_json(config_)},
          {"concept_relations", concept_relations_->names()},
          {"parameters", store_.to_json()}};
}

MailModel MailModel::from_checkpoint(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "mail-model" || doc.at("version") != 1) {
      throw Error(ErrorCode::kParseError, "not a version 1 model checkpoint");
    }
    MailModel model(model_config_from_json(doc.at("config")),
                    doc.at("concept_relations").get<std::vector<std::string>>());
    ParameterStore loaded = ParameterStore::from_json(doc.at("parameters"));
    for (const auto& [name, p] : model.store_.entries()) {
      if (!loaded.contains(name) || loaded.value(name).shape() != p.value.shape()) {
        throw Error(ErrorCode::kDimensionMismatch, "checkpoint parameter '" + name + "' is missing or misshaped");
      }
    }
    model.store_ = std::move(loaded);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("model checkpoint: ") + e.what());
  }
}

void MailModel::save(const std::filesystem::path& path) const { numeric::write_json_file(path, checkpoint()); }

MailModel MailModel::load(const std::filesystem::path& path) {
  return from_checkpoint(numeric::read_json_file(path));
}

}  // namespace mail::harness
