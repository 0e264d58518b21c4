#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mail/fusion/fusion_net.hpp"
#include "mail/objectives/objectives.hpp"

namespace mail::harness {

using fusion::AttentionTrace;
using numeric::ParameterStore;
using numeric::Tape;
using numeric::Var;

struct ModelConfig {
  fusion::FusionConfig fusion;
  double sigma = 1.0;
  std::size_t answer_hidden = 64;
  std::uint64_t seed = 1;
  std::uint64_t embedding_seed = 0x6d61696cULL;
  // Optional pretrained vectors; hashed vectors fill the gaps.
  std::string entity_embeddings;
  std::string context_embeddings;  // keyed by normalized question text

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

// One instance with its topologies resolved against a model's relation
// indices. Only valid while that model is alive.
struct PreparedInstance {
  std::string id;
  fusion::GraphTopology scene;
  fusion::GraphTopology concept_graph;
  std::vector<std::string> mediums;
  std::vector<graph::GoldAnswer> gold_answers;
  std::string question;
};

struct InstancePass {
  fusion::FusionResult fusion;
  Var scores;
  Var inference;
  Var medium;  // invalid when the medium loss is disabled
  Var joint;
};

class MailModel {
 public:
  // Fresh parameters. Concept relations are the open vocabulary seen in
  // training; anything else maps to the shared unknown row.
  MailModel(ModelConfig config, std::vector<std::string> concept_relations);

  static std::vector<std::string> concept_relations_of(std::span<const graph::CoupledInstance> corpus);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& concept_relations() const noexcept { return concept_relations_->names(); }
  ParameterStore& store() noexcept { return store_; }
  const ParameterStore& store() const noexcept { return store_; }
  const numeric::EmbeddingTable& entity_table() const noexcept { return *entity_table_; }

  PreparedInstance prepare(const graph::CoupledInstance& instance) const;

  // Question context: a frozen store entry once registered, otherwise a tape
  // constant from the context table.
  static std::string context_parameter(const std::string& question);
  void register_contexts(std::span<const graph::CoupledInstance> corpus);
  Var context(Tape& tape, const std::string& question);

  InstancePass run(Tape& tape, const PreparedInstance& instance, double lambda, bool medium_loss = true,
                   AttentionTrace* trace = nullptr);
  std::map<std::string, double> scores(const PreparedInstance& instance, AttentionTrace* trace = nullptr);

  nlohmann::json checkpoint() const;
  static MailModel from_checkpoint(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static MailModel load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  std::unique_ptr<fusion::RelationIndex> scene_relations_;
  std::unique_ptr<fusion::RelationIndex> concept_relations_;
  std::unique_ptr<numeric::EmbeddingTable> entity_table_;
  std::unique_ptr<numeric::EmbeddingTable> context_table_;
  ParameterStore store_;
};

}  // namespace mail::harness
