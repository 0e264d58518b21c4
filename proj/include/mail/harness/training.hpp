#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mail/harness/model.hpp"

namespace mail::harness {

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t epochs = 500;
  double learning_rate = 1e-3;
  double lambda = 1e-3;
  std::size_t layers = 3;
  std::size_t dim = 64;
  std::size_t context_dim = 64;
  double sigma = 1.0;
  bool exchange_enabled = true;
  bool medium_loss_enabled = true;
  fusion::AttentionMode attention = fusion::AttentionMode::kSoftmax;
  std::size_t answer_hidden = 64;
  // Training-set accuracy is measured every eval_every epochs (0: never);
  // training stops once it reaches target_accuracy (0: never).
  std::size_t eval_every = 0;
  double target_accuracy = 0.0;
  std::string checkpoint_path;  // best-loss parameters, written when training ends
  std::string entity_embeddings;
  std::string context_embeddings;
  std::uint64_t embedding_seed = ModelConfig{}.embedding_seed;

  void validate() const;
  ModelConfig model_config() const;
};

nlohmann::json to_json(const TrainConfig& config);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base = {});

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  objectives::LossBreakdown loss;  // means over the corpus
  std::optional<double> train_accuracy;
};

struct TrainResult {
  MailModel model;  // parameters after the last epoch
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  double best_loss = 0.0;
  ParameterStore best_parameters;
  bool stopped_early = false;
};

using ProgressFn = std::function<void(const EpochLog&)>;

// Full-batch Adam on the mean joint loss. Instances whose only violation is
// a missing medium are accepted (the medium term is then zero); any other
// violation throws Error(kInvalidConfig). A non-finite loss throws
// Error(kNonFiniteLoss) naming the epoch and instance.
TrainResult train(std::span<const graph::CoupledInstance> corpus, const TrainConfig& config,
                  const ProgressFn& progress = {});

struct Prediction {
  std::string id;
  std::string prediction;
  std::vector<graph::GoldAnswer> gold_answers;
  bool correct = false;
  double soft = 0.0;
};

struct EvalReport {
  double exact_accuracy = 0.0;
  double soft_accuracy = 0.0;
  std::vector<Prediction> predictions;
  std::vector<EpochLog> loss_curve;
};

// min(sum of weights of golds equal to the prediction, 1).
double soft_score(const std::string& prediction, std::span<const graph::GoldAnswer> golds);

// Fills correct/soft for each prediction and averages them.
EvalReport tally(std::vector<Prediction> predictions);

// Forward passes only; the model's parameters are left untouched.
EvalReport evaluate(MailModel& model, std::span<const graph::CoupledInstance> corpus,
                    AttentionTrace* trace = nullptr);

std::string format_report(const EvalReport& report);
nlohmann::json summary_json(const EvalReport& report);
void write_attention_trace(const std::filesystem::path& path, const AttentionTrace& trace);

}  // namespace mail::harness
