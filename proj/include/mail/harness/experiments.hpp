#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mail/harness/training.hpp"

namespace mail::harness {

inline const std::vector<std::size_t> kLayerGrid = {2, 3, 4, 5, 6};
inline const std::vector<double> kLambdaGrid = {0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};

struct SweepPoint {
  std::string label;  // column header, e.g. "l = 3" or "lambda = 1e-3"
  TrainConfig config;
  double train_exact = 0.0;
  double train_soft = 0.0;
  std::optional<double> heldout_exact;
  std::optional<double> heldout_soft;
  double final_joint = 0.0;
  std::size_t epochs_run = 0;
};

struct SweepTable {
  std::string parameter;  // "layers" or "lambda"
  std::vector<SweepPoint> points;
};

std::string format_lambda(double lambda);

// One model per grid value, all sharing base's seeds. Grid points train on
// up to `threads` threads (0: hardware concurrency); results do not depend
// on the thread count.
SweepTable sweep_layers(std::span<const graph::CoupledInstance> train_corpus,
                        std::span<const graph::CoupledInstance> heldout, const TrainConfig& base,
                        const std::vector<std::size_t>& grid = kLayerGrid, std::size_t threads = 0);
SweepTable sweep_lambda(std::span<const graph::CoupledInstance> train_corpus,
                        std::span<const graph::CoupledInstance> heldout, const TrainConfig& base,
                        const std::vector<double>& grid = kLambdaGrid, std::size_t threads = 0);

// Accuracy rows under one column per grid value.
std::string format_table(const SweepTable& table);
nlohmann::json to_json(const SweepTable& table);

struct AblationArm {
  double train_exact = 0.0;
  double heldout_exact = 0.0;
  double final_joint = 0.0;
  EvalReport report;  // on the held-out corpus when given, else on training
};

struct AblationReport {
  AblationArm with_exchange;
  AblationArm without_exchange;
  double delta = 0.0;  // exact accuracy, with minus without, on the report corpus
};

AblationReport ablate_gmf(std::span<const graph::CoupledInstance> train_corpus,
                          std::span<const graph::CoupledInstance> heldout, const TrainConfig& config,
                          std::size_t threads = 0);
std::string format_ablation(const AblationReport& report);

}  // namespace mail::harness
