#include "mail/objectives/objectives.hpp"

#include <cmath>

#include "mail/error.hpp"

namespace mail::objectives {

using numeric::Shape;

void KernelConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidConfig, "kernel width must be positive, got " + std::to_string(sigma));
  }
}

void init_answer_head(ParameterStore& store, std::size_t dim, std::size_t context_dim, std::size_t hidden,
                      std::uint64_t seed) {
  numeric::Rng rng(seed ^ numeric::fnv1a64("answer"));
  auto glorot = [](std::size_t in, std::size_t out) { return std::sqrt(6.0 / static_cast<double>(in + out)); };
  store.add("answer/w1", numeric::uniform_tensor(Shape{hidden, dim}, glorot(dim, hidden), rng));
  store.add("answer/b1", Tensor(Shape{hidden}));
  store.add("answer/w2", numeric::uniform_tensor(Shape{1, hidden}, glorot(hidden, 1), rng));
  store.add("answer/b2", Tensor(Shape{1}));
  store.add("context/projection", numeric::uniform_tensor(Shape{dim, context_dim}, glorot(context_dim, dim), rng));
}

AnswerHead bind_answer_head(Tape& tape, ParameterStore& store) {
  return AnswerHead{tape.parameter(store, "answer/w1"), tape.parameter(store, "answer/b1"),
                    tape.parameter(store, "answer/w2"), tape.parameter(store, "answer/b2"),
                    tape.parameter(store, "context/projection")};
}

Var answer_scores(const fusion::GraphState& concept_state, Var context, const AnswerHead& head, double slope) {
  const std::size_t dim = concept_state.entities.value().cols();
  if (head.projection.value().rows() != dim || head.projection.value().cols() != context.value().numel()) {
    throw Error(ErrorCode::kDimensionMismatch, "context projection " + numeric::shape_string(head.projection.shape()) +
                                                   " cannot map context of size " +
                                                   std::to_string(context.value().numel()) + " to dim " +
                                                   std::to_string(dim));
  }
  if (head.w1.value().cols() != dim) {
    throw Error(ErrorCode::kDimensionMismatch, "answer head expects dim " + std::to_string(head.w1.value().cols()));
  }
  Var projected = numeric::linear(context, head.projection);
  Var inputs = numeric::add_row_broadcast(concept_state.entities, projected);
  Var hidden = numeric::leaky_relu(numeric::linear(inputs, head.w1, head.b1), slope);
  Var out = numeric::linear(hidden, head.w2, head.b2);
  return numeric::reshape(out, Shape{concept_state.topology->entity_count()});
}

std::map<std::string, double> score_map(const fusion::GraphState& concept_state, Var scores) {
  std::map<std::string, double> out;
  const auto& entities = concept_state.topology->entities();
  for (std::size_t i = 0; i < entities.size(); ++i) out.emplace(entities[i], scores.value()[i]);
  return out;
}

Var inference_loss(Var scores, const std::vector<std::string>& candidates, std::span<const graph::GoldAnswer> golds) {
  if (golds.empty()) throw Error(ErrorCode::kGoldNotCandidate, "instance has no gold answers");
  if (scores.value().numel() != candidates.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one score per candidate required");
  }
  std::vector<Var> terms;
  for (const graph::GoldAnswer& gold : golds) {
    auto it = std::lower_bound(candidates.begin(), candidates.end(), gold.entity);
    if (it == candidates.end() || *it != gold.entity) {
      throw Error(ErrorCode::kGoldNotCandidate, "gold answer '" + gold.entity + "' is not a candidate");
    }
    terms.push_back(numeric::softmax_nll(scores, static_cast<std::size_t>(it - candidates.begin())));
  }
  if (terms.size() == 1) return terms.front();
  return numeric::scale(numeric::add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

Var gaussian_kernel(Var x, Var y, double sigma) {
  Var diff = numeric::sub(x, y);
  return numeric::exp(numeric::scale(numeric::dot(diff, diff), -1.0 / (2.0 * sigma * sigma)));
}

double gaussian_kernel(std::span<const double> x, std::span<const double> y, double sigma) {
  if (x.size() != y.size()) throw Error(ErrorCode::kShapeMismatch, "kernel inputs differ in length");
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
  return std::exp(-sq / (2.0 * sigma * sigma));
}

Var mmd_loss(Tape& tape, std::span<const Var> scene_mediums, std::span<const Var> concept_mediums, double sigma) {
  if (scene_mediums.size() != concept_mediums.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(scene_mediums.size()) + " scene mediums vs " +
                                                std::to_string(concept_mediums.size()) + " concept mediums");
  }
  KernelConfig{sigma}.validate();
  const std::size_t n = scene_mediums.size();
  if (n == 0) return tape.constant(Tensor::scalar(0.0));
  std::vector<Var> ss, cc, sc;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      ss.push_back(gaussian_kernel(scene_mediums[i], scene_mediums[j], sigma));
      cc.push_back(gaussian_kernel(concept_mediums[i], concept_mediums[j], sigma));
      sc.push_back(gaussian_kernel(scene_mediums[i], concept_mediums[j], sigma));
    }
  }
  const double inv = 1.0 / static_cast<double>(n * n);
  const Var parts[] = {numeric::scale(numeric::add_n(ss), inv), numeric::scale(numeric::add_n(cc), inv),
                       numeric::scale(numeric::add_n(sc), -2.0 * inv)};
  return numeric::add_n(parts);
}

LossBreakdown joint_loss(double inference, double medium, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "lambda must be non-negative");
  return LossBreakdown{inference, medium, lambda, inference + lambda * medium};
}

Var joint_loss(Var inference, Var medium, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "lambda must be non-negative");
  return numeric::add(inference, numeric::scale(medium, lambda));
}

std::string predict(const std::map<std::string, double>& scores) {
  if (scores.empty()) throw Error(ErrorCode::kShapeMismatch, "predict() on an empty score map");
  auto best = scores.begin();
  for (auto it = scores.begin(); it != scores.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

}  // namespace mail::objectives
