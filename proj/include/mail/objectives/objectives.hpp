#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mail/fusion/fusion_net.hpp"
#include "mail/graph/coupled_graph.hpp"

namespace mail::objectives {

using numeric::ParameterStore;
using numeric::Tape;
using numeric::Tensor;
using numeric::Var;

struct KernelConfig {
  double sigma = 1.0;

  void validate() const;  // Error(kInvalidConfig) unless sigma > 0
};

struct LossBreakdown {
  double inference = 0.0;
  double medium = 0.0;
  double lambda = 0.0;
  double joint = 0.0;  // inference + lambda * medium

  bool operator==(const LossBreakdown&) const = default;
};

// Scoring perceptron shared by every candidate of an instance, plus the
// projection that maps the context embedding into entity space.
struct AnswerHead {
  Var w1;          // [hidden, dim]
  Var b1;          // [hidden]
  Var w2;          // [1, hidden]
  Var b2;          // [1]
  Var projection;  // [dim, context_dim]
};

void init_answer_head(ParameterStore& store, std::size_t dim, std::size_t context_dim, std::size_t hidden,
                      std::uint64_t seed);
AnswerHead bind_answer_head(Tape& tape, ParameterStore& store);

// score(a) = MLP(e_a + P c) for every concept entity, in topology row order.
Var answer_scores(const fusion::GraphState& concept_state, Var context, const AnswerHead& head,
                  double slope = numeric::kLeakySlope);
std::map<std::string, double> score_map(const fusion::GraphState& concept_state, Var scores);

// Mean over gold answers of -log softmax(scores)[gold]. Throws
// Error(kGoldNotCandidate) for a gold outside the candidates.
Var inference_loss(Var scores, const std::vector<std::string>& candidates, std::span<const graph::GoldAnswer> golds);

// exp(-|x - y|^2 / (2 sigma^2)).
Var gaussian_kernel(Var x, Var y, double sigma);
double gaussian_kernel(std::span<const double> x, std::span<const double> y, double sigma);

// Squared MMD between two aligned medium lists through the Gaussian kernel's
// implicit feature map: mean k(S,S) + mean k(C,C) - 2 mean k(S,C).
// Throws Error(kLengthMismatch) when the lists differ in length; empty lists
// give zero.
Var mmd_loss(Tape& tape, std::span<const Var> scene_mediums, std::span<const Var> concept_mediums, double sigma);

LossBreakdown joint_loss(double inference, double medium, double lambda);
Var joint_loss(Var inference, Var medium, double lambda);

// Highest score; ties go to the lexicographically smallest identifier.
std::string predict(const std::map<std::string, double>& scores);

}  // namespace mail::objectives
