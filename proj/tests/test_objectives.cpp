#include <doctest.h>

#include <cmath>

#include "mail/error.hpp"
#include "mail/numeric/grad_check.hpp"
#include "mail/objectives/objectives.hpp"
#include "test_support.hpp"

using namespace mail;
using namespace mail::objectives;
using fusion::GraphState;
using fusion::GraphTopology;
using fusion::RelationIndex;
using numeric::Rng;
using numeric::Shape;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double bound = 1.0) {
  Rng rng(seed);
  return numeric::uniform_tensor(std::move(shape), bound, rng);
}

std::vector<Var> constants(Tape& tape, const std::vector<Tensor>& xs) {
  std::vector<Var> out;
  for (const Tensor& x : xs) out.push_back(tape.constant(x));
  return out;
}

double mmd_value(const std::vector<Tensor>& s, const std::vector<Tensor>& c, double sigma) {
  Tape tape;
  const auto vs = constants(tape, s);
  const auto vc = constants(tape, c);
  return mmd_loss(tape, vs, vc, sigma).value().item();
}

struct Candidates {
  std::set<std::string> names = {"apple", "bread", "cheese", "dates", "eggs"};
  RelationIndex rel{{}};
  GraphTopology topo{names, {}, rel};
};

}  // namespace

TEST_CASE("gaussian kernel values") {
  const Tensor x = random_tensor(Shape{5}, 1);
  CHECK(gaussian_kernel(x.data(), x.data(), 1.0) == 1.0);
  const double sigma = 0.7;
  // |x - y|^2 = 2 sigma^2
  Tensor y = x;
  y[0] += std::sqrt(2.0) * sigma;
  CHECK(gaussian_kernel(x.data(), y.data(), sigma) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

  const Tensor z = random_tensor(Shape{5}, 2);
  double sq = 0.0;
  for (std::size_t i = 0; i < 5; ++i) sq += (x[i] - z[i]) * (x[i] - z[i]);
  Tape tape;
  const double taped = gaussian_kernel(tape.constant(x), tape.constant(z), 1.0).value().item();
  CHECK(std::abs(taped - std::exp(-sq / 2.0)) < 1e-12);
  CHECK(std::abs(gaussian_kernel(x.data(), z.data(), 1.0) - std::exp(-sq / 2.0)) < 1e-12);
}

TEST_CASE("mmd of identical lists is zero and n=1 has a closed form") {
  const std::vector<Tensor> xs = {random_tensor(Shape{4}, 1), random_tensor(Shape{4}, 2), random_tensor(Shape{4}, 3)};
  CHECK(std::abs(mmd_value(xs, xs, 1.0)) < 1e-12);

  const Tensor s = random_tensor(Shape{4}, 4), c = random_tensor(Shape{4}, 5);
  const double k = gaussian_kernel(s.data(), c.data(), 1.3);
  CHECK(mmd_value({s}, {c}, 1.3) == doctest::Approx(2.0 - 2.0 * k).epsilon(1e-14));
}

TEST_CASE("mmd matches the explicit double sum") {
  const std::vector<Tensor> s = {random_tensor(Shape{3}, 10), random_tensor(Shape{3}, 11)};
  const std::vector<Tensor> c = {random_tensor(Shape{3}, 12), random_tensor(Shape{3}, 13)};
  double ss = 0.0, cc = 0.0, sc = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      ss += gaussian_kernel(s[i].data(), s[j].data(), 1.0);
      cc += gaussian_kernel(c[i].data(), c[j].data(), 1.0);
      sc += gaussian_kernel(s[i].data(), c[j].data(), 1.0);
    }
  CHECK(std::abs(mmd_value(s, c, 1.0) - (ss + cc - 2.0 * sc) / 4.0) < 1e-12);
}

TEST_CASE("mmd is nonnegative and symmetric over random pairs") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(4);
    const double sigma = 0.25 + 2.0 * rng.uniform();
    std::vector<Tensor> s, c;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(numeric::uniform_tensor(Shape{3}, 2.0, rng));
      c.push_back(numeric::uniform_tensor(Shape{3}, 2.0, rng));
    }
    const double ab = mmd_value(s, c, sigma);
    const double ba = mmd_value(c, s, sigma);
    CHECK(ab >= -1e-12);
    CHECK(std::abs(ab - ba) < 1e-12);
  }
}

TEST_CASE("mmd rejects misaligned lists and bad widths") {
  Tape tape;
  const auto one = constants(tape, {Tensor(Shape{2})});
  const auto two = constants(tape, {Tensor(Shape{2}), Tensor(Shape{2})});
  try {
    mmd_loss(tape, one, two, 1.0);
    FAIL("expected LENGTH_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLengthMismatch);
  }
  CHECK_THROWS_AS(mmd_loss(tape, one, one, 0.0), Error);
  CHECK(mmd_loss(tape, {}, {}, 1.0).value().item() == 0.0);
}

TEST_CASE("joint loss algebra") {
  const LossBreakdown a = joint_loss(1.0, 2.0, 1e-3);
  CHECK(a.joint == 1.0 + 1e-3 * 2.0);
  CHECK(a.joint == doctest::Approx(1.002));
  CHECK(joint_loss(0.7, 5.0, 0.0).joint == 0.7);
  CHECK(joint_loss(0.7, 0.0, 0.3).joint == 0.7);
  // linear in medium
  const double base = joint_loss(0.4, 0.0, 0.2).joint;
  CHECK(joint_loss(0.4, 3.0, 0.2).joint - base == doctest::Approx(3.0 * (joint_loss(0.4, 1.0, 0.2).joint - base)));
  CHECK_THROWS_AS(joint_loss(1.0, 1.0, -1.0), Error);

  Tape tape;
  Var j = joint_loss(tape.constant(Tensor::scalar(1.5)), tape.constant(Tensor::scalar(0.25)), 1e-3);
  CHECK(j.value().item() == 1.5 + 1e-3 * 0.25);
}

TEST_CASE("inference loss values") {
  Tape tape;
  const std::vector<std::string> one = {"a"};
  const graph::GoldAnswer gold_a[] = {{"a", 1.0}};
  CHECK(inference_loss(tape.constant(Tensor::vector({3.0})), one, gold_a).value().item() == 0.0);

  const std::vector<std::string> four = {"a", "b", "c", "d"};
  CHECK(inference_loss(tape.constant(Tensor::vector({0.5, 0.5, 0.5, 0.5})), four, gold_a).value().item() ==
        doctest::Approx(std::log(4.0)));

  // log-sum-exp by hand
  const double lse = std::log(std::exp(2.0) + std::exp(1.0) + std::exp(0.0) + std::exp(-1.0));
  Var scores = tape.constant(Tensor::vector({2.0, 1.0, 0.0, -1.0}));
  CHECK(inference_loss(scores, four, gold_a).value().item() == doctest::Approx(lse - 2.0).epsilon(1e-14));

  // several golds: plain mean
  const graph::GoldAnswer golds[] = {{"a", 1.0}, {"c", 0.3}};
  CHECK(inference_loss(scores, four, golds).value().item() ==
        doctest::Approx(((lse - 2.0) + (lse - 0.0)) / 2.0).epsilon(1e-14));

  const graph::GoldAnswer missing[] = {{"z", 1.0}};
  try {
    inference_loss(scores, four, missing);
    FAIL("expected GOLD_NOT_CANDIDATE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGoldNotCandidate);
  }
}

TEST_CASE("answer scores with a constant head are constant") {
  Candidates cand;
  ParameterStore store;
  init_answer_head(store, 3, 2, 4, 1);
  store.mutable_value("answer/w2").fill(0.0);
  store.mutable_value("answer/b2")[0] = 2.5;
  Tape tape;
  GraphState state{&cand.topo, tape.constant(random_tensor(Shape{5, 3}, 2)), {}, 0};
  Var scores = answer_scores(state, tape.constant(random_tensor(Shape{2}, 3)), bind_answer_head(tape, store));
  for (double s : scores.value().data()) CHECK(s == 2.5);

  const std::set<std::string> single = {"only"};
  GraphTopology topo1(single, {}, cand.rel);
  GraphState one{&topo1, tape.constant(random_tensor(Shape{1, 3}, 2)), {}, 0};
  Var s1 = answer_scores(one, tape.constant(random_tensor(Shape{2}, 3)), bind_answer_head(tape, store));
  CHECK(s1.value().numel() == 1);
}

TEST_CASE("answer scores match a scripted perceptron") {
  Candidates cand;
  ParameterStore store;
  init_answer_head(store, 3, 2, 4, 7);
  store.mutable_value("answer/b1") = random_tensor(Shape{4}, 8);
  store.mutable_value("answer/b2")[0] = -0.3;
  const Tensor e = random_tensor(Shape{5, 3}, 9);
  const Tensor c = random_tensor(Shape{2}, 10);
  Tape tape;
  GraphState state{&cand.topo, tape.constant(e), {}, 0};
  const auto scores = score_map(state, answer_scores(state, tape.constant(c), bind_answer_head(tape, store)));
  REQUIRE(scores.size() == 5);

  const Tensor& p = store.value("context/projection");
  const Tensor& w1 = store.value("answer/w1");
  const Tensor& b1 = store.value("answer/b1");
  const Tensor& w2 = store.value("answer/w2");
  std::size_t r = 0;
  for (const std::string& name : cand.topo.entities()) {
    double x[3];
    for (int i = 0; i < 3; ++i) x[i] = e.at(r, i) + p.at(i, 0) * c[0] + p.at(i, 1) * c[1];
    double out = -0.3;
    for (int h = 0; h < 4; ++h) {
      double z = b1[h];
      for (int i = 0; i < 3; ++i) z += w1.at(h, i) * x[i];
      out += w2[h] * (z > 0 ? z : 0.01 * z);
    }
    CHECK(std::abs(scores.at(name) - out) < 1e-12);
    ++r;
  }
}

TEST_CASE("answer scores reject a mismatched context") {
  Candidates cand;
  ParameterStore store;
  init_answer_head(store, 3, 2, 4, 1);
  Tape tape;
  GraphState state{&cand.topo, tape.constant(Tensor(Shape{5, 3})), {}, 0};
  try {
    answer_scores(state, tape.constant(Tensor(Shape{6})), bind_answer_head(tape, store));
    FAIL("expected DIMENSION_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("predict takes the argmax and breaks ties lexicographically") {
  CHECK(predict({{"a", 1.0}, {"b", 2.0}}) == "b");
  CHECK(predict({{"c", 0.5}, {"b", 0.5}, {"a", 0.5}}) == "a");
  CHECK_THROWS_AS(predict({}), Error);

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, double> scores;
    const std::size_t n = 1 + rng.index(8);
    for (std::size_t i = 0; i < n; ++i) scores["e" + std::to_string(rng.index(10))] = std::round(4.0 * rng.uniform());
    const std::string p = predict(scores);
    std::map<std::string, double> shifted, squashed;
    for (const auto& [k, v] : scores) {
      shifted[k] = v + 17.0;
      squashed[k] = std::exp(v) / (1.0 + std::exp(v));
    }
    CHECK(predict(shifted) == p);
    CHECK(predict(squashed) == p);
  }
}

TEST_CASE("joint loss through the full forward passes the finite-difference check") {
  const graph::CoupledInstance inst = mail::testing::sakura_instance();
  fusion::FusionConfig config;
  config.layers = 3;
  config.dim = 3;
  config.context_dim = 2;
  const RelationIndex scene_rel = RelationIndex::scene();
  const RelationIndex concept_rel({"related_to", "used_for"});
  ParameterStore store;
  fusion::init_fusion_parameters(store, config, scene_rel, concept_rel, 3);
  init_answer_head(store, 3, 2, 4, 3);
  store.add("context/q", random_tensor(Shape{2}, 4), true);
  numeric::EmbeddingTable table(3, 5);
  GraphTopology scene(inst.scene_graph.entities, inst.scene_graph.triples, scene_rel);
  GraphTopology concept_graph(inst.concept_graph.entities, inst.concept_graph.triples, concept_rel);
  const auto mediums = graph::mediums(inst.scene_graph, inst.concept_graph);

  numeric::LossFn fn = [&](ParameterStore& s) {
    Tape tape;
    Var c = tape.parameter(s, "context/q");
    fusion::FusionResult r = fusion::forward(tape, s, scene, concept_graph, mediums, c, config, table);
    Var scores = answer_scores(r.concept_state, c, bind_answer_head(tape, s));
    Var inf = inference_loss(scores, concept_graph.entities(), inst.gold_answers);
    std::vector<Var> sm, cm;
    for (const std::string& m : mediums) {
      sm.push_back(numeric::row(r.scene.entities, scene.row_of(m)));
      cm.push_back(numeric::row(r.concept_state.entities, concept_graph.row_of(m)));
    }
    // large lambda so the medium term is visible to the check
    Var loss = joint_loss(inf, mmd_loss(tape, sm, cm, 1.0), 0.5);
    tape.backward(loss);
    return loss.value().item();
  };
  numeric::GradCheckOptions options;
  options.max_coords_per_param = 16;
  const numeric::GradCheckReport report = numeric::grad_check(fn, store, options);
  CHECK(report.skipped_frozen == std::vector<std::string>{"context/q"});
  CHECK(report.max_rel_error < 1e-4);
  CHECK(store.grad("context/q") == Tensor(Shape{2}));
}
