#include <doctest.h>

#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "mail/error.hpp"
#include "mail/graph/corpus.hpp"
#include "mail/harness/experiments.hpp"
#include "mail/harness/synthetic.hpp"
#include "test_support.hpp"

using namespace mail;
using namespace mail::harness;

namespace {

std::string bytes_of(const std::vector<graph::CoupledInstance>& corpus) {
  std::string out;
  for (const auto& inst : corpus) out += graph::serialize_record(inst) + "\n";
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TrainConfig tiny_config(std::size_t epochs = 5) {
  TrainConfig c;
  c.epochs = epochs;
  c.dim = 8;
  c.context_dim = 8;
  c.answer_hidden = 8;
  c.layers = 2;
  c.seed = 3;
  return c;
}

std::vector<graph::CoupledInstance> small_corpus(std::size_t n = 8, std::uint64_t seed = 7,
                                                 SyntheticFamily family = SyntheticFamily::kCrossModal) {
  SyntheticSpec spec;
  spec.n_instances = n;
  spec.seed = seed;
  spec.family = family;
  return generate_synthetic(spec);
}

// Shortest directed hop count from `from` to `to` in the concept graph.
std::optional<std::size_t> hops(const graph::ConceptGraph& g, const std::string& from, const std::string& to) {
  std::map<std::string, std::size_t> dist = {{from, 0}};
  std::deque<std::string> queue = {from};
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    if (cur == to) return dist[cur];
    for (const auto& t : g.triples) {
      if (t.head == cur && !dist.count(t.tail)) {
        dist[t.tail] = dist[cur] + 1;
        queue.push_back(t.tail);
      }
    }
  }
  return std::nullopt;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("synthetic corpora are deterministic per seed") {
  CHECK(bytes_of(small_corpus(20, 7)) == bytes_of(small_corpus(20, 7)));
  CHECK(bytes_of(small_corpus(20, 7)) != bytes_of(small_corpus(20, 8)));
}

TEST_CASE("infeasible synthetic specs are rejected") {
  auto infeasible = [](auto mutate) {
    SyntheticSpec spec;
    mutate(spec);
    return code_of([&] { generate_synthetic(spec); });
  };
  CHECK(infeasible([](SyntheticSpec& s) { s.mediums = 0; }) == ErrorCode::kInfeasibleSpec);
  CHECK(infeasible([](SyntheticSpec& s) { s.n_instances = 0; }) == ErrorCode::kInfeasibleSpec);
  CHECK(infeasible([](SyntheticSpec& s) { s.scene_entities = s.mediums; }) == ErrorCode::kInfeasibleSpec);
  CHECK(infeasible([](SyntheticSpec& s) { s.answer_depth = 3; }) == ErrorCode::kInfeasibleSpec);
  CHECK(infeasible([](SyntheticSpec& s) { s.mediums = 25; }) == ErrorCode::kInfeasibleSpec);
}

TEST_CASE("every synthetic gold is reachable from the marked medium at the given depth") {
  for (std::size_t depth : {1u, 2u}) {
    SyntheticSpec spec;
    spec.answer_depth = depth;
    const auto corpus = generate_synthetic(spec);
    REQUIRE(corpus.size() == 200);
    for (const auto& inst : corpus) {
      CHECK(graph::validate(inst).empty());
      std::string key;
      std::size_t markers = 0;
      for (const auto& t : inst.scene_graph.triples) {
        if (t.relation == "intends_to") {
          key = t.tail;
          ++markers;
        }
      }
      REQUIRE(markers == 1);
      const auto mediums = graph::mediums(inst.scene_graph, inst.concept_graph);
      CHECK(mediums.size() == spec.mediums);
      CHECK(std::find(mediums.begin(), mediums.end(), key) != mediums.end());
      REQUIRE(inst.gold_answers.size() == 1);
      CHECK(hops(inst.concept_graph, key, inst.gold_answers[0].entity) == depth);
      // each other medium leads to an answer of its own at the same depth
      for (const std::string& m : mediums) {
        if (m == key) continue;
        CHECK_FALSE(hops(inst.concept_graph, m, inst.gold_answers[0].entity).has_value());
      }
    }
  }
}

TEST_CASE("the no-medium family shares no entity between the graphs") {
  for (const auto& inst : small_corpus(20, 3, SyntheticFamily::kNoMediums)) {
    CHECK(graph::mediums(inst.scene_graph, inst.concept_graph).empty());
    const auto report = graph::validate(inst);
    REQUIRE(report.size() == 1);
    CHECK(report[0].code == graph::ViolationCode::kNoMediums);
  }
  CHECK(parse_family("no_mediums") == SyntheticFamily::kNoMediums);
  CHECK_THROWS_AS(parse_family("other"), Error);
}

TEST_CASE("a 100-instance generated corpus round-trips bit-identically") {
  const auto corpus = small_corpus(100, 11);
  const auto dir = mail::testing::scratch_dir("harness-roundtrip");
  graph::save_corpus(corpus, dir / "a.jsonl");
  const auto loaded = graph::load_corpus(dir / "a.jsonl");
  CHECK(loaded == corpus);
  graph::save_corpus(loaded, dir / "b.jsonl");
  CHECK(read_file(dir / "a.jsonl") == read_file(dir / "b.jsonl"));
  CHECK(read_file(dir / "a.jsonl.manifest.json") == read_file(dir / "b.jsonl.manifest.json"));
}

TEST_CASE("zero epochs leave the initial parameters") {
  const auto corpus = small_corpus();
  TrainResult r = train(corpus, tiny_config(0));
  CHECK(r.history.empty());
  MailModel fresh(tiny_config().model_config(), MailModel::concept_relations_of(corpus));
  fresh.register_contexts(corpus);
  CHECK(r.model.store() == fresh.store());
}

TEST_CASE("training overfits a single instance") {
  const auto corpus = small_corpus(1, 5);
  TrainConfig c = tiny_config(200);
  c.dim = c.context_dim = c.answer_hidden = 16;
  TrainResult r = train(corpus, c);
  REQUIRE(r.history.size() == 200);
  CHECK(r.history.back().loss.joint <= 0.5 * r.history.front().loss.joint);
  CHECK(r.best_loss <= r.history.back().loss.joint);
}

TEST_CASE("training is deterministic and never touches frozen contexts") {
  const auto corpus = small_corpus();
  const TrainConfig c = tiny_config(6);
  TrainResult a = train(corpus, c);
  TrainResult b = train(corpus, c);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].loss == b.history[i].loss);
  CHECK(a.model.store() == b.model.store());

  const std::string ctx = MailModel::context_parameter(kSyntheticQuestion);
  REQUIRE(a.model.store().contains(ctx));
  CHECK(a.model.store().frozen(ctx));
  MailModel fresh(c.model_config(), MailModel::concept_relations_of(corpus));
  fresh.register_contexts(corpus);
  CHECK(a.model.store().value(ctx) == fresh.store().value(ctx));
  CHECK_FALSE(a.model.store().value("scene/layer0/message") == fresh.store().value("scene/layer0/message"));
}

TEST_CASE("lambda zero matches a run without the medium loss") {
  const auto corpus = small_corpus();
  TrainConfig zero = tiny_config(6);
  zero.lambda = 0.0;
  TrainConfig disabled = zero;
  disabled.medium_loss_enabled = false;
  TrainResult a = train(corpus, zero);
  TrainResult b = train(corpus, disabled);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss.inference == b.history[i].loss.inference);
    CHECK(a.history[i].loss.joint == a.history[i].loss.inference);
    CHECK(a.history[i].loss.medium > 0.0);
  }
  CHECK(a.model.store() == b.model.store());
}

TEST_CASE("every logged epoch satisfies the joint loss identity") {
  TrainConfig c = tiny_config(4);
  c.lambda = 0.37;
  for (const EpochLog& e : train(small_corpus(), c).history) {
    CHECK(e.loss.joint == e.loss.inference + e.loss.lambda * e.loss.medium);
    CHECK(e.loss.lambda == 0.37);
  }
}

TEST_CASE("training rejects empty or invalid corpora and reports non-finite losses") {
  CHECK(code_of([] { train({}, tiny_config()); }) == ErrorCode::kInvalidConfig);
  auto corpus = small_corpus(2);
  corpus[1].gold_answers = {{"nowhere", 1.0}};
  CHECK(code_of([&] { train(corpus, tiny_config()); }) == ErrorCode::kInvalidConfig);

  const auto dir = mail::testing::scratch_dir("harness-nonfinite");
  {
    std::ofstream out(dir / "huge.txt");
    for (const char* name : {"umbrella", "coat", "kite", "knife", "bicycle", "camera", "guitar", "ladder", "shovel",
                             "towel", "helmet", "lamp", "broom", "hammer", "scissors", "blanket", "bucket",
                             "skateboard", "surfboard", "racket", "oven", "pillow", "backpack", "map"})
      out << name << " 1.7e308 -1.7e308 1.7e308 -1.7e308 1.7e308 -1.7e308 1.7e308 -1.7e308\n";
  }
  TrainConfig c = tiny_config(2);
  c.entity_embeddings = (dir / "huge.txt").string();
  try {
    train(small_corpus(2), c);
    FAIL("expected NON_FINITE_LOSS");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFiniteLoss);
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    CHECK(std::string(e.what()).find("syn-7-0001") != std::string::npos);
  }
}

TEST_CASE("checkpoints restore the same predictions") {
  const auto corpus = small_corpus();
  const auto dir = mail::testing::scratch_dir("harness-checkpoint");
  TrainConfig c = tiny_config(5);
  c.checkpoint_path = (dir / "best.json").string();
  TrainResult r = train(corpus, c);
  REQUIRE(std::filesystem::exists(dir / "best.json"));
  MailModel best = MailModel::load(dir / "best.json");
  CHECK(best.store() == r.best_parameters);

  r.model.save(dir / "final.json");
  MailModel reloaded = MailModel::load(dir / "final.json");
  CHECK(reloaded.store() == r.model.store());
  const EvalReport a = evaluate(r.model, corpus);
  const EvalReport b = evaluate(reloaded, corpus);
  for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(a.predictions[i].prediction == b.predictions[i].prediction);
}

TEST_CASE("evaluate has no side effects") {
  const auto corpus = small_corpus();
  TrainResult r = train(corpus, tiny_config(2));
  const ParameterStore before = r.model.store();
  const EvalReport a = evaluate(r.model, corpus);
  const EvalReport b = evaluate(r.model, corpus);
  CHECK(r.model.store() == before);
  CHECK(a.exact_accuracy == b.exact_accuracy);
  CHECK(a.exact_accuracy >= 0.0);
  CHECK(a.exact_accuracy <= 1.0);
  CHECK(a.soft_accuracy >= a.exact_accuracy);
}

TEST_CASE("accuracy scoring matches a hand-scored fixture") {
  auto pred = [](std::string guess, std::vector<graph::GoldAnswer> golds) {
    Prediction p;
    p.prediction = std::move(guess);
    p.gold_answers = std::move(golds);
    return p;
  };
  std::vector<Prediction> all_right, none_right;
  for (int i = 0; i < 4; ++i) {
    all_right.push_back(pred("a", {{"a", 1.0}}));
    none_right.push_back(pred("b", {{"a", 1.0}}));
  }
  CHECK(tally(all_right).exact_accuracy == 1.0);
  CHECK(tally(all_right).soft_accuracy == 1.0);
  CHECK(tally(none_right).exact_accuracy == 0.0);
  CHECK(tally(none_right).soft_accuracy == 0.0);

  // hand-scored: exact hits 1,2,3,4,5,6 of 10; soft 1 + 1 + 0.3 + 0.6 + 1 + 1 = 4.9
  const std::vector<Prediction> mixed = {
      pred("spring", {{"spring", 1.0}}),
      pred("dog", {{"dog", 1.0}, {"puppy", 0.6}}),
      pred("tea", {{"coffee", 1.0}, {"tea", 0.3}}),
      pred("red", {{"red", 0.6}, {"crimson", 0.3}}),
      pred("two", {{"two", 0.6}, {"two", 0.6}}),
      pred("bake", {{"bake", 1.0}}),
      pred("cat", {{"dog", 1.0}}),
      pred("blue", {{"green", 0.6}, {"teal", 0.3}}),
      pred("boat", {{"ship", 1.0}}),
      pred("winter", {{"summer", 1.0}}),
  };
  const EvalReport r = tally(mixed);
  CHECK(r.exact_accuracy == doctest::Approx(0.6));
  CHECK(r.soft_accuracy == doctest::Approx(0.49));
  CHECK(r.predictions[2].soft == doctest::Approx(0.3));
  CHECK(r.predictions[4].soft == 1.0);
}

TEST_CASE("sweeps cover the published grids and are reproducible") {
  const auto corpus = small_corpus(4);
  const TrainConfig c = tiny_config(2);
  const SweepTable layers = sweep_layers(corpus, {}, c, kLayerGrid, 2);
  REQUIRE(layers.points.size() == 5);
  CHECK(layers.points.front().label == "l = 2");
  CHECK(layers.points.back().label == "l = 6");
  const SweepTable lambdas = sweep_lambda(corpus, corpus, c, kLambdaGrid, 1);
  REQUIRE(lambdas.points.size() == 6);
  std::vector<std::string> labels;
  for (const auto& p : lambdas.points) labels.push_back(p.label);
  CHECK(labels == std::vector<std::string>{"lambda = 0", "lambda = 1e-5", "lambda = 1e-4", "lambda = 1e-3",
                                           "lambda = 1e-2", "lambda = 1e-1"});
  // thread count does not change any entry
  const SweepTable again = sweep_lambda(corpus, corpus, c, kLambdaGrid, 3);
  CHECK(to_json(again) == to_json(lambdas));
  CHECK(format_table(again) == format_table(lambdas));

  const std::string text = format_table(layers);
  CHECK(text.find("l = 4") != std::string::npos);
  CHECK(text.find("held-out") == std::string::npos);
  CHECK(format_table(lambdas).find("held-out exact") != std::string::npos);

  const SweepTable single = sweep_layers(corpus, {}, c, {3}, 1);
  REQUIRE(single.points.size() == 1);
  CHECK(single.points[0].config.layers == 3);
}

TEST_CASE("ablation on a corpus without mediums gives identical arms") {
  const auto corpus = small_corpus(6, 5, SyntheticFamily::kNoMediums);
  const AblationReport r = ablate_gmf(corpus, {}, tiny_config(3), 1);
  CHECK(r.delta == 0.0);
  CHECK(r.with_exchange.final_joint == r.without_exchange.final_joint);
  CHECK(summary_json(r.with_exchange.report) == summary_json(r.without_exchange.report));
}

TEST_CASE("ablation reports are reproducible") {
  const auto corpus = small_corpus(6);
  const AblationReport a = ablate_gmf(corpus, {}, tiny_config(3), 2);
  const AblationReport b = ablate_gmf(corpus, {}, tiny_config(3), 1);
  CHECK(format_ablation(a) == format_ablation(b));
  CHECK(summary_json(a.with_exchange.report) == summary_json(b.with_exchange.report));
  CHECK(a.with_exchange.final_joint != a.without_exchange.final_joint);
}

TEST_CASE("train config json round-trips and rejects junk") {
  TrainConfig c = tiny_config(17);
  c.lambda = 0.25;
  c.attention = fusion::AttentionMode::kLiteral;
  const TrainConfig back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(train_config_from_json(nlohmann::json::object()).lambda == 1e-3);
  CHECK(train_config_from_json(nlohmann::json::object()).layers == 3);
  CHECK(code_of([] { train_config_from_json({{"layers", "three"}}); }) == ErrorCode::kInvalidConfig);
  TrainConfig bad = c;
  bad.layers = 9;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidConfig);
}
