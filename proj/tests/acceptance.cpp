// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "mail/construction/pipeline.hpp"
#include "mail/error.hpp"
#include "mail/graph/corpus.hpp"
#include "mail/harness/experiments.hpp"
#include "mail/harness/synthetic.hpp"
#include "mail/numeric/grad_check.hpp"

using namespace mail;
using fusion::GraphState;
using fusion::GraphTopology;
using fusion::RelationIndex;
using numeric::Rng;
using numeric::Shape;
using numeric::Tape;
using numeric::Tensor;
using numeric::Var;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("mail-acceptance-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MAIL_CLI + "\" " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

Tensor random_tensor(Shape shape, Rng& rng, double bound = 1.0) {
  return numeric::uniform_tensor(std::move(shape), bound, rng);
}

// Six scene entities, two of them shared with the concept graph.
graph::CoupledInstance six_entity_instance() {
  using graph::Triple;
  const std::vector<Triple> scene = {{"woman", "wears", "coat"},
                                     {"sakura", "at_location", "tree"},
                                     {"coat", "has_color", "red"},
                                     {"woman", "next_to", "bench"}};
  const std::vector<std::string> mentions = {"woman", "coat", "sakura", "tree", "bench"};
  const std::vector<Triple> concept_triples = {{"coat", "used_for", "keep warm"},
                                               {"sakura", "related_to", "spring"},
                                               {"spring", "related_to", "season"}};
  const std::vector<std::string> seeds = {"coat", "sakura", "season"};
  graph::CoupledInstance inst;
  inst.id = "six";
  inst.scene_graph = graph::make_scene_graph(scene, mentions);
  inst.concept_graph = graph::make_concept_graph(concept_triples, seeds, graph::Provenance::kKg);
  inst.question = "What season is it?";
  inst.topic_entities = {"season"};
  inst.gold_answers = {{"spring", 1.0}};
  return inst;
}

double mmd_value(const std::vector<Tensor>& s, const std::vector<Tensor>& c, double sigma) {
  Tape tape;
  std::vector<Var> vs, vc;
  for (const Tensor& x : s) vs.push_back(tape.constant(x));
  for (const Tensor& x : c) vc.push_back(tape.constant(x));
  return objectives::mmd_loss(tape, vs, vc, sigma).value().item();
}

Outcome gradient_oracle() {
  Clock clock;
  const graph::CoupledInstance inst = six_entity_instance();
  const auto mediums = graph::mediums(inst.scene_graph, inst.concept_graph);
  if (inst.scene_graph.entities.size() != 6 || mediums.size() != 2) return {false, "fixture shape"};
  fusion::FusionConfig config;
  config.layers = 3;
  config.dim = 4;
  config.context_dim = 3;
  const RelationIndex scene_rel = RelationIndex::scene();
  const RelationIndex concept_rel({"related_to", "used_for"});
  numeric::ParameterStore store;
  fusion::init_fusion_parameters(store, config, scene_rel, concept_rel, 5);
  objectives::init_answer_head(store, config.dim, config.context_dim, 5, 5);
  Rng rng(6);
  store.add("context/q", random_tensor(Shape{3}, rng), true);
  numeric::EmbeddingTable table(config.dim, 9);
  GraphTopology scene(inst.scene_graph.entities, inst.scene_graph.triples, scene_rel);
  GraphTopology concept_graph(inst.concept_graph.entities, inst.concept_graph.triples, concept_rel);

  numeric::LossFn fn = [&](numeric::ParameterStore& s) {
    Tape tape;
    Var c = tape.parameter(s, "context/q");
    fusion::FusionResult r = fusion::forward(tape, s, scene, concept_graph, mediums, c, config, table);
    Var scores = objectives::answer_scores(r.concept_state, c, objectives::bind_answer_head(tape, s));
    Var inf = objectives::inference_loss(scores, concept_graph.entities(), inst.gold_answers);
    std::vector<Var> sm, cm;
    for (const std::string& m : mediums) {
      sm.push_back(numeric::row(r.scene.entities, scene.row_of(m)));
      cm.push_back(numeric::row(r.concept_state.entities, concept_graph.row_of(m)));
    }
    Var loss = objectives::joint_loss(inf, objectives::mmd_loss(tape, sm, cm, 1.0), 0.5);
    tape.backward(loss);
    return loss.value().item();
  };
  numeric::GradCheckOptions options;
  options.epsilon = 1e-5;
  options.max_coords_per_param = 1 << 20;  // every coordinate
  const numeric::GradCheckReport report = numeric::grad_check(fn, store, options);
  std::size_t coords = 0;
  for (const auto& p : report.params) coords += p.coords_checked;
  const double t = clock.seconds();
  return {report.max_rel_error < 1e-4 && t < 60.0,
          fmt("max rel error %.2e over %zu coords in %zu params, %.2f s", report.max_rel_error, coords,
              report.params.size(), t)};
}

Outcome attention_normalization() {
  Rng rng(2024);
  double worst_sum = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    const std::size_t dim = 1 + rng.index(8);
    const std::size_t cdim = 1 + rng.index(4);
    Tape tape;
    fusion::LayerWeights lw;
    lw.attention = tape.constant(random_tensor(Shape{dim + cdim}, rng, 3.0));
    Var c = tape.constant(random_tensor(Shape{cdim}, rng));
    std::vector<Var> messages;
    for (std::size_t i = 0; i < n; ++i) messages.push_back(tape.constant(random_tensor(Shape{dim}, rng, 5.0)));
    const Tensor alpha = fusion::attention_weights(messages, c, lw).value();
    double total = 0.0;
    for (double a : alpha.data()) total += a;
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));

    // constant shift of every score in the neighbourhood
    const Tensor raw = random_tensor(Shape{n}, rng, 10.0);
    Tensor shifted = raw;
    const double k = 100.0 * (rng.uniform() - 0.5);
    for (double& v : shifted.data()) v += k;
    const std::vector<std::size_t> seg(n, 0);
    const Tensor a = numeric::segment_softmax(tape.constant(raw), seg, 1).value();
    const Tensor b = numeric::segment_softmax(tape.constant(shifted), seg, 1).value();
    for (std::size_t i = 0; i < n; ++i) worst_shift = std::max(worst_shift, std::abs(a[i] - b[i]));
  }
  return {worst_sum < 1e-6 && worst_shift < 1e-12,
          fmt("1000 neighbourhoods: max |sum-1| %.1e, max shift change %.1e", worst_sum, worst_shift)};
}

Outcome exchange_schedule() {
  const graph::CoupledInstance inst = six_entity_instance();
  const auto mediums = graph::mediums(inst.scene_graph, inst.concept_graph);
  const RelationIndex scene_rel = RelationIndex::scene();
  const RelationIndex concept_rel({"related_to", "used_for"});
  GraphTopology scene(inst.scene_graph.entities, inst.scene_graph.triples, scene_rel);
  GraphTopology concept_graph(inst.concept_graph.entities, inst.concept_graph.triples, concept_rel);
  numeric::EmbeddingTable table(4, 3);
  std::ostringstream seen;
  bool ok = true;
  for (std::size_t layers : {1u, 2u, 3u, 6u}) {
    fusion::FusionConfig config;
    config.layers = layers;
    config.dim = 4;
    config.context_dim = 2;
    numeric::ParameterStore store;
    fusion::init_fusion_parameters(store, config, scene_rel, concept_rel, 1);
    Tape tape;
    Rng rng(layers);
    Var c = tape.constant(random_tensor(Shape{2}, rng));
    const fusion::FusionResult r = fusion::forward(tape, store, scene, concept_graph, mediums, c, config, table);
    std::vector<std::size_t> expected;
    for (std::size_t l = 1; l < layers; ++l) expected.push_back(l);
    ok = ok && r.exchanged_after == expected;
    seen << " L=" << layers << ":{";
    for (std::size_t i = 0; i < r.exchanged_after.size(); ++i) seen << (i ? "," : "") << r.exchanged_after[i];
    seen << "}";

    // direct exchanges at every layer of this depth
    GraphState s = fusion::initial_state(tape, store, scene, fusion::SubNetwork::kScene, table);
    GraphState k = fusion::initial_state(tape, store, concept_graph, fusion::SubNetwork::kConcept, table);
    s.entities = numeric::add(s.entities, tape.constant(random_tensor(s.entities.shape(), rng)));
    k.entities = numeric::add(k.entities, tape.constant(random_tensor(k.entities.shape(), rng)));
    for (std::size_t l = 0; l < layers; ++l) {
      auto [s1, k1] = fusion::medium_exchange(s, k, mediums, l);
      auto is_medium = [&](const std::string& e) {
        return std::find(mediums.begin(), mediums.end(), e) != mediums.end();
      };
      for (const std::string& e : scene.entities())
        if (!is_medium(e)) ok = ok && s1.embedding(e) == s.embedding(e);
      for (const std::string& e : concept_graph.entities())
        if (!is_medium(e)) ok = ok && k1.embedding(e) == k.embedding(e);
      for (const std::string& m : mediums) {
        const bool swapped = s1.embedding(m) == k.embedding(m) && k1.embedding(m) == s.embedding(m);
        const bool kept = s1.embedding(m) == s.embedding(m) && k1.embedding(m) == k.embedding(m);
        ok = ok && (l == 0 ? kept : swapped);
      }
      auto [s2, k2] = fusion::medium_exchange(s1, k1, mediums, l);
      ok = ok && s2.entities.value() == s.entities.value() && k2.entities.value() == k.entities.value();
    }
  }
  return {ok, "exchanges after" + seen.str() + "; non-medium rows bit-identical; double exchange identity"};
}

Outcome mmd_properties() {
  Rng rng(4);
  double self = 0.0, min_value = 1.0, asym = 0.0, closed = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(5);
    const std::size_t dim = 1 + rng.index(6);
    const double sigma = 0.25 + 2.0 * rng.uniform();
    std::vector<Tensor> s, c;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(random_tensor(Shape{dim}, rng, 2.0));
      c.push_back(random_tensor(Shape{dim}, rng, 2.0));
    }
    self = std::max(self, std::abs(mmd_value(s, s, sigma)));
    const double ab = mmd_value(s, c, sigma), ba = mmd_value(c, s, sigma);
    min_value = std::min(min_value, ab);
    asym = std::max(asym, std::abs(ab - ba));
    const double k = objectives::gaussian_kernel(s[0].data(), c[0].data(), sigma);
    closed = std::max(closed, std::abs(mmd_value({s[0]}, {c[0]}, sigma) - (2.0 - 2.0 * k)));
  }
  return {self < 1e-12 && min_value >= -1e-12 && asym < 1e-12 && closed < 1e-12,
          fmt("max |mmd(X,X)| %.1e, min %.2e, max asymmetry %.1e, n=1 closed-form error %.1e", self, min_value, asym,
              closed)};
}

harness::TrainConfig small_train_config(std::size_t epochs) {
  harness::TrainConfig c;
  c.epochs = epochs;
  c.dim = 16;
  c.context_dim = 16;
  c.answer_hidden = 16;
  c.seed = 11;
  return c;
}

std::vector<graph::CoupledInstance> synthetic(std::size_t n, std::uint64_t seed) {
  harness::SyntheticSpec spec;
  spec.n_instances = n;
  spec.seed = seed;
  return harness::generate_synthetic(spec);
}

Outcome loss_algebra() {
  bool ok = true;
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double inf = 5.0 * rng.uniform(), med = 2.0 * rng.uniform(), lambda = rng.uniform();
    ok = ok && objectives::joint_loss(inf, med, lambda).joint == inf + lambda * med;
    Tape tape;
    Var j = objectives::joint_loss(tape.constant(Tensor::scalar(inf)), tape.constant(Tensor::scalar(med)), lambda);
    ok = ok && j.value().item() == inf + lambda * med;
  }
  const auto corpus = synthetic(20, 7);
  harness::TrainConfig zero = small_train_config(10);
  zero.lambda = 0.0;
  harness::TrainConfig disabled = zero;
  disabled.medium_loss_enabled = false;
  const harness::TrainResult a = harness::train(corpus, zero);
  const harness::TrainResult b = harness::train(corpus, disabled);
  std::size_t equal = 0;
  for (std::size_t i = 0; i < a.history.size() && i < b.history.size(); ++i) {
    if (a.history[i].loss.inference == b.history[i].loss.inference) ++equal;
    ok = ok && a.history[i].loss.joint == a.history[i].loss.inference + 0.0 * a.history[i].loss.medium;
  }
  ok = ok && equal == a.history.size() && a.history.size() == 10;
  return {ok, fmt("joint identity exact on 1000 draws; lambda=0 vs medium loss off: %zu/%zu epochs bit-equal", equal,
                  a.history.size())};
}

Outcome synthetic_learnability() {
  Clock clock;
  const auto corpus = synthetic(200, 7);
  harness::TrainConfig c;  // d=64, L=3, lambda=1e-3, 500 epochs
  c.eval_every = 5;
  c.target_accuracy = 0.95;
  harness::TrainResult r = harness::train(corpus, c);
  const harness::EvalReport report = harness::evaluate(r.model, corpus);
  const double t = clock.seconds();
  return {report.exact_accuracy >= 0.95 && r.history.size() <= 500 && t < 600.0,
          fmt("train exact %.3f after %zu epochs, %.1f s", report.exact_accuracy, r.history.size(), t)};
}

Outcome ablation_direction() {
  Clock clock;
  double on = 0.0, off = 0.0;
  std::ostringstream per_seed;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto train = synthetic(60, 100 + s);
    const auto heldout = synthetic(60, 200 + s);
    harness::TrainConfig c = small_train_config(60);
    c.seed = s;
    const harness::AblationReport r = harness::ablate_gmf(train, heldout, c, 2);
    on += r.with_exchange.heldout_exact / 5.0;
    off += r.without_exchange.heldout_exact / 5.0;
    per_seed << fmt(" %.2f/%.2f", r.with_exchange.heldout_exact, r.without_exchange.heldout_exact);
  }
  return {on > off, fmt("held-out exact, mean with exchange %.3f vs without %.3f (per seed on/off:", on, off) +
                        per_seed.str() + fmt("), %.1f s", clock.seconds())};
}

Outcome sweep_structure() {
  const fs::path dir = scratch("sweep");
  const std::string corpus = (dir / "train.jsonl").string();
  if (run_cli("gen -o \"" + corpus + "\" --n 6 --seed 3") != 0) return {false, "gen failed"};
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"train": {"epochs": 3, "dim": 8, "context_dim": 8, "answer_hidden": 8, "layers": 2, "seed": 5}})";
  }
  const std::string common = " --train \"" + corpus + "\" --heldout \"" + corpus + "\" --config \"" +
                             (dir / "config.json").string() + "\"";
  bool ok = true;
  std::string summary;
  for (const std::string which : {"layers", "lambda"}) {
    const fs::path a = dir / (which + "-a"), b = dir / (which + "-b");
    ok = ok && run_cli("sweep --" + which + common + " --threads 2 --run-dir \"" + a.string() + "\"") == 0;
    ok = ok && run_cli("sweep --" + which + common + " --threads 1 --run-dir \"" + b.string() + "\"") == 0;
    const std::string ja = read_file(a / ("sweep_" + which + ".json"));
    const std::string jb = read_file(b / ("sweep_" + which + ".json"));
    ok = ok && !ja.empty() && ja == jb && read_file(a / ("sweep_" + which + ".txt")) ==
                                              read_file(b / ("sweep_" + which + ".txt"));
    if (ja.empty()) continue;
    std::vector<std::string> labels;
    const auto doc = nlohmann::json::parse(ja);
    for (const auto& p : doc["points"]) labels.push_back(p["label"]);
    const std::vector<std::string> expected =
        which == "layers" ? std::vector<std::string>{"l = 2", "l = 3", "l = 4", "l = 5", "l = 6"}
                          : std::vector<std::string>{"lambda = 0",    "lambda = 1e-5", "lambda = 1e-4",
                                                     "lambda = 1e-3", "lambda = 1e-2", "lambda = 1e-1"};
    ok = ok && labels == expected;
    summary += fmt(" %s: %zu points", which.c_str(), labels.size());
  }
  return {ok, "cli sweeps" + summary + ", repeated runs byte-identical"};
}

class StubLlm : public construction::LlmClient {
 public:
  std::string complete(const std::string& prompt) override {
    if (prompt.find("Mentioned Entities:") != std::string::npos)
      return "(woman, wears, coat)\n(coat, has_color, red)\n(sakura, at_location, tree)\n(woman, near, tree)\n";
    return "A woman in a red coat under a sakura tree.";
  }
};

class StubKg : public construction::KgClient {
 public:
  std::vector<graph::Triple> neighbours(const std::string& entity, std::size_t) override {
    if (entity == "coat") return {{"coat", "used_for", "keep warm"}};
    if (entity == "sakura") return {{"sakura", "related_to", "spring"}};
    return {};
  }
};

Outcome construction_correctness() {
  const auto& vocab = graph::RelationVocabulary::standard();
  const auto accepted = construction::parse_triple_line("(woman, in_front_of, car)");
  bool ok = accepted == graph::Triple{"woman", "in_front_of", "car"};
  const std::vector<std::string> mentions = {"woman", "car"};
  const auto parsed = construction::parse_scene_triples("(woman, in_front_of, car)\n(woman, stands_by, car)\n",
                                                        mentions, vocab);
  ok = ok && parsed.accepted.size() == 1 && parsed.rejected.size() == 1 &&
       parsed.rejected[0].reason == construction::RejectReason::kUnknownRelation;

  const fs::path fixture = fs::path(MAIL_SOURCE_DIR) / "data" / "fixtures" / "okvqa_sample.jsonl";
  const auto corpus = graph::load_corpus(fixture);
  const graph::RelationHistogram hist = graph::relation_histogram(corpus);
  const graph::CorpusManifest manifest = graph::read_manifest(graph::manifest_path(fixture));
  const bool hist_ok = hist == manifest.relation_counts;
  ok = ok && hist_ok;

  const fs::path dir = scratch("construct");
  construction::ConstructionInput input{"sakura-1", "sakura.jpg", "", "What season is it?", {"season"},
                                        {{"spring", 1.0}}};
  construction::ConstructionOptions options;
  StubLlm llm;
  StubKg kg;
  construction::ResponseCache cache(dir);
  construction::CachedLlmClient rec_llm(cache, &llm);
  construction::CachedKgClient rec_kg(cache, &kg);
  const auto live = construction::construct_instance(input, rec_llm, rec_kg, options);
  construction::ResponseCache offline(dir);
  construction::CachedLlmClient rep_llm(offline, nullptr);
  construction::CachedKgClient rep_kg(offline, nullptr);
  const auto replay = construction::construct_instance(input, rep_llm, rep_kg, options);
  const bool replay_ok = graph::serialize_record(live.instance) == graph::serialize_record(replay.instance);
  ok = ok && replay_ok;
  return {ok, fmt("parser ok; fixture histogram (%zu relations over %zu instances) %s manifest; replay %s", hist.total(),
                  corpus.size(), hist_ok ? "matches" : "differs from", replay_ok ? "byte-identical" : "differs")};
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  const std::string corpus = (dir / "train.jsonl").string();
  if (run_cli("gen -o \"" + corpus + "\" --n 200 --seed 7") != 0) return {false, "gen failed"};
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    ok = ok && run_cli("train --train \"" + corpus + "\" --epochs 20 --seed 3 --run-dir \"" + (dir / run).string() +
                       "\"") == 0;
  }
  if (!ok) return {false, "train failed"};
  const auto a = nlohmann::json::parse(read_file(dir / "a" / "summary.json"));
  const auto b = nlohmann::json::parse(read_file(dir / "b" / "summary.json"));
  const double ja = a["loss_curve"].back()["joint"], jb = b["loss_curve"].back()["joint"];
  std::vector<std::string> pa, pb;
  for (const auto& p : a["predictions"]) pa.push_back(p["prediction"]);
  for (const auto& p : b["predictions"]) pb.push_back(p["prediction"]);
  const bool ckpt_same = read_file(dir / "a" / "checkpoint.json") == read_file(dir / "b" / "checkpoint.json");
  ok = std::abs(ja - jb) <= 1e-12 && pa == pb && pa.size() == 200 && ckpt_same;
  return {ok, fmt("final joint %.17g vs %.17g, %zu predictions %s, checkpoints %s", ja, jb, pa.size(),
                  pa == pb ? "identical" : "differ", ckpt_same ? "identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"attention normalization", attention_normalization},
      {"exchange schedule", exchange_schedule},
      {"mmd properties", mmd_properties},
      {"loss algebra", loss_algebra},
      {"synthetic learnability", synthetic_learnability},
      {"ablation direction", ablation_direction},
      {"sweep structure", sweep_structure},
      {"construction correctness", construction_correctness},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
