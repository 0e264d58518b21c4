#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "mail/construction/pipeline.hpp"
#include "mail/error.hpp"
#include "mail/graph/corpus.hpp"
#include "mail/harness/experiments.hpp"
#include "mail/harness/synthetic.hpp"
#include "mail/harness/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mail;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

// Flags that mirror TrainConfig. Only flags given on the command line
// override the config file.
struct TrainFlags {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::optional<double> lambda;
  std::optional<std::size_t> layers;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> context_dim;
  std::optional<double> sigma;
  std::optional<bool> exchange;
  std::optional<bool> medium_loss;
  std::optional<std::string> attention;
  std::optional<std::size_t> answer_hidden;
  std::optional<std::size_t> eval_every;
  std::optional<double> target_accuracy;
  std::optional<std::string> entity_embeddings;
  std::optional<std::string> context_embeddings;
  std::optional<std::uint64_t> embedding_seed;

  // sweep uses --layers and --lambda as its selectors; their fixed values
  // then come from --config.
  void attach(CLI::App& app, bool sweep_selectors = false) {
    app.add_option("--config", config_file, "JSON config file (TrainConfig keys, or under \"train\")")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", seed);
    app.add_option("--epochs", epochs);
    app.add_option("--learning-rate,--lr", learning_rate);
    if (!sweep_selectors) app.add_option("--lambda", lambda, "medium loss weight");
    if (!sweep_selectors) app.add_option("--layers", layers);
    app.add_option("--dim", dim);
    app.add_option("--context-dim", context_dim);
    app.add_option("--sigma", sigma, "MMD kernel bandwidth");
    app.add_option("--exchange", exchange, "medium exchange on/off (true|false)");
    app.add_option("--medium-loss", medium_loss, "medium loss on/off (true|false)");
    app.add_option("--attention", attention)->check(CLI::IsMember({"softmax", "literal"}));
    app.add_option("--answer-hidden", answer_hidden);
    app.add_option("--eval-every", eval_every);
    app.add_option("--target-accuracy", target_accuracy);
    app.add_option("--entity-embeddings", entity_embeddings)->check(CLI::ExistingFile);
    app.add_option("--context-embeddings", context_embeddings)->check(CLI::ExistingFile);
    app.add_option("--embedding-seed", embedding_seed);
  }

  harness::TrainConfig resolve() const {
    harness::TrainConfig base;
    if (!config_file.empty()) {
      json doc = read_json(config_file);
      if (doc.contains("train")) doc = doc["train"];
      base = harness::train_config_from_json(doc, base);
    }
    json o = json::object();
    auto put = [&](const char* key, const auto& v) {
      if (v) o[key] = *v;
    };
    put("seed", seed);
    put("epochs", epochs);
    put("learning_rate", learning_rate);
    put("lambda", lambda);
    put("layers", layers);
    put("dim", dim);
    put("context_dim", context_dim);
    put("sigma", sigma);
    put("exchange_enabled", exchange);
    put("medium_loss_enabled", medium_loss);
    put("attention", attention);
    put("answer_hidden", answer_hidden);
    put("eval_every", eval_every);
    put("target_accuracy", target_accuracy);
    put("entity_embeddings", entity_embeddings);
    put("context_embeddings", context_embeddings);
    put("embedding_seed", embedding_seed);
    harness::TrainConfig c = harness::train_config_from_json(o, base);
    c.validate();
    return c;
  }
};

fs::path prepare_run_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

std::vector<graph::CoupledInstance> load_optional(const std::string& path) {
  if (path.empty()) return {};
  return graph::load_corpus(path);
}

void print_progress(const harness::EpochLog& log) {
  std::cerr << "epoch " << log.epoch << " loss " << log.loss.joint;
  if (log.train_accuracy) std::cerr << " acc " << *log.train_accuracy;
  std::cerr << "\n";
}

// Report, summary and attention trace for one evaluation corpus.
void write_eval_artifacts(harness::MailModel& model, std::span<const graph::CoupledInstance> corpus,
                          const fs::path& dir, const std::string& stem, std::vector<harness::EpochLog> curve = {}) {
  harness::AttentionTrace trace;
  harness::EvalReport report = harness::evaluate(model, corpus, &trace);
  report.loss_curve = std::move(curve);
  const std::string text = harness::format_report(report);
  write_text(dir / (stem + ".txt"), text);
  write_json(dir / (stem == "report" ? "summary.json" : stem + ".summary.json"), harness::summary_json(report));
  harness::write_attention_trace(dir / (stem == "report" ? "attention.tsv" : stem + ".attention.tsv"), trace);
  std::cout << "[" << stem << "] exact " << report.exact_accuracy << " soft " << report.soft_accuracy << " over "
            << corpus.size() << " instances\n";
}

construction::EndpointConfig endpoint_from_json(const json& doc) {
  construction::EndpointConfig c;
  c.base_url = doc.value("base_url", c.base_url);
  c.path = doc.value("path", c.path);
  c.token_env = doc.value("token_env", c.token_env);
  c.timeout_seconds = doc.value("timeout_seconds", c.timeout_seconds);
  c.retries = doc.value("retries", c.retries);
  return c;
}

std::vector<construction::ConstructionInput> read_image_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<construction::ConstructionInput> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    construction::ConstructionInput input;
    input.image_ref = line;
    input.id = fs::path(line).stem().string();
    out.push_back(std::move(input));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAIL: coupled scene/concept graph reasoning"};
  app.require_subcommand(1);

  // gen
  harness::SyntheticSpec spec;
  std::string family = "cross_modal";
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "write a synthetic corpus");
  gen->add_option("--out,-o", gen_out, "corpus path (.jsonl)")->required();
  gen->add_option("--n", spec.n_instances);
  gen->add_option("--scene-entities", spec.scene_entities);
  gen->add_option("--mediums", spec.mediums);
  gen->add_option("--distractors", spec.distractors);
  gen->add_option("--depth", spec.answer_depth);
  gen->add_option("--seed", spec.seed);
  gen->add_option("--family", family)->check(CLI::IsMember({"cross_modal", "no_mediums"}));

  // train
  TrainFlags train_flags;
  std::string train_corpus, train_heldout, train_run;
  auto* train = app.add_subcommand("train", "train a model and write a run directory");
  train->add_option("--train", train_corpus, "training corpus")->required()->check(CLI::ExistingFile);
  train->add_option("--heldout", train_heldout, "optional held-out corpus")->check(CLI::ExistingFile);
  train->add_option("--run-dir", train_run, "output directory")->required();
  train_flags.attach(*train);

  // eval
  std::string eval_ckpt, eval_corpus, eval_run;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--corpus", eval_corpus)->required()->check(CLI::ExistingFile);
  eval->add_option("--run-dir", eval_run, "write report.txt, summary.json and attention.tsv here");

  // sweep
  TrainFlags sweep_flags;
  std::string sweep_corpus, sweep_heldout, sweep_run;
  std::size_t sweep_threads = 0;
  auto* sweep = app.add_subcommand("sweep", "layer-count or lambda sweep");
  auto* by_layers = sweep->add_flag("--layers", "sweep l over 2..6");
  auto* by_lambda = sweep->add_flag("--lambda", "sweep lambda over 0, 1e-5 .. 1e-1");
  by_layers->excludes(by_lambda);
  sweep->add_option("--train", sweep_corpus)->required()->check(CLI::ExistingFile);
  sweep->add_option("--heldout", sweep_heldout)->check(CLI::ExistingFile);
  sweep->add_option("--run-dir", sweep_run);
  sweep->add_option("--threads", sweep_threads, "0: hardware concurrency");
  sweep_flags.attach(*sweep, true);

  // ablate
  TrainFlags ablate_flags;
  std::string ablate_corpus, ablate_heldout, ablate_run;
  std::size_t ablate_threads = 0;
  auto* ablate = app.add_subcommand("ablate", "train with and without medium exchange");
  ablate->add_option("--train", ablate_corpus)->required()->check(CLI::ExistingFile);
  ablate->add_option("--heldout", ablate_heldout)->check(CLI::ExistingFile);
  ablate->add_option("--run-dir", ablate_run);
  ablate->add_option("--threads", ablate_threads, "0: hardware concurrency");
  ablate_flags.attach(*ablate);

  // stats
  std::string stats_corpus;
  auto* stats = app.add_subcommand("stats", "scene relation histogram of a corpus");
  stats->add_option("corpus", stats_corpus)->required()->check(CLI::ExistingFile);

  // construct
  std::string con_inputs, con_images, con_templates, con_cache, con_out, con_config, con_model_tag;
  std::size_t con_hops = 1;
  bool con_replay = false;
  auto* construct = app.add_subcommand("construct", "build coupled graphs through the llm and kg services");
  auto* in_opt = construct->add_option("--inputs", con_inputs, "JSONL with id, image_ref or caption, question, "
                                                               "topic_entities, gold_answers")
                     ->check(CLI::ExistingFile);
  auto* img_opt = construct->add_option("--image-list", con_images, "one image reference per line")
                      ->check(CLI::ExistingFile);
  in_opt->excludes(img_opt);
  construct->add_option("--templates", con_templates, "directory with caption.txt and scene_graph.txt")
      ->check(CLI::ExistingDirectory);
  construct->add_option("--cache", con_cache, "response cache directory");
  construct->add_option("--hops", con_hops, "kg hop limit");
  construct->add_option("--out,-o", con_out, "output corpus path")->required();
  construct->add_option("--config", con_config, "JSON with \"llm\" and \"kg\" endpoint blocks")
      ->check(CLI::ExistingFile);
  construct->add_option("--model-tag", con_model_tag, "recorded with each caption");
  construct->add_flag("--replay-only", con_replay, "answer only from the cache");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      spec.family = harness::parse_family(family);
      const auto corpus = harness::generate_synthetic(spec);
      graph::save_corpus(corpus, gen_out);
      std::cout << "wrote " << corpus.size() << " instances to " << gen_out << "\n";
    } else if (*train) {
      harness::TrainConfig config = train_flags.resolve();
      const fs::path run = prepare_run_dir(train_run);
      config.checkpoint_path = (run / "checkpoint.json").string();
      write_json(run / "config.json", harness::to_json(config));
      const auto corpus = graph::load_corpus(train_corpus);
      const auto heldout = load_optional(train_heldout);
      harness::TrainResult result = harness::train(corpus, config, print_progress);
      std::ofstream curve(run / "loss.tsv");
      curve << "epoch\tjoint\tinference\tmedium\ttrain_accuracy\n";
      for (const auto& e : result.history) {
        curve << e.epoch << "\t" << e.loss.joint << "\t" << e.loss.inference << "\t" << e.loss.medium << "\t";
        if (e.train_accuracy) curve << *e.train_accuracy;
        curve << "\n";
      }
      std::cout << "best epoch " << result.best_epoch << " loss " << result.best_loss
                << (result.stopped_early ? " (stopped early)" : "") << "\n";
      // evaluate the checkpointed (best-loss) parameters
      harness::MailModel best = harness::MailModel::load(run / "checkpoint.json");
      write_eval_artifacts(best, corpus, run, "report", result.history);
      if (!heldout.empty()) write_eval_artifacts(best, heldout, run, "heldout");
    } else if (*eval) {
      harness::MailModel model = harness::MailModel::load(eval_ckpt);
      const auto corpus = graph::load_corpus(eval_corpus);
      if (!eval_run.empty()) {
        write_eval_artifacts(model, corpus, prepare_run_dir(eval_run), "report");
      } else {
        std::cout << harness::format_report(harness::evaluate(model, corpus));
      }
    } else if (*sweep) {
      if (!*by_layers && !*by_lambda) throw Error(ErrorCode::kInvalidConfig, "sweep needs --layers or --lambda");
      const harness::TrainConfig base = sweep_flags.resolve();
      const auto corpus = graph::load_corpus(sweep_corpus);
      const auto heldout = load_optional(sweep_heldout);
      const harness::SweepTable table =
          *by_layers ? harness::sweep_layers(corpus, heldout, base, harness::kLayerGrid, sweep_threads)
                     : harness::sweep_lambda(corpus, heldout, base, harness::kLambdaGrid, sweep_threads);
      const std::string text = harness::format_table(table);
      std::cout << text;
      if (!sweep_run.empty()) {
        const fs::path run = prepare_run_dir(sweep_run);
        write_json(run / "config.json", harness::to_json(base));
        write_text(run / ("sweep_" + table.parameter + ".txt"), text);
        write_json(run / ("sweep_" + table.parameter + ".json"), harness::to_json(table));
      }
    } else if (*ablate) {
      const harness::TrainConfig config = ablate_flags.resolve();
      const auto corpus = graph::load_corpus(ablate_corpus);
      const auto heldout = load_optional(ablate_heldout);
      const harness::AblationReport report = harness::ablate_gmf(corpus, heldout, config, ablate_threads);
      const std::string text = harness::format_ablation(report);
      std::cout << text;
      if (!ablate_run.empty()) {
        const fs::path run = prepare_run_dir(ablate_run);
        write_json(run / "config.json", harness::to_json(config));
        write_text(run / "ablation.txt", text);
      }
    } else if (*stats) {
      const auto corpus = graph::load_corpus(stats_corpus);
      std::cout << corpus.size() << " instances\n" << graph::format_histogram(graph::relation_histogram(corpus));
    } else if (*construct) {
      if (con_inputs.empty() && con_images.empty()) {
        throw Error(ErrorCode::kInvalidConfig, "construct needs --inputs or --image-list");
      }
      const auto inputs = con_inputs.empty() ? read_image_list(con_images)
                                             : construction::load_construction_inputs(con_inputs);
      construction::ConstructionOptions options;
      options.hop_limit = con_hops;
      options.model_tag = con_model_tag;
      if (!con_templates.empty()) {
        options.caption_template = construction::load_template(con_templates, construction::TemplateKind::kCaption);
        options.scene_template = construction::load_template(con_templates, construction::TemplateKind::kSceneGraph);
      }
      json endpoints = con_config.empty() ? json::object() : read_json(con_config);
      std::unique_ptr<construction::LlmClient> live_llm;
      std::unique_ptr<construction::KgClient> live_kg;
      if (!con_replay) {
        if (!endpoints.contains("llm") || !endpoints.contains("kg")) {
          throw Error(ErrorCode::kInvalidConfig, "live construction needs \"llm\" and \"kg\" blocks in --config");
        }
        live_llm = std::make_unique<construction::HttpLlmClient>(endpoint_from_json(endpoints["llm"]));
        live_kg = std::make_unique<construction::HttpKgClient>(endpoint_from_json(endpoints["kg"]));
      }
      if (con_cache.empty() && con_replay) throw Error(ErrorCode::kInvalidConfig, "--replay-only needs --cache");
      std::optional<construction::ResponseCache> cache;
      if (!con_cache.empty()) cache.emplace(con_cache);
      std::unique_ptr<construction::LlmClient> cached_llm;
      std::unique_ptr<construction::KgClient> cached_kg;
      construction::LlmClient* llm = live_llm.get();
      construction::KgClient* kg = live_kg.get();
      if (cache) {
        cached_llm = std::make_unique<construction::CachedLlmClient>(*cache, live_llm.get());
        cached_kg = std::make_unique<construction::CachedKgClient>(*cache, live_kg.get());
        llm = cached_llm.get();
        kg = cached_kg.get();
      }

      std::vector<graph::CoupledInstance> corpus;
      std::size_t failed = 0;
      for (const auto& input : inputs) {
        try {
          construction::ConstructedInstance built = construction::construct_instance(input, *llm, *kg, options);
          for (const auto& w : built.warnings) std::cerr << input.id << ": " << w << "\n";
          corpus.push_back(std::move(built.instance));
        } catch (const Error& e) {
          ++failed;
          std::cerr << input.id << ": skipped: " << e.what() << "\n";
        }
      }
      graph::save_corpus(corpus, con_out);
      std::cout << "wrote " << corpus.size() << " instances to " << con_out << " (" << failed << " skipped)\n";
      if (corpus.empty() && !inputs.empty()) return 3;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
