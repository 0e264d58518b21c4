#include "mail/harness/training.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mail/error.hpp"
#include "mail/numeric/optimizer.hpp"

namespace mail::harness {

void TrainConfig::validate() const {
  model_config().validate();
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "learning_rate must be non-negative");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "lambda must be non-negative");
  if (target_accuracy < 0.0 || target_accuracy > 1.0) {
    throw Error(ErrorCode::kInvalidConfig, "target_accuracy must be in [0, 1]");
  }
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.fusion.layers = layers;
  m.fusion.dim = dim;
  m.fusion.context_dim = context_dim;
  m.fusion.exchange_enabled = exchange_enabled;
  m.fusion.attention = attention;
  m.sigma = sigma;
  m.answer_hidden = answer_hidden;
  m.seed = seed;
  m.embedding_seed = embedding_seed;
  m.entity_embeddings = entity_embeddings;
  m.context_embeddings = context_embeddings;
  return m;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"seed", c.seed},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"lambda", c.lambda},
          {"layers", c.layers},
          {"dim", c.dim},
          {"context_dim", c.context_dim},
          {"sigma", c.sigma},
          {"exchange_enabled", c.exchange_enabled},
          {"medium_loss_enabled", c.medium_loss_enabled},
          {"attention", c.attention == fusion::AttentionMode::kSoftmax ? "softmax" : "literal"},
          {"answer_hidden", c.answer_hidden},
          {"eval_every", c.eval_every},
          {"target_accuracy", c.target_accuracy},
          {"checkpoint_path", c.checkpoint_path},
          {"entity_embeddings", c.entity_embeddings},
          {"context_embeddings", c.context_embeddings},
          {"embedding_seed", c.embedding_seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig c) {
  try {
    c.seed = doc.value("seed", c.seed);
    c.epochs = doc.value("epochs", c.epochs);
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.lambda = doc.value("lambda", c.lambda);
    c.layers = doc.value("layers", c.layers);
    c.dim = doc.value("dim", c.dim);
    c.context_dim = doc.value("context_dim", c.context_dim);
    c.sigma = doc.value("sigma", c.sigma);
    c.exchange_enabled = doc.value("exchange_enabled", c.exchange_enabled);
    c.medium_loss_enabled = doc.value("medium_loss_enabled", c.medium_loss_enabled);
    if (doc.contains("attention")) {
      const std::string a = doc.at("attention").get<std::string>();
      if (a != "softmax" && a != "literal") throw Error(ErrorCode::kInvalidConfig, "unknown attention '" + a + "'");
      c.attention = a == "softmax" ? fusion::AttentionMode::kSoftmax : fusion::AttentionMode::kLiteral;
    }
    c.answer_hidden = doc.value("answer_hidden", c.answer_hidden);
    c.eval_every = doc.value("eval_every", c.eval_every);
    c.target_accuracy = doc.value("target_accuracy", c.target_accuracy);
    c.checkpoint_path = doc.value("checkpoint_path", c.checkpoint_path);
    c.entity_embeddings = doc.value("entity_embeddings", c.entity_embeddings);
    c.context_embeddings = doc.value("context_embeddings", c.context_embeddings);
    c.embedding_seed = doc.value("embedding_seed", c.embedding_seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("train config: ") + e.what());
  }
  return c;
}

namespace {

void check_trainable(std::span<const graph::CoupledInstance> corpus) {
  if (corpus.empty()) throw Error(ErrorCode::kInvalidConfig, "training corpus is empty");
  for (const auto& inst : corpus) {
    for (const graph::Violation& v : graph::validate(inst)) {
      if (v.code == graph::ViolationCode::kNoMediums) continue;
      throw Error(ErrorCode::kInvalidConfig,
                  "instance '" + inst.id + "' is invalid: " + std::string(graph::to_string(v.code)) + " " + v.detail);
    }
  }
}

double accuracy(MailModel& model, std::span<const PreparedInstance> prepared) {
  std::size_t hits = 0;
  for (const PreparedInstance& p : prepared) {
    const std::string guess = objectives::predict(model.scores(p));
    for (const auto& g : p.gold_answers) {
      if (g.entity == guess) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(prepared.size());
}

}  // namespace

TrainResult train(std::span<const graph::CoupledInstance> corpus, const TrainConfig& config,
                  const ProgressFn& progress) {
  config.validate();
  check_trainable(corpus);
  MailModel model(config.model_config(), MailModel::concept_relations_of(corpus));
  model.register_contexts(corpus);

  std::vector<PreparedInstance> prepared;
  prepared.reserve(corpus.size());
  for (const auto& inst : corpus) prepared.push_back(model.prepare(inst));

  numeric::AdamHyperparams hp;
  hp.learning_rate = config.learning_rate;
  numeric::Adam adam(hp);
  ParameterStore& store = model.store();
  store.zero_grad();

  TrainResult result{std::move(model), {}, 0, 0.0, {}, false};
  MailModel& m = result.model;
  const double inv_n = 1.0 / static_cast<double>(prepared.size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double inference = 0.0, medium = 0.0;
    for (const PreparedInstance& p : prepared) {
      const std::string where = "epoch " + std::to_string(epoch) + ", instance '" + p.id + "'";
      try {
        Tape tape;
        InstancePass pass = m.run(tape, p, config.lambda, config.medium_loss_enabled);
        const double joint = pass.joint.value().item();
        if (!std::isfinite(joint)) {
          throw Error(ErrorCode::kNonFiniteLoss, where + ": loss " + std::to_string(joint));
        }
        inference += pass.inference.value().item();
        if (pass.medium.valid()) medium += pass.medium.value().item();
        tape.backward(pass.joint, inv_n);
      } catch (const Error& e) {
        // debug builds stop at the first non-finite op, before the loss exists
        if (e.code() != ErrorCode::kNonFiniteLoss || std::string(e.what()).find(where) != std::string::npos) throw;
        throw Error(ErrorCode::kNonFiniteLoss, where + ": " + e.what());
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = objectives::joint_loss(inference * inv_n, medium * inv_n,
                                      config.medium_loss_enabled ? config.lambda : 0.0);
    if (!config.medium_loss_enabled) log.loss.lambda = config.lambda;
    // the loss belongs to the parameters before this step
    if (result.history.empty() || log.loss.joint < result.best_loss) {
      result.best_loss = log.loss.joint;
      result.best_epoch = epoch;
      result.best_parameters = m.store();
    }
    adam.step(m.store());
    const bool eval_now = config.eval_every > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs);
    if (eval_now) log.train_accuracy = accuracy(m, prepared);
    result.history.push_back(log);
    if (progress) progress(log);
    if (config.target_accuracy > 0.0 && log.train_accuracy && *log.train_accuracy >= config.target_accuracy) {
      result.stopped_early = epoch < config.epochs;
      break;
    }
  }
  if (result.history.empty()) result.best_parameters = m.store();
  if (!config.checkpoint_path.empty()) {
    nlohmann::json doc = m.checkpoint();
    doc["parameters"] = result.best_parameters.to_json();
    doc["best_epoch"] = result.best_epoch;
    numeric::write_json_file(config.checkpoint_path, doc);
  }
  return result;
}

double soft_score(const std::string& prediction, std::span<const graph::GoldAnswer> golds) {
  double total = 0.0;
  for (const auto& g : golds)
    if (g.entity == prediction) total += g.weight;
  return std::min(total, 1.0);
}

EvalReport tally(std::vector<Prediction> predictions) {
  EvalReport report;
  for (Prediction& pred : predictions) {
    pred.correct = false;
    for (const auto& g : pred.gold_answers) pred.correct |= g.entity == pred.prediction;
    pred.soft = soft_score(pred.prediction, pred.gold_answers);
    report.exact_accuracy += pred.correct ? 1.0 : 0.0;
    report.soft_accuracy += pred.soft;
  }
  if (!predictions.empty()) {
    report.exact_accuracy /= static_cast<double>(predictions.size());
    report.soft_accuracy /= static_cast<double>(predictions.size());
  }
  report.predictions = std::move(predictions);
  return report;
}

EvalReport evaluate(MailModel& model, std::span<const graph::CoupledInstance> corpus, AttentionTrace* trace) {
  std::vector<Prediction> predictions;
  for (const auto& inst : corpus) {
    const PreparedInstance p = model.prepare(inst);
    Prediction pred;
    pred.id = inst.id;
    pred.prediction = objectives::predict(model.scores(p, trace));
    pred.gold_answers = inst.gold_answers;
    predictions.push_back(std::move(pred));
  }
  return tally(std::move(predictions));
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "instances       %zu\nexact accuracy  %.4f\nsoft accuracy   %.4f\n",
                report.predictions.size(), report.exact_accuracy, report.soft_accuracy);
  out << line;
  if (!report.loss_curve.empty()) {
    const EpochLog& last = report.loss_curve.back();
    std::snprintf(line, sizeof line, "epochs          %zu\nfinal loss      %.6f (inference %.6f, medium %.6f)\n",
                  last.epoch, last.loss.joint, last.loss.inference, last.loss.medium);
    out << line;
  }
  out << "\n";
  std::snprintf(line, sizeof line, "%-24s %-24s %-24s %s\n", "id", "prediction", "gold", "ok");
  out << line;
  for (const Prediction& p : report.predictions) {
    std::string gold;
    for (const auto& g : p.gold_answers) gold += (gold.empty() ? "" : "|") + g.entity;
    std::snprintf(line, sizeof line, "%-24s %-24s %-24s %s\n", p.id.c_str(), p.prediction.c_str(), gold.c_str(),
                  p.correct ? "yes" : "no");
    out << line;
  }
  return out.str();
}

nlohmann::json summary_json(const EvalReport& report) {
  nlohmann::json predictions = nlohmann::json::array();
  for (const Prediction& p : report.predictions) {
    nlohmann::json gold = nlohmann::json::array();
    for (const auto& g : p.gold_answers) gold.push_back({{"entity", g.entity}, {"weight", g.weight}});
    predictions.push_back(
        {{"id", p.id}, {"prediction", p.prediction}, {"gold", gold}, {"correct", p.correct}, {"soft", p.soft}});
  }
  nlohmann::json curve = nlohmann::json::array();
  for (const EpochLog& e : report.loss_curve) {
    nlohmann::json row = {{"epoch", e.epoch},
                          {"inference", e.loss.inference},
                          {"medium", e.loss.medium},
                          {"lambda", e.loss.lambda},
                          {"joint", e.loss.joint}};
    if (e.train_accuracy) row["train_accuracy"] = *e.train_accuracy;
    curve.push_back(row);
  }
  return {{"exact_accuracy", report.exact_accuracy},
          {"soft_accuracy", report.soft_accuracy},
          {"predictions", predictions},
          {"loss_curve", curve}};
}

void write_attention_trace(const std::filesystem::path& path, const AttentionTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "net\tlayer\thead\trelation\ttail\talpha\n";
  char alpha[32];
  for (const auto& r : trace) {
    std::snprintf(alpha, sizeof alpha, "%.9g", r.alpha);
    out << fusion::to_string(r.net) << '\t' << r.layer << '\t' << r.head << '\t' << r.relation << '\t' << r.tail
        << '\t' << alpha << '\n';
  }
}

}  // namespace mail::harness
