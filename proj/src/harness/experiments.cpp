#include "mail/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

namespace mail::harness {

namespace {

struct Job {
  TrainConfig config;
  std::string label;
};

SweepPoint run_point(std::span<const graph::CoupledInstance> train_corpus,
                     std::span<const graph::CoupledInstance> heldout, const Job& job) {
  TrainResult r = train(train_corpus, job.config);
  SweepPoint p;
  p.label = job.label;
  p.config = job.config;
  const EvalReport on_train = evaluate(r.model, train_corpus);
  p.train_exact = on_train.exact_accuracy;
  p.train_soft = on_train.soft_accuracy;
  if (!heldout.empty()) {
    const EvalReport on_heldout = evaluate(r.model, heldout);
    p.heldout_exact = on_heldout.exact_accuracy;
    p.heldout_soft = on_heldout.soft_accuracy;
  }
  p.final_joint = r.history.empty() ? 0.0 : r.history.back().loss.joint;
  p.epochs_run = r.history.size();
  return p;
}

// Runs jobs on a small pool; each job owns its model, so only the output
// slot is shared.
std::vector<SweepPoint> run_jobs(std::span<const graph::CoupledInstance> train_corpus,
                                 std::span<const graph::CoupledInstance> heldout, const std::vector<Job>& jobs,
                                 std::size_t threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs.size());
  std::vector<SweepPoint> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        out[i] = run_point(train_corpus, heldout, jobs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace

std::string format_lambda(double lambda) {
  if (lambda == 0.0) return "0";
  char buf[32];
  const int exponent = static_cast<int>(std::lround(std::log10(lambda)));
  if (std::abs(lambda - std::pow(10.0, exponent)) < 1e-12 * lambda) {
    std::snprintf(buf, sizeof buf, "1e%d", exponent);
  } else {
    std::snprintf(buf, sizeof buf, "%g", lambda);
  }
  return buf;
}

SweepTable sweep_layers(std::span<const graph::CoupledInstance> train_corpus,
                        std::span<const graph::CoupledInstance> heldout, const TrainConfig& base,
                        const std::vector<std::size_t>& grid, std::size_t threads) {
  std::vector<Job> jobs;
  for (std::size_t l : grid) {
    TrainConfig c = base;
    c.layers = l;
    c.checkpoint_path.clear();
    jobs.push_back({c, "l = " + std::to_string(l)});
  }
  return SweepTable{"layers", run_jobs(train_corpus, heldout, jobs, threads)};
}

SweepTable sweep_lambda(std::span<const graph::CoupledInstance> train_corpus,
                        std::span<const graph::CoupledInstance> heldout, const TrainConfig& base,
                        const std::vector<double>& grid, std::size_t threads) {
  std::vector<Job> jobs;
  for (double lambda : grid) {
    TrainConfig c = base;
    c.lambda = lambda;
    c.checkpoint_path.clear();
    jobs.push_back({c, "lambda = " + format_lambda(lambda)});
  }
  return SweepTable{"lambda", run_jobs(train_corpus, heldout, jobs, threads)};
}

std::string format_table(const SweepTable& table) {
  std::size_t width = 10;
  for (const auto& p : table.points) width = std::max(width, p.label.size() + 2);
  std::ostringstream out;
  char cell[64];
  auto row = [&](const std::string& name, auto value) {
    std::snprintf(cell, sizeof cell, "%-20s", name.c_str());
    out << cell;
    for (const auto& p : table.points) {
      std::snprintf(cell, sizeof cell, "%*s", static_cast<int>(width), value(p).c_str());
      out << cell;
    }
    out << '\n';
  };
  auto pct = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", 100.0 * v);
    return std::string(b);
  };
  row("", [](const SweepPoint& p) { return p.label; });
  row("train exact", [&](const SweepPoint& p) { return pct(p.train_exact); });
  row("train soft", [&](const SweepPoint& p) { return pct(p.train_soft); });
  const bool held = !table.points.empty() && table.points.front().heldout_exact.has_value();
  if (held) {
    row("held-out exact", [&](const SweepPoint& p) { return pct(*p.heldout_exact); });
    row("held-out soft", [&](const SweepPoint& p) { return pct(*p.heldout_soft); });
  }
  row("final joint loss", [](const SweepPoint& p) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", p.final_joint);
    return std::string(b);
  });
  return out.str();
}

nlohmann::json to_json(const SweepTable& table) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : table.points) {
    nlohmann::json j = {{"label", p.label},
                        {"layers", p.config.layers},
                        {"lambda", p.config.lambda},
                        {"train_exact", p.train_exact},
                        {"train_soft", p.train_soft},
                        {"final_joint", p.final_joint},
                        {"epochs_run", p.epochs_run}};
    if (p.heldout_exact) {
      j["heldout_exact"] = *p.heldout_exact;
      j["heldout_soft"] = *p.heldout_soft;
    }
    points.push_back(j);
  }
  return {{"parameter", table.parameter}, {"points", points}};
}

AblationReport ablate_gmf(std::span<const graph::CoupledInstance> train_corpus,
                          std::span<const graph::CoupledInstance> heldout, const TrainConfig& config,
                          std::size_t threads) {
  TrainConfig on = config, off = config;
  on.exchange_enabled = true;
  off.exchange_enabled = false;
  on.checkpoint_path.clear();
  off.checkpoint_path.clear();

  AblationArm arms[2];
  std::exception_ptr errors[2];
  auto run = [&](int i, const TrainConfig& c) {
    try {
      TrainResult r = train(train_corpus, c);
      arms[i].train_exact = evaluate(r.model, train_corpus).exact_accuracy;
      arms[i].report = evaluate(r.model, heldout.empty() ? train_corpus : heldout);
      arms[i].heldout_exact = arms[i].report.exact_accuracy;
      arms[i].report.loss_curve = r.history;
      arms[i].final_joint = r.history.empty() ? 0.0 : r.history.back().loss.joint;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads == 0) threads = std::thread::hardware_concurrency();
  if (threads >= 2) {
    std::thread t([&] { run(1, off); });
    run(0, on);
    t.join();
  } else {
    run(0, on);
    run(1, off);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  AblationReport report{arms[0], arms[1], 0.0};
  report.delta = report.with_exchange.report.exact_accuracy - report.without_exchange.report.exact_accuracy;
  return report;
}

std::string format_ablation(const AblationReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-22s %12s %12s %12s\n%-22s %12.2f %12.2f %12.4f\n%-22s %12.2f %12.2f %12.4f\ndelta (exact, eval) %+.2f\n",
                "variant", "train exact", "eval exact", "final loss", "with exchange", 100.0 * r.with_exchange.train_exact,
                100.0 * r.with_exchange.heldout_exact, r.with_exchange.final_joint, "without exchange",
                100.0 * r.without_exchange.train_exact, 100.0 * r.without_exchange.heldout_exact,
                r.without_exchange.final_joint, 100.0 * r.delta);
  return buf;
}

}  // namespace mail::harness
