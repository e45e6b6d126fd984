#include "crackguide/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "crackguide/guidance.hpp"
#include "crackguide/random.hpp"

namespace crackguide::harness {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json scores_json(const metrics::Scores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"iou", s.iou}, {"dice", s.dice}};
}

metrics::Scores scores_from(const nlohmann::json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>(),
          j.at("iou").get<double>(), j.at("dice").get<double>()};
}

ordered_json counts_json(const metrics::TolerantCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"radius", c.radius}};
}

metrics::TolerantCounts counts_from(const nlohmann::json& j) {
  return {j.at("tp").get<std::int64_t>(), j.at("fp").get<std::int64_t>(), j.at("fn").get<std::int64_t>(),
          j.at("radius").get<int>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::vector<model::TrainItem> train_items(const std::vector<synth::Sample>& samples) {
  std::vector<model::TrainItem> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.id, features::compute(s.image), s.noisy_mask});
  return out;
}

std::vector<model::EvalItem> eval_items(const std::vector<synth::Sample>& samples) {
  std::vector<model::EvalItem> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.id, features::compute(s.image), s.clean_mask});
  return out;
}

RunOutput run_experiment(const ExperimentConfig& config, const Dataset& data, int threads) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  const auto train = train_items(data.train);
  const auto test = eval_items(data.test);

  std::optional<mog::MogGuidance> guidance;
  if (config.guided()) guidance.emplace(config.guidance_options(threads));
  auto result = model::train(train, config.train_config(threads), guidance ? &*guidance : nullptr, test);

  RunOutput out;
  out.record.label = config.label;
  out.record.config = to_text(config);
  out.record.guided = config.guided();
  out.record.log = std::move(result.log);
  out.record.report = model::evaluate(result.params, test, config.eval_radius, threads);
  out.record.test_fingerprint = test_fingerprint(data);
  out.params = std::move(result.params);
  if (guidance) out.mog = guidance->last_model();
  out.record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string format_log_csv(const std::vector<model::EpochLog>& log) {
  std::string out = "epoch,lr,l_bce,l_dice,l_dg,f1,iou,dice\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + num(e.lr) + "," + num(e.l_bce) + "," + num(e.l_dice) + ",";
    if (e.l_dg) out += num(*e.l_dg);
    if (e.eval)
      out += "," + num(e.eval->f1) + "," + num(e.eval->iou) + "," + num(e.eval->dice) + "\n";
    else
      out += ",,,\n";
  }
  return out;
}

void write_run(RunOutput& run, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  auto& artifacts = run.record.artifacts;
  artifacts.clear();
  const auto add = [&](const char* name, const fs::path& p) { artifacts.emplace_back(name, p.string()); };

  model::save_checkpoint(run.params, dir / "model.ckpt");
  add("checkpoint", dir / "model.ckpt");
  write_text(dir / "log.csv", format_log_csv(run.record.log));
  add("log", dir / "log.csv");
  metrics::write_report(run.record.report, dir / "report.csv");
  add("report", dir / "report.csv");
  if (run.mog) {
    mog::write_dump(*run.mog, dir / "mog.jsonl");
    add("mog", dir / "mog.jsonl");
  }
  add("record", dir / "run.json");
  write_run_record(run.record, dir / "run.json");
}

void write_run_record(const RunRecord& r, const fs::path& path) {
  ordered_json j;
  j["label"] = r.label;
  j["guided"] = r.guided;
  j["config"] = r.config;
  j["test_fingerprint"] = r.test_fingerprint;
  j["wall_seconds"] = r.wall_seconds;
  j["epochs"] = ordered_json::array();
  for (const auto& e : r.log) {
    ordered_json row = {{"epoch", e.epoch},   {"lr", e.lr},       {"l_bce", e.l_bce}, {"l_dice", e.l_dice},
                        {"l_dg", nullptr},    {"l_sup", e.l_sup}, {"l_total", e.l_total}};
    if (e.l_dg) row["l_dg"] = *e.l_dg;
    row["eval"] = e.eval ? scores_json(*e.eval) : ordered_json(nullptr);
    row["warnings"] = e.warnings;
    j["epochs"].push_back(std::move(row));
  }
  ordered_json per_image = ordered_json::array();
  for (const auto& row : r.report.per_image) {
    auto c = counts_json(row.counts);
    per_image.push_back({{"id", row.id}, {"counts", c}});
  }
  j["report"] = {{"aggregate", scores_json(r.report.aggregate)},
                 {"total", counts_json(r.report.total)},
                 {"per_image", std::move(per_image)}};
  ordered_json artifacts = ordered_json::object();
  for (const auto& [name, p] : r.artifacts) artifacts[name] = p;
  j["artifacts"] = std::move(artifacts);
  write_text(path, j.dump(2) + "\n");
}

RunRecord read_run_record(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read run record " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    RunRecord r;
    r.label = j.at("label").get<std::string>();
    r.guided = j.at("guided").get<bool>();
    r.config = j.at("config").get<std::string>();
    r.test_fingerprint = j.at("test_fingerprint").get<std::string>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& row : j.at("epochs")) {
      model::EpochLog e;
      e.epoch = row.at("epoch").get<int>();
      e.lr = row.at("lr").get<double>();
      e.l_bce = row.at("l_bce").get<double>();
      e.l_dice = row.at("l_dice").get<double>();
      if (!row.at("l_dg").is_null()) e.l_dg = row.at("l_dg").get<double>();
      e.l_sup = row.at("l_sup").get<double>();
      e.l_total = row.at("l_total").get<double>();
      if (!row.at("eval").is_null()) e.eval = scores_from(row.at("eval"));
      e.warnings = row.at("warnings").get<std::vector<std::string>>();
      r.log.push_back(std::move(e));
    }
    std::vector<metrics::ImageRow> rows;
    for (const auto& row : j.at("report").at("per_image"))
      rows.push_back({row.at("id").get<std::string>(), counts_from(row.at("counts")), {}});
    r.report = metrics::compute_metrics(rows);
    for (const auto& [name, p] : j.at("artifacts").items()) r.artifacts.emplace_back(name, p.get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed run record " + path.string() + ": " + e.what());
  }
}

metrics::MetricsReport evaluate_samples(const model::ModelParams& params, const std::vector<synth::Sample>& samples,
                                        int radius, int threads) {
  if (radius < 0) throw ValidationError("radius must be >= 0");
  const auto items = eval_items(samples);
  for (const auto& it : items)
    if (it.features.dim() != params.input_dim())
      throw ValidationError("checkpoint expects " + std::to_string(params.input_dim()) + " feature channels, got " +
                            std::to_string(it.features.dim()));
  return model::evaluate(params, items, radius, threads);
}

std::string compare_runs(const RunRecord& baseline, const RunRecord& guided) {
  if (baseline.test_fingerprint != guided.test_fingerprint)
    throw ValidationError("runs were evaluated on different test sets (" + baseline.test_fingerprint + " vs " +
                          guided.test_fingerprint + ")");
  const auto& b = baseline.report.aggregate;
  const auto& g = guided.report.aggregate;
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %10s %10s %8s\n", "metric", baseline.label.c_str(), guided.label.c_str(),
                "delta");
  out += line;
  const auto row = [&](const char* name, double vb, double vg) {
    std::snprintf(line, sizeof line, "%-10s %10.2f %10.2f %+8.2f\n", name, 100 * vb, 100 * vg, 100 * (vg - vb));
    out += line;
  };
  row("F1", b.f1, g.f1);
  row("IoU", b.iou, g.iou);
  row("Dice", b.dice, g.dice);
  row("Precision", b.precision, g.precision);
  row("Recall", b.recall, g.recall);
  return out;
}

EmDemoResult em_demo(std::uint64_t seed, std::ostream& out) {
  constexpr int kPerMode = 500;
  Rng rng(derive_seed(seed, {stream::kDemo}));
  std::normal_distribution<double> noise(0.0, 0.1);
  mog::PointSet points;
  points.dim = 1;
  for (double centre : {0.0, 3.0})
    for (int i = 0; i < kPerMode; ++i) points.values.push_back(centre + noise(rng));
  points.count = points.values.size();

  std::vector<mog::GaussianComponent> init = {{{1.0}, {1.0}, 0.5, "em-demo"}, {{2.0}, {1.0}, 0.5, "em-demo"}};

  EmDemoResult result;
  mog::EmOptions opt;
  opt.max_iter = 100;
  opt.tol = 1e-8;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%4s %18s %10s %10s %9s %9s\n", "iter", "log_likelihood", "mean_0", "mean_1", "w_0",
                "w_1");
  out << buf;
  double prev = -INFINITY;
  opt.on_iteration = [&](int it, double ll, std::span<const mog::GaussianComponent> comps) {
    if (ll < prev - 1e-9 * std::abs(prev)) result.monotone = false;
    prev = ll;
    const double m1 = comps.size() > 1 ? comps[1].mean[0] : NAN;
    const double w1 = comps.size() > 1 ? comps[1].weight : 0.0;
    std::snprintf(buf, sizeof buf, "%4d %18.10f %10.6f %10.6f %9.6f %9.6f\n", it, ll, comps[0].mean[0], m1,
                  comps[0].weight, w1);
    out << buf;
  };
  result.fit = mog::em_fit(points, std::move(init), opt);
  out << (result.fit.converged ? "converged" : "stopped at max_iter") << " after " << result.fit.iterations
      << " iterations; log-likelihood " << (result.monotone ? "non-decreasing" : "DECREASED") << "\n";
  return result;
}

mog::MogModel em_demo_model(const EmDemoResult& demo) {
  mog::MogModel m;
  for (std::size_t k = 0; k < demo.fit.components.size(); ++k) {
    auto& mix = demo.fit.survivors[k] == 1 ? m.crack : m.background;
    mix.components.push_back(demo.fit.components[k]);
  }
  for (auto* mix : {&m.crack, &m.background}) {
    double total = 0.0;
    for (const auto& c : mix->components) total += c.weight;
    for (auto& c : mix->components) c.weight /= total;
  }
  return m;
}

}  // namespace crackguide::harness
