#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "crackguide/config.hpp"
#include "crackguide/dataset.hpp"
#include "crackguide/experiment.hpp"
#include "crackguide/model.hpp"

namespace fs = std::filesystem;
using namespace crackguide;
using namespace crackguide::harness;

namespace {

constexpr const char* kDatasetConfig = "dataset.cfg";

struct Common {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
  int threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Experiment config (key = value lines)")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, std::string("Output root (default: $") + kOutputEnv + ", else ./runs)");
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set train.lambda=0");
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
    set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

std::string data_section(const std::string& config_text) {
  std::istringstream in(config_text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("data.", 0) == 0) out += line + "\n";
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + p.string());
}

int cmd_generate(const Common& c, std::optional<std::uint64_t> seed) {
  auto cfg = resolve(c);
  if (seed) cfg.data.seed = *seed;
  cfg.validate();
  const fs::path dir = cfg.resolved_output_dir() / "data";
  const auto data = generate_dataset(cfg.data);
  const auto records = write_dataset(data, cfg.data, dir);
  write_file(dir / kDatasetConfig, to_text(cfg));
  std::printf("wrote %zu records to %s\n", records.size(), (dir / kManifestName).c_str());
  return 0;
}

int cmd_train(const Common& c, std::optional<std::uint64_t> seed, std::optional<int> radius,
              const std::string& data_dir) {
  auto cfg = resolve(c);
  if (seed) cfg.train.seed = *seed;
  if (radius) cfg.eval_radius = *radius;
  cfg.validate();
  if (cfg.label == "data") throw ValidationError("label 'data' is reserved for the dataset directory");

  const fs::path root = cfg.resolved_output_dir();
  const fs::path dir = data_dir.empty() ? root / "data" : fs::path(data_dir);
  const auto data = load_dataset(dir);
  if (fs::exists(dir / kDatasetConfig) && data_section(slurp(dir / kDatasetConfig)) != data_section(to_text(cfg)))
    throw ValidationError("dataset at " + dir.string() + " was generated with a different data section");

  auto run = run_experiment(cfg, data, c.threads);
  write_run(run, root / cfg.label);
  const auto& a = run.record.report.aggregate;
  std::printf("%s (%s): F1 %.4f IoU %.4f Dice %.4f P %.4f R %.4f in %.1fs -> %s\n", cfg.label.c_str(),
              run.record.guided ? "guided" : "baseline", a.f1, a.iou, a.dice, a.precision, a.recall,
              run.record.wall_seconds, (root / cfg.label).c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, int radius, int threads,
             const std::string& report_path) {
  const auto params = model::load_checkpoint(checkpoint);
  const auto data = load_dataset(data_dir);
  const auto report = evaluate_samples(params, data.test, radius, threads);
  if (report_path.empty())
    std::cout << metrics::format_report(report);
  else
    metrics::write_report(report, report_path);
  const auto& a = report.aggregate;
  std::fprintf(stderr, "r=%d F1 %.4f IoU %.4f Dice %.4f\n", radius, a.f1, a.iou, a.dice);
  return 0;
}

int cmd_em_demo(std::uint64_t seed, const std::string& out) {
  auto result = em_demo(seed, std::cout);
  ExperimentConfig cfg;
  cfg.output_dir = out;
  const fs::path root = cfg.resolved_output_dir();
  fs::create_directories(root);
  const fs::path dump = root / "em_demo.jsonl";
  mog::write_dump(em_demo_model(result), dump);
  std::cout << "dump: " << dump.string() << "\n";
  return result.monotone ? 0 : 2;
}

int cmd_compare(const std::string& baseline, const std::string& guided) {
  std::cout << compare_runs(read_run_record(baseline), read_run_record(guided));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture-of-Gaussians guided crack segmentation on synthetic data"};
  app.require_subcommand(1);

  Common gen_opts, train_opts;
  std::optional<std::uint64_t> gen_seed, train_seed;
  std::optional<int> train_radius;
  std::string train_data;

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset to <out>/data");
  add_common(gen, gen_opts);
  gen->add_option("--seed", gen_seed, "Data seed (data.seed)");

  auto* tr = app.add_subcommand("train", "Train on <out>/data and write <out>/<label>/");
  add_common(tr, train_opts);
  tr->add_option("--seed", train_seed, "Training seed (train.seed)");
  tr->add_option("--radius", train_radius, "Evaluation tolerance radius")->check(CLI::NonNegativeNumber);
  tr->add_option("--data", train_data, "Dataset directory (default <out>/data)");

  std::string ev_ckpt, ev_data, ev_report;
  int ev_radius = metrics::kDefaultRadius, ev_threads = 1;
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a dataset's clean test split");
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--radius", ev_radius, "Tolerance radius")->check(CLI::NonNegativeNumber);
  ev->add_option("--threads", ev_threads, "Worker threads")->check(CLI::PositiveNumber);
  ev->add_option("--report", ev_report, "Write the report here instead of stdout");

  std::uint64_t demo_seed = 0;
  std::string demo_out;
  auto* demo = app.add_subcommand("em-demo", "EM on a planted 1-D two-Gaussian sample");
  demo->add_option("--seed", demo_seed, "Sampling seed");
  demo->add_option("--out", demo_out, "Directory for em_demo.jsonl");

  std::string cmp_base, cmp_guided;
  auto* cmp = app.add_subcommand("compare", "Side-by-side metrics of two run.json records");
  cmp->add_option("baseline", cmp_base, "Baseline run.json")->required()->check(CLI::ExistingFile);
  cmp->add_option("guided", cmp_guided, "Guided run.json")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(gen_opts, gen_seed);
    if (*tr) return cmd_train(train_opts, train_seed, train_radius, train_data);
    if (*ev) return cmd_eval(ev_ckpt, ev_data, ev_radius, ev_threads, ev_report);
    if (*demo) return cmd_em_demo(demo_seed, demo_out);
    if (*cmp) return cmd_compare(cmp_base, cmp_guided);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
