#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crackguide/config.hpp"
#include "crackguide/dataset.hpp"
#include "crackguide/metrics.hpp"
#include "crackguide/mog.hpp"
#include "crackguide/train.hpp"

namespace crackguide::harness {

struct RunRecord {
  std::string label;
  std::string config;  // to_text snapshot; replays the run
  bool guided = false;
  std::vector<model::EpochLog> log;
  metrics::MetricsReport report;  // final model on the clean test split
  double wall_seconds = 0.0;
  std::string test_fingerprint;
  std::vector<std::pair<std::string, std::string>> artifacts;  // name, path
};

struct RunOutput {
  RunRecord record;
  model::ModelParams params;
  std::optional<mog::MogModel> mog;  // last refresh of a guided run
};

std::vector<model::TrainItem> train_items(const std::vector<synth::Sample>& samples);
/// Evaluation always scores against the clean masks.
std::vector<model::EvalItem> eval_items(const std::vector<synth::Sample>& samples);

/// Trains on data.train (noisy masks), logs and reports on data.test.
RunOutput run_experiment(const ExperimentConfig& config, const Dataset& data, int threads = 1);

/// Writes model.ckpt, log.csv, report.csv, run.json and, for guided runs, mog.jsonl
/// into `dir`; fills record.artifacts.
void write_run(RunOutput& run, const std::filesystem::path& dir);

/// Columns: epoch,lr,l_bce,l_dice,l_dg,f1,iou,dice. l_dg is empty when guidance was inactive.
std::string format_log_csv(const std::vector<model::EpochLog>& log);

void write_run_record(const RunRecord& record, const std::filesystem::path& path);
RunRecord read_run_record(const std::filesystem::path& path);

metrics::MetricsReport evaluate_samples(const model::ModelParams& params, const std::vector<synth::Sample>& samples,
                                        int radius, int threads = 1);

/// Side-by-side F1/IoU/Dice in percent with guided − baseline deltas.
/// Throws ValidationError when the records were scored on different test sets.
std::string compare_runs(const RunRecord& baseline, const RunRecord& guided);

struct EmDemoResult {
  mog::EmResult fit;
  bool monotone = true;
};

/// Two-component EM on 500 points from N(0, 0.1²) and 500 from N(3, 0.1²),
/// means initialized at 1 and 2. Prints one row per iteration to `out`.
EmDemoResult em_demo(std::uint64_t seed, std::ostream& out);
/// Component initialized at 2 is dumped as class "crack", the other as "background".
mog::MogModel em_demo_model(const EmDemoResult& demo);

}  // namespace crackguide::harness
