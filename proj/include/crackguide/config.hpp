#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "crackguide/guidance.hpp"
#include "crackguide/synthdata.hpp"
#include "crackguide/train.hpp"

namespace crackguide::harness {

struct DataConfig {
  int n_train = 40;
  int n_test = 20;
  std::uint64_t seed = 1;
  synth::CrackSpec crack{};
  synth::SceneSpec scene{};
  synth::NoiseSpec noise{.under_rate = 0.4};
};

struct GuidanceConfig {
  double crack_prior = 0.5;
  int em_max_iter = 20;
  double em_tol = 1e-4;
  int max_points = static_cast<int>(mog::kMaxFitPoints);
};

/// Everything needed to regenerate the data and replay a run.
///
/// Text form is one `key = value` per line; keys carry their section as a
/// dotted prefix (`data.noise.under_rate`, `train.lambda`, `eval.radius`).
/// `#` starts a comment. Unset keys keep their defaults.
struct ExperimentConfig {
  DataConfig data{};
  model::TrainConfig train{};
  GuidanceConfig guidance{};
  int eval_radius = 3;
  std::string output_dir;  // empty: $CRACKGUIDE_OUT, else "runs"
  std::string label = "run";

  void validate() const;

  /// Guidance is attached whenever λ > 0.
  bool guided() const { return train.lambda > 0.0; }
  /// Train config with eval radius folded in.
  model::TrainConfig train_config(int threads) const;
  mog::GuidanceOptions guidance_options(int threads) const;
  std::filesystem::path resolved_output_dir() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every key at full precision, in fixed order; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& config);

/// Applies a single `key = value` assignment.
void set_key(ExperimentConfig& config, const std::string& key, const std::string& value);

inline constexpr const char* kOutputEnv = "CRACKGUIDE_OUT";

}  // namespace crackguide::harness
