#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crackguide/features.hpp"
#include "crackguide/grid.hpp"
#include "crackguide/losses.hpp"
#include "crackguide/metrics.hpp"
#include "crackguide/model.hpp"

namespace crackguide::model {

struct TrainConfig {
  int epochs = 90;
  double lr0 = 3e-4;
  double beta = 0.3;
  double lambda = 0.3;
  int warmup_epochs = 5;
  int refresh_period = 1;
  int batch = 1;
  std::uint64_t seed = 0;
  double weight_decay = 1e-4;
  double output_bias = 0.0;  // initial logit of the output unit
  bool soft_guidance = false;
  int eval_radius = metrics::kDefaultRadius;
  int threads = 1;
  Dims dims{};

  void validate() const;
};

/// lr0 · ½ · (1 + cos(π · epoch / epochs)).
double cosine_lr(int epoch, const TrainConfig& cfg);

struct TrainItem {
  std::string id;
  FeatureMap features;  // standardized
  MaskGrid target;      // annotation used for supervision
};

struct EvalItem {
  std::string id;
  FeatureMap features;
  MaskGrid truth;
};

/// Per-image guidance targets for one refresh.
struct GuidanceTargets {
  std::vector<losses::SoftTarget> targets;  // one per training image
  bool degenerate = false;                  // no usable model: fall back to L_Sup
  std::vector<std::string> events;
};

/// Supplies pseudo-label targets from the current model state.
class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;
  virtual GuidanceTargets refresh(const std::vector<TrainItem>& train, const std::vector<ProbMap>& predictions,
                                  int epoch) = 0;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double l_bce = 0.0;
  double l_dice = 0.0;
  std::optional<double> l_dg;  // present only when guidance contributed this epoch
  double l_sup = 0.0;
  double l_total = 0.0;
  std::optional<metrics::Scores> eval;
  std::vector<std::string> warnings;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

/// Evaluates the model on items at threshold 0.5 under tolerant matching.
metrics::MetricsReport evaluate(const ModelParams& params, const std::vector<EvalItem>& items, int radius,
                                int threads = 1);

TrainResult train(const std::vector<TrainItem>& dataset, const TrainConfig& cfg, GuidanceProvider* guidance = nullptr,
                  const std::vector<EvalItem>& held_out = {});

}  // namespace crackguide::model
