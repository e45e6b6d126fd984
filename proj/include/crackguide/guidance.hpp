#pragma once

#include <cstdint>
#include <optional>

#include "crackguide/mog.hpp"
#include "crackguide/train.hpp"

namespace crackguide::mog {

struct GuidanceOptions {
  EmOptions em{};
  double crack_prior = 0.5;
  bool soft = false;  // use the crack posterior instead of the MAP label
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Per-image EM fits on the fixed features, seeded from the current
/// prediction, pooled into class mixtures that label every training pixel.
class MogGuidance final : public model::GuidanceProvider {
 public:
  explicit MogGuidance(GuidanceOptions options) : options_(options) {}

  model::GuidanceTargets refresh(const std::vector<model::TrainItem>& train, const std::vector<ProbMap>& predictions,
                                 int epoch) override;

  /// Model from the most recent refresh, if any.
  const std::optional<MogModel>& last_model() const { return last_model_; }

 private:
  GuidanceOptions options_;
  std::optional<MogModel> last_model_;
};

/// Fits one image: initialization from the prediction, then EM.
ImageFit fit_image(const FeatureMap& fm, const ProbMap& prediction, const std::string& image_id,
                   const EmOptions& options, std::vector<std::string>* events = nullptr);

}  // namespace crackguide::mog
