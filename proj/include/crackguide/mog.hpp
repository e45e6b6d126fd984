#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crackguide/features.hpp"
#include "crackguide/grid.hpp"

namespace crackguide::mog {

inline constexpr double kVarFloor = 1e-6;
inline constexpr double kCollapseWeight = 1e-6;
inline constexpr std::size_t kMinCrackPixels = 32;
inline constexpr std::size_t kMaxFitPoints = 20000;

enum class ClassId { kCrack, kBackground };

std::string_view to_string(ClassId c);

/// Diagonal Gaussian. `weight` is the mixing weight within whatever mixture holds it.
struct GaussianComponent {
  std::vector<double> mean;
  std::vector<double> var;
  double weight = 1.0;
  std::string image_id;

  int dim() const { return static_cast<int>(mean.size()); }
  double log_density(std::span<const double> x) const;

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

struct ClassMixture {
  ClassId class_id = ClassId::kBackground;
  std::vector<GaussianComponent> components;

  /// log Σ_j π_j N(x | μ_j, σ_j); -inf when empty.
  double log_density(std::span<const double> x) const;

  friend bool operator==(const ClassMixture&, const ClassMixture&) = default;
};

struct MogModel {
  ClassMixture crack{ClassId::kCrack, {}};
  ClassMixture background{ClassId::kBackground, {}};

  /// No crack components anywhere: labeling falls back to all background.
  bool degenerate() const { return crack.components.empty(); }

  friend bool operator==(const MogModel&, const MogModel&) = default;
};

/// Row-major N×K responsibilities.
struct Responsibilities {
  std::size_t points = 0;
  std::size_t components = 0;
  std::vector<double> gamma;
  double log_likelihood = 0.0;

  double at(std::size_t i, std::size_t k) const { return gamma[i * components + k]; }
};

// ---------------------------------------------------------------------------
// Per-image fitting

struct InitComponents {
  std::optional<GaussianComponent> crack;
  GaussianComponent background;
};

/// Partitions pixels by prediction >= 0.5 and fits one diagonal Gaussian per
/// side. The crack side is omitted below kMinCrackPixels; if the background
/// side is empty, it falls back to global statistics and crack is omitted.
InitComponents init_per_image(const FeatureMap& fm, const ProbMap& prediction);

/// Row-major N×D data points.
struct PointSet {
  std::size_t count = 0;
  int dim = 0;
  std::vector<double> values;

  std::span<const double> point(std::size_t i) const {
    return {values.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

/// All pixels if at most max_points, else a seeded sample without replacement.
PointSet sample_points(const FeatureMap& fm, std::size_t max_points, std::uint64_t seed);

/// E-step in log domain; log_likelihood = Σ_i log Σ_k π_k N(x_i | θ_k).
Responsibilities e_step(const PointSet& points, std::span<const GaussianComponent> components);

/// M-step: weights, means and floored diagonal variances from responsibilities.
std::vector<GaussianComponent> m_step(const PointSet& points, const Responsibilities& resp,
                                      std::span<const GaussianComponent> previous);

struct EmOptions {
  int max_iter = 20;
  double tol = 1e-4;
  std::size_t max_points = kMaxFitPoints;
  std::uint64_t subsample_seed = 0;
  /// Called with iteration 0 (initial parameters) and after every M-step.
  std::function<void(int iteration, double log_likelihood, std::span<const GaussianComponent>)> on_iteration;
};

struct EmResult {
  std::vector<GaussianComponent> components;
  /// Indices into the initial component list of the surviving components.
  std::vector<std::size_t> survivors;
  /// Log-likelihood at the initial parameters, then after every M-step.
  std::vector<double> log_likelihood;
  /// Σ_i γ_ik over the fitted points, scaled to the full pixel count.
  std::vector<double> mass;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> events;
};

EmResult em_fit(const PointSet& points, std::vector<GaussianComponent> init, const EmOptions& options,
                double mass_scale = 1.0);
EmResult em_fit_image(const FeatureMap& fm, std::vector<GaussianComponent> init, const EmOptions& options = {});

// ---------------------------------------------------------------------------
// Pooling and labeling

struct ImageFit {
  std::string image_id;
  std::optional<GaussianComponent> crack;
  std::optional<GaussianComponent> background;
  double crack_mass = 0.0;
  double background_mass = 0.0;
};

/// One component per contributing image per class; π_j ∝ the image's class mass.
MogModel pool_mixtures(const std::vector<ImageFit>& fits);

struct Posterior {
  double p_crack = 0.5;
  double p_background = 0.5;
  bool uninformative = false;
};

/// Precomputed class mixtures for repeated posterior evaluation.
class PosteriorEvaluator {
 public:
  explicit PosteriorEvaluator(const MogModel& model, double crack_prior = 0.5);
  Posterior operator()(std::span<const double> x) const;
  int dim() const { return dim_; }

 private:
  struct Compiled {
    std::vector<double> mean;
    std::vector<double> inv_var;
    double log_const = 0.0;  // log π_j - ½ Σ log(2π σ²)
  };
  static double class_log_density(const std::vector<Compiled>& comps, std::span<const double> x);

  std::vector<Compiled> crack_;
  std::vector<Compiled> background_;
  double log_prior_ratio_ = 0.0;
  int dim_ = 0;
};

/// Two-class posterior with equal class priors. Requires both mixtures nonempty.
Posterior posterior(std::span<const double> x, const MogModel& model);

struct PseudoLabels {
  MaskGrid labels;
  Grid<double> confidence;
  Grid<double> crack_posterior;
  bool degenerate = false;
  std::size_t uninformative = 0;
};

/// MAP label per pixel; ties go to background.
PseudoLabels generate_pseudo_labels(const FeatureMap& fm, const MogModel& model, double crack_prior = 0.5);

/// Dump: one JSON object per line {class, image_id, weight, mean, var}.
void write_dump(const MogModel& model, const std::filesystem::path& path);
MogModel read_dump(const std::filesystem::path& path);

}  // namespace crackguide::mog
