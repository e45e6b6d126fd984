#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crackguide/grid.hpp"

namespace crackguide::synth {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct CrackSpec {
  int n_cracks = 3;
  int walk_steps = 40;
  double step_sigma = 0.6;       // lateral spread per step, pixels
  Range width_range{1.0, 2.4};   // pixels
  Range depth_range{0.1, 0.25};  // intensity drop
  double branch_prob = 0.03;

  void validate() const;
};

struct SceneSpec {
  int height = 64;
  int width = 64;
  int texture_octaves = 3;
  double texture_amplitude = 0.15;
  double speckle_sigma = 0.05;
  double base_intensity = 0.6;

  void validate() const;
};

struct NoiseSpec {
  double under_rate = 0.0;
  double thin_width_max = 2.2;
  double over_rate = 0.0;
  int jitter_px = 0;

  void validate() const;
};

struct Point {
  double y = 0.0;
  double x = 0.0;
};

/// A run of walk steps sharing one width; the unit of under-annotation.
/// `depth` is the rendered intensity drop of this segment's pixels.
struct CrackSegment {
  std::vector<Point> path;
  double width = 1.0;
  double depth = 0.0;
};

using CrackGeometry = std::vector<CrackSegment>;

struct Sample {
  ImageGrid image;
  MaskGrid clean_mask;
  MaskGrid noisy_mask;
  std::string id;
};

struct GeneratedScene {
  Sample sample;
  CrackGeometry geometry;
};

/// Walk steps per segment; segment widths are resampled at this cadence.
inline constexpr int kStepsPerSegment = 12;
/// Step length of the crack random walk, pixels.
inline constexpr double kStepLength = 1.5;
/// Segments narrower than this render with proportionally reduced contrast:
/// depth = crack depth · min(1, width / kFullContrastWidth).
inline constexpr double kFullContrastWidth = 2.5;

/// Pixels whose centre lies within width/2 of the segment path.
MaskGrid rasterize(const CrackGeometry& geometry, int height, int width);

GeneratedScene generate_sample(const CrackSpec& crack, const SceneSpec& scene, std::uint64_t seed);

/// Applies annotation noise. The Bernoulli drop stream is drawn first: one
/// uniform per segment in geometry order, from Rng(seed), whether or not the
/// segment is drop-eligible.
MaskGrid corrupt_labels(const MaskGrid& clean, const CrackGeometry& geometry, const NoiseSpec& noise,
                        std::uint64_t seed);

/// Per-sample seeds: generate_sample uses derive_seed(seed, {kScene, i}),
/// corrupt_labels uses derive_seed(seed, {kNoise, i}).
std::vector<Sample> make_dataset(int n, const CrackSpec& crack, const SceneSpec& scene, const NoiseSpec& noise,
                                 std::uint64_t seed);

std::string sample_id(int index);

}  // namespace crackguide::synth
