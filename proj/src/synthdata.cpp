#include "crackguide/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "crackguide/random.hpp"

namespace crackguide::synth {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Multi-octave value noise in [-1,1].
Grid<double> value_noise(int height, int width, int octaves, Rng& rng) {
  Grid<double> out(height, width, 0.0);
  double total_amp = 0.0;
  double amp = 1.0;
  for (int o = 0; o < octaves; ++o) {
    const int cell = std::max(2, std::min(height, width) >> (o + 1));
    const int gh = height / cell + 2;
    const int gw = width / cell + 2;
    Grid<double> lattice(gh, gw);
    for (auto& v : lattice.values()) v = uniform(rng, -1.0, 1.0);
    for (int y = 0; y < height; ++y) {
      const double fy = static_cast<double>(y) / cell;
      const int y0 = static_cast<int>(fy);
      const double ty = smoothstep(fy - y0);
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / cell;
        const int x0 = static_cast<int>(fx);
        const double tx = smoothstep(fx - x0);
        const double top = lattice.at(y0, x0) * (1 - tx) + lattice.at(y0, x0 + 1) * tx;
        const double bot = lattice.at(y0 + 1, x0) * (1 - tx) + lattice.at(y0 + 1, x0 + 1) * tx;
        out.at(y, x) += amp * (top * (1 - ty) + bot * ty);
      }
    }
    total_amp += amp;
    amp *= 0.5;
  }
  if (total_amp > 0.0)
    for (auto& v : out.values()) v /= total_amp;
  return out;
}

double distance_to_segment(Point p, Point a, Point b) {
  const double vy = b.y - a.y, vx = b.x - a.x;
  const double len2 = vy * vy + vx * vx;
  double t = len2 > 0.0 ? ((p.y - a.y) * vy + (p.x - a.x) * vx) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dy = p.y - (a.y + t * vy), dx = p.x - (a.x + t * vx);
  return std::sqrt(dy * dy + dx * dx);
}

template <typename Fn>
void for_each_footprint_pixel(const CrackSegment& seg, int height, int width, Fn&& fn) {
  const double r = seg.width * 0.5;
  const auto& path = seg.path;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const Point a = path[k], b = path[k + 1];
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (distance_to_segment({double(y), double(x)}, a, b) <= r) fn(y, x);
  }
}

struct WalkParams {
  int steps;
  Range width;
  double depth;
  int branch_level;
};

void walk(Point start, double heading, const WalkParams& wp, const CrackSpec& spec, const SceneSpec& scene,
          Rng& rng, CrackGeometry& out) {
  constexpr int kMaxBranchLevel = 2;
  std::normal_distribution<double> lateral(0.0, spec.step_sigma);
  std::bernoulli_distribution branch(spec.branch_prob);
  const auto new_segment = [&](Point from) {
    const double width = uniform(rng, wp.width.min, wp.width.max);
    return CrackSegment{{from}, width, wp.depth * std::min(1.0, width / kFullContrastWidth)};
  };
  Point p = start;
  CrackSegment seg = new_segment(p);
  for (int s = 0; s < wp.steps; ++s) {
    if (s > 0 && s % kStepsPerSegment == 0) {
      out.push_back(std::move(seg));
      seg = new_segment(p);
    }
    const double dy = std::sin(heading), dx = std::cos(heading);
    const double off = lateral(rng);
    const Point next{p.y + kStepLength * dy + off * dx, p.x + kStepLength * dx - off * dy};
    heading = std::atan2(next.y - p.y, next.x - p.x);
    p = next;
    seg.path.push_back(p);
    if (p.y < -2 || p.x < -2 || p.y > scene.height + 1 || p.x > scene.width + 1) break;
    if (wp.branch_level < kMaxBranchLevel && branch(rng)) {
      const double side = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
      const double turn = side * uniform(rng, std::numbers::pi / 6, std::numbers::pi / 3);
      const WalkParams child{std::max(kStepsPerSegment, (wp.steps - s) / 2),
                             {wp.width.min, 0.5 * (wp.width.min + wp.width.max)}, wp.depth,
                             wp.branch_level + 1};
      walk(p, heading + turn, child, spec, scene, rng, out);
    }
  }
  if (seg.path.size() > 1) out.push_back(std::move(seg));
}

}  // namespace

void CrackSpec::validate() const {
  require(n_cracks >= 0, "crack.n_cracks must be >= 0");
  require(walk_steps >= 1, "crack.walk_steps must be >= 1");
  require(step_sigma >= 0.0, "crack.step_sigma must be >= 0");
  require(width_range.min >= 1.0 && width_range.max >= width_range.min, "crack.width_range must satisfy 1 <= min <= max");
  require(depth_range.min > 0.0 && depth_range.max <= 1.0 && depth_range.max >= depth_range.min,
          "crack.depth_range must lie in (0,1] with min <= max");
  require(branch_prob >= 0.0 && branch_prob <= 1.0, "crack.branch_prob must lie in [0,1]");
}

void SceneSpec::validate() const {
  require(height >= 32 && width >= 32, "scene.height/width must be >= 32");
  require(texture_octaves >= 0, "scene.texture_octaves must be >= 0");
  require(texture_amplitude >= 0.0, "scene.texture_amplitude must be >= 0");
  require(speckle_sigma >= 0.0, "scene.speckle_sigma must be >= 0");
  require(base_intensity >= 0.0 && base_intensity <= 1.0, "scene.base_intensity must lie in [0,1]");
}

void NoiseSpec::validate() const {
  require(under_rate >= 0.0 && under_rate <= 1.0, "noise.under_rate must lie in [0,1]");
  require(thin_width_max >= 0.0, "noise.thin_width_max must be >= 0");
  require(over_rate >= 0.0, "noise.over_rate must be >= 0");
  require(jitter_px >= 0, "noise.jitter_px must be >= 0");
}

MaskGrid rasterize(const CrackGeometry& geometry, int height, int width) {
  MaskGrid mask(height, width, 0);
  for (const auto& seg : geometry) for_each_footprint_pixel(seg, height, width, [&](int y, int x) { mask.at(y, x) = 1; });
  return mask;
}

GeneratedScene generate_sample(const CrackSpec& crack, const SceneSpec& scene, std::uint64_t seed) {
  crack.validate();
  scene.validate();
  Rng rng(seed);
  const int h = scene.height, w = scene.width;

  Grid<double> background = value_noise(h, w, scene.texture_octaves, rng);
  std::normal_distribution<double> speckle(0.0, scene.speckle_sigma);
  for (auto& v : background.values()) {
    v = scene.base_intensity + scene.texture_amplitude * v;
    if (scene.speckle_sigma > 0.0) v += speckle(rng);
  }

  GeneratedScene out;
  for (int c = 0; c < crack.n_cracks; ++c) {
    const Point start{uniform(rng, 0.1 * h, 0.9 * h), uniform(rng, 0.1 * w, 0.9 * w)};
    const double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double depth = uniform(rng, crack.depth_range.min, crack.depth_range.max);
    walk(start, heading, {crack.walk_steps, crack.width_range, depth, 0}, crack, scene, rng, out.geometry);
  }

  Grid<double> darkening(h, w, 0.0);
  for (const auto& seg : out.geometry)
    for_each_footprint_pixel(seg, h, w, [&](int y, int x) { darkening.at(y, x) = std::max(darkening.at(y, x), seg.depth); });

  ImageGrid image(h, w);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(background[i] - darkening[i], 0.0, 1.0);
    image[i] = std::round(v * 255.0) / 255.0;  // exact 8-bit levels
  }

  out.sample.image = std::move(image);
  out.sample.clean_mask = rasterize(out.geometry, h, w);
  out.sample.noisy_mask = out.sample.clean_mask;
  return out;
}

MaskGrid corrupt_labels(const MaskGrid& clean, const CrackGeometry& geometry, const NoiseSpec& noise,
                        std::uint64_t seed) {
  noise.validate();
  Rng rng(seed);
  const int h = clean.height(), w = clean.width();

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  CrackGeometry kept, dropped;
  for (const auto& seg : geometry) {
    const double u = u01(rng);
    if (seg.width <= noise.thin_width_max && u < noise.under_rate)
      dropped.push_back(seg);
    else
      kept.push_back(seg);
  }

  MaskGrid noisy = clean;
  if (!dropped.empty()) {
    const MaskGrid keep = rasterize(kept, h, w);
    const MaskGrid drop = rasterize(dropped, h, w);
    for (std::size_t i = 0; i < noisy.size(); ++i)
      if (drop[i] && !keep[i]) noisy[i] = 0;
  }

  if (noise.jitter_px > 0) {
    std::uniform_int_distribution<int> shift(-noise.jitter_px, noise.jitter_px);
    const int dy = shift(rng), dx = shift(rng);
    MaskGrid moved(h, w, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (noisy.contains(y - dy, x - dx)) moved.at(y, x) = noisy.at(y - dy, x - dx);
    noisy = std::move(moved);
  }

  if (noise.over_rate > 0.0) {
    const int blobs = std::poisson_distribution<int>(noise.over_rate)(rng);
    std::uniform_int_distribution<int> ry(0, h - 1), rx(0, w - 1);
    for (int b = 0; b < blobs; ++b) {
      int cy = ry(rng), cx = rx(rng);
      for (int attempt = 0; attempt < 100 && clean.at(cy, cx); ++attempt) cy = ry(rng), cx = rx(rng);
      const double radius = uniform(rng, 1.0, 2.5);
      const int ir = static_cast<int>(std::ceil(radius));
      for (int y = cy - ir; y <= cy + ir; ++y)
        for (int x = cx - ir; x <= cx + ir; ++x)
          if (noisy.contains(y, x) && (y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius) noisy.at(y, x) = 1;
    }
  }
  return noisy;
}

std::string sample_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return buf;
}

std::vector<Sample> make_dataset(int n, const CrackSpec& crack, const SceneSpec& scene, const NoiseSpec& noise,
                                 std::uint64_t seed) {
  require(n >= 1, "dataset size n must be >= 1");
  noise.validate();
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    auto gen = generate_sample(crack, scene, derive_seed(seed, {stream::kScene, idx}));
    gen.sample.noisy_mask =
        corrupt_labels(gen.sample.clean_mask, gen.geometry, noise, derive_seed(seed, {stream::kNoise, idx}));
    gen.sample.id = sample_id(i);
    out.push_back(std::move(gen.sample));
  }
  return out;
}

}  // namespace crackguide::synth
