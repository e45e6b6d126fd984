#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "crackguide/features.hpp"
#include "crackguide/grid.hpp"
#include "crackguide/metrics.hpp"
#include "crackguide/random.hpp"

namespace crackguide::testing {

inline FeatureMap random_features(int h, int w, int d, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMap fm(h, w, d);
  for (auto& v : fm.values()) v = n(rng);
  return fm;
}

inline ProbMap random_prob(int h, int w, Rng& rng, double lo = 0.05, double hi = 0.95) {
  std::uniform_real_distribution<double> u(lo, hi);
  ProbMap p(h, w);
  for (auto& v : p.values()) v = u(rng);
  return p;
}

inline MaskGrid random_mask(int h, int w, double density, Rng& rng) {
  std::bernoulli_distribution b(density);
  MaskGrid m(h, w);
  for (auto& v : m.values()) v = b(rng) ? 1 : 0;
  return m;
}

/// O(N²) pairwise reference for the symmetric tolerance rule.
inline metrics::TolerantCounts brute_tolerant_counts(const MaskGrid& pred, const MaskGrid& gt, int r) {
  const auto near = [r](const MaskGrid& m, int y, int x) {
    for (int yy = 0; yy < m.height(); ++yy)
      for (int xx = 0; xx < m.width(); ++xx)
        if (m.at(yy, xx) && (yy - y) * (yy - y) + (xx - x) * (xx - x) <= r * r) return true;
    return false;
  };
  metrics::TolerantCounts c;
  c.radius = r;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      if (pred.at(y, x)) (near(gt, y, x) ? c.tp : c.fp)++;
      if (gt.at(y, x) && !near(pred, y, x)) c.fn++;
    }
  return c;
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps vanishing gradients from
/// turning roundoff into relative error.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace crackguide::testing
