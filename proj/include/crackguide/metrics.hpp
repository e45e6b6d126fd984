#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crackguide/grid.hpp"

namespace crackguide::metrics {

inline constexpr int kDefaultRadius = 3;

struct TolerantCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  int radius = 0;

  TolerantCounts& operator+=(const TolerantCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const TolerantCounts&, const TolerantCounts&) = default;
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  double dice = 0.0;
};

struct ImageRow {
  std::string id;
  TolerantCounts counts;
  Scores scores;
};

/// Per-image rows plus the dataset row. Aggregate precision/recall/F1/IoU
/// come from summed counts; aggregate Dice is the mean of per-image Dice.
struct MetricsReport {
  std::vector<ImageRow> per_image;
  TolerantCounts total;
  Scores aggregate;

  double f1() const { return aggregate.f1; }
  double iou() const { return aggregate.iou; }
  double dice() const { return aggregate.dice; }
};

/// Disc structuring element: (dy, dx) with dy² + dx² <= r².
std::vector<std::pair<int, int>> disc_offsets(int radius);

MaskGrid dilate_disc(const MaskGrid& mask, int radius);

/// tp = |pred ∩ D(gt)|, fp = |pred \ D(gt)|, fn = |gt \ D(pred)|.
TolerantCounts tolerant_counts(const MaskGrid& pred, const MaskGrid& gt, int radius);

/// Empty-denominator rules: all-zero counts score 1 everywhere; otherwise a
/// ratio with zero denominator scores 0.
Scores score(const TolerantCounts& c);

MetricsReport compute_metrics(const std::vector<ImageRow>& rows);
MetricsReport compute_metrics(const TolerantCounts& counts);

/// p >= t is crack, matching the partition used to seed the mixture fits.
MaskGrid threshold(const ProbMap& prob, double t = 0.5);

/// Structured text: header line, one CSV row per image, then an "aggregate" row.
std::string format_report(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace crackguide::metrics
