#include "crackguide/metrics.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace crackguide::metrics {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

void require_same_shape(const MaskGrid& a, const MaskGrid& b) {
  if (!a.same_shape(b)) throw ValidationError("tolerant_counts: shape mismatch");
}

}  // namespace

std::vector<std::pair<int, int>> disc_offsets(int radius) {
  if (radius < 0) throw ValidationError("dilation radius must be >= 0");
  std::vector<std::pair<int, int>> out;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dy * dy + dx * dx <= radius * radius) out.emplace_back(dy, dx);
  return out;
}

MaskGrid dilate_disc(const MaskGrid& mask, int radius) {
  const auto offsets = disc_offsets(radius);
  if (radius == 0) return mask;
  MaskGrid out(mask.height(), mask.width(), 0);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (auto [dy, dx] : offsets)
        if (out.contains(y + dy, x + dx)) out.at(y + dy, x + dx) = 1;
    }
  return out;
}

TolerantCounts tolerant_counts(const MaskGrid& pred, const MaskGrid& gt, int radius) {
  require_same_shape(pred, gt);
  const MaskGrid gt_wide = dilate_disc(gt, radius);
  const MaskGrid pred_wide = dilate_disc(pred, radius);
  TolerantCounts c;
  c.radius = radius;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i]) (gt_wide[i] ? c.tp : c.fp) += 1;
    if (gt[i] && !pred_wide[i]) c.fn += 1;
  }
  return c;
}

Scores score(const TolerantCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.fn < 0) throw ValidationError("metrics: negative counts");
  if (c.tp + c.fp + c.fn == 0) return {1.0, 1.0, 1.0, 1.0, 1.0};
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  Scores s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  s.iou = ratio(tp, tp + fp + fn);
  s.dice = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  return s;
}

MetricsReport compute_metrics(const std::vector<ImageRow>& rows) {
  MetricsReport r;
  double dice_sum = 0.0;
  for (const auto& row : rows) {
    ImageRow scored = row;
    scored.scores = score(row.counts);
    r.total += row.counts;
    r.total.radius = row.counts.radius;
    dice_sum += scored.scores.dice;
    r.per_image.push_back(std::move(scored));
  }
  r.aggregate = score(r.total);
  if (!rows.empty()) r.aggregate.dice = dice_sum / static_cast<double>(rows.size());
  return r;
}

MetricsReport compute_metrics(const TolerantCounts& counts) { return compute_metrics({ImageRow{"0000", counts, {}}}); }

MaskGrid threshold(const ProbMap& prob, double t) {
  MaskGrid out(prob.height(), prob.width(), 0);
  for (std::size_t i = 0; i < prob.size(); ++i) out[i] = prob[i] >= t;
  return out;
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "id,tp,fp,fn,precision,recall,f1,iou,dice\n";
  const auto row = [&](const std::string& id, const TolerantCounts& c, const Scores& s) {
    os << id << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << s.precision << ',' << s.recall << ',' << s.f1
       << ',' << s.iou << ',' << s.dice << '\n';
  };
  for (const auto& r : report.per_image) row(r.id, r.counts, r.scores);
  row("aggregate", report.total, report.aggregate);
  return os.str();
}

void write_report(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path.string());
  out << format_report(report);
}

}  // namespace crackguide::metrics
