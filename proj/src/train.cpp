#include "crackguide/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "crackguide/parallel.hpp"
#include "crackguide/random.hpp"

namespace crackguide::model {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train.epochs must be >= 1");
  if (!(lr0 > 0.0)) throw ValidationError("train.lr0 must be > 0");
  losses::validate_beta(beta);
  losses::validate_lambda(lambda);
  if (warmup_epochs < 0 || warmup_epochs > epochs)
    throw ValidationError("train.warmup_epochs must lie in [0, epochs]");
  if (refresh_period < 1) throw ValidationError("train.refresh_period must be >= 1");
  if (batch < 1) throw ValidationError("train.batch must be >= 1");
  if (weight_decay < 0.0) throw ValidationError("train.weight_decay must be >= 0");
  if (eval_radius < 0) throw ValidationError("eval.radius must be >= 0");
}

double cosine_lr(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs)
    throw ValidationError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) +
                          ")");
  return cfg.lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs));
}

metrics::MetricsReport evaluate(const ModelParams& params, const std::vector<EvalItem>& items, int radius,
                                int threads) {
  std::vector<metrics::ImageRow> rows(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) {
    const MaskGrid pred = metrics::threshold(forward(items[i].features, params));
    rows[i] = {items[i].id, metrics::tolerant_counts(pred, items[i].truth, radius), {}};
  });
  return metrics::compute_metrics(rows);
}

namespace {

void accumulate(Network& into, const Network& g) {
  auto dst = into.tensors();
  auto src = g.tensors();
  for (std::size_t k = 0; k < Network::kTensorCount; ++k)
    for (std::size_t i = 0; i < dst[k]->size(); ++i) (*dst[k])[i] += (*src[k])[i];
}

void scale(Network& n, double s) {
  for (auto* t : n.tensors())
    for (auto& v : *t) v *= s;
}

}  // namespace

TrainResult train(const std::vector<TrainItem>& dataset, const TrainConfig& cfg, GuidanceProvider* guidance,
                  const std::vector<EvalItem>& held_out) {
  cfg.validate();
  if (dataset.empty()) throw ValidationError("train: empty dataset");
  for (const auto& item : dataset)
    if (!item.target.same_shape(item.features.height(), item.features.width()))
      throw ValidationError("train: target shape mismatch for image " + item.id);

  TrainResult result;
  result.params = init_params(cfg.dims, cfg.seed, cfg.output_bias);
  if (result.params.input_dim() != dataset.front().features.dim())
    throw ValidationError("train: feature dim does not match model input");
  AdamW opt(result.params.weights, {0.9, 0.999, 1e-8, cfg.weight_decay});

  const std::size_t n = dataset.size();
  std::vector<losses::SoftTarget> pseudo;  // empty until the first successful refresh
  std::vector<std::size_t> order(n);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.lr = cosine_lr(epoch, cfg);

    bool guided = false;
    if (guidance && epoch >= cfg.warmup_epochs) {
      if ((epoch - cfg.warmup_epochs) % cfg.refresh_period == 0 || pseudo.empty()) {
        std::vector<ProbMap> preds(n);
        parallel_for(n, cfg.threads, [&](std::size_t i) { preds[i] = forward(dataset[i].features, result.params); });
        GuidanceTargets g = guidance->refresh(dataset, preds, epoch);
        for (auto& e : g.events) log.warnings.push_back(std::move(e));
        if (g.degenerate) {
          log.warnings.push_back("guidance degenerate for every image; supervised loss only this epoch");
          pseudo.clear();
        } else {
          if (g.targets.size() != n) throw ValidationError("guidance returned wrong number of targets");
          pseudo = std::move(g.targets);
        }
      }
      guided = !pseudo.empty();
    }

    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {stream::kShuffle, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double sum_bce = 0.0, sum_dice = 0.0, sum_dg = 0.0, sum_sup = 0.0, sum_total = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t count = std::min(n - start, static_cast<std::size_t>(cfg.batch));
      std::vector<Network> grads(count);
      std::vector<losses::LossBreakdown> parts(count);
      parallel_for(count, cfg.threads, [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        const auto& item = dataset[idx];
        const ProbMap pred = forward(item.features, result.params);
        const losses::SoftTarget* target = guided ? &pseudo[idx] : nullptr;
        const auto loss = losses::total_loss(pred, item.target, target, cfg.beta, cfg.lambda);
        parts[b] = loss.breakdown;
        grads[b] = backward(item.features, result.params, loss.grad);
      });
      Network total = result.params.weights.zeros_like();
      for (std::size_t b = 0; b < count; ++b) {
        accumulate(total, grads[b]);
        sum_bce += parts[b].l_bce;
        sum_dice += parts[b].l_dice;
        sum_dg += parts[b].l_dg;
        sum_sup += parts[b].l_sup;
        sum_total += parts[b].l_total;
      }
      if (count > 1) scale(total, 1.0 / static_cast<double>(count));
      opt.step(result.params.weights, total, log.lr);
      result.params.grads = std::move(total);
    }

    const double inv = 1.0 / static_cast<double>(n);
    log.l_bce = sum_bce * inv;
    log.l_dice = sum_dice * inv;
    log.l_sup = sum_sup * inv;
    log.l_total = sum_total * inv;
    if (guided) log.l_dg = sum_dg * inv;
    if (!held_out.empty()) log.eval = evaluate(result.params, held_out, cfg.eval_radius, cfg.threads).aggregate;
    result.log.push_back(std::move(log));
  }
  return result;
}

}  // namespace crackguide::model
