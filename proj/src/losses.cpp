#include "crackguide/losses.hpp"

#include <algorithm>
#include <cmath>

namespace crackguide::losses {

namespace {

template <typename T>
void require_same_shape(const ProbMap& pred, const Grid<T>& target, const char* what) {
  if (!pred.same_shape(target)) throw ValidationError(std::string(what) + ": shape mismatch");
}

template <typename T>
LossValue dice_impl(const ProbMap& pred, const Grid<T>& target) {
  require_same_shape(pred, target, "dice_loss");
  double inter = 0.0, sum_x = 0.0, sum_y = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double y = static_cast<double>(target[i]);
    inter += pred[i] * y;
    sum_x += pred[i];
    sum_y += y;
  }
  const double num = 2.0 * inter + kDiceEps;
  const double den = sum_x + sum_y + kDiceEps;
  LossValue out{1.0 - num / den, ProbMap(pred.height(), pred.width())};
  // d/dx_i of -(num/den) = -(2 y_i den - num) / den²
  const double inv_den2 = 1.0 / (den * den);
  for (std::size_t i = 0; i < pred.size(); ++i)
    out.grad[i] = -(2.0 * static_cast<double>(target[i]) * den - num) * inv_den2;
  return out;
}

template <typename T>
LossResult total_impl(const ProbMap& pred, const MaskGrid& noisy, const Grid<T>* pseudo, double beta, double lambda) {
  validate_beta(beta);
  validate_lambda(lambda);
  if (pseudo && !pred.same_shape(*pseudo)) throw ValidationError("total_loss: pseudo target shape mismatch");
  if (!pred.same_shape(noisy)) throw ValidationError("total_loss: annotation shape mismatch");

  const LossValue bce = bce_loss(pred, noisy);
  const LossValue dice = dice_impl(pred, noisy);
  LossResult out;
  out.breakdown.l_bce = bce.value;
  out.breakdown.l_dice = dice.value;
  out.breakdown.l_sup = bce.value + beta * dice.value;
  out.grad = ProbMap(pred.height(), pred.width());
  for (std::size_t i = 0; i < pred.size(); ++i) out.grad[i] = bce.grad[i] + beta * dice.grad[i];

  if (pseudo) {
    const LossValue dg = dice_impl(pred, *pseudo);
    out.breakdown.l_dg = dg.value;
    out.breakdown.l_total = out.breakdown.l_sup + lambda * dg.value;
    // Skipped at λ = 0 so the gradient stays bit-identical to the supervised one.
    if (lambda != 0.0)
      for (std::size_t i = 0; i < pred.size(); ++i) out.grad[i] += lambda * dg.grad[i];
  } else {
    out.breakdown.l_dg = 0.0;
    out.breakdown.l_total = out.breakdown.l_sup;
  }
  return out;
}

}  // namespace

void validate_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("beta must lie in (0,1)");
}

void validate_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be finite and >= 0");
}

LossValue dice_loss(const ProbMap& pred, const MaskGrid& target) { return dice_impl(pred, target); }
LossValue dice_loss(const ProbMap& pred, const SoftTarget& target) { return dice_impl(pred, target); }

LossValue bce_loss(const ProbMap& pred, const MaskGrid& target) {
  require_same_shape(pred, target, "bce_loss");
  const double n = static_cast<double>(pred.size());
  LossValue out{0.0, ProbMap(pred.height(), pred.width(), 0.0)};
  if (pred.empty()) return out;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = pred[i];
    const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
    const bool inside = raw > kBceClamp && raw < 1.0 - kBceClamp;
    if (target[i]) {
      sum -= std::log(p);
      if (inside) out.grad[i] = -1.0 / (p * n);
    } else {
      sum -= std::log1p(-p);
      if (inside) out.grad[i] = 1.0 / ((1.0 - p) * n);
    }
  }
  out.value = sum / n;
  return out;
}

double supervised_loss(const ProbMap& pred, const MaskGrid& noisy_target, double beta) {
  validate_beta(beta);
  return bce_loss(pred, noisy_target).value + beta * dice_loss(pred, noisy_target).value;
}

LossResult total_loss(const ProbMap& pred, const MaskGrid& noisy, const SoftTarget* pseudo, double beta,
                      double lambda) {
  return total_impl(pred, noisy, pseudo, beta, lambda);
}

LossResult total_loss(const ProbMap& pred, const MaskGrid& noisy, const MaskGrid* pseudo, double beta, double lambda) {
  return total_impl(pred, noisy, pseudo, beta, lambda);
}

}  // namespace crackguide::losses
