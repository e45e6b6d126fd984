#pragma once

#include <optional>

#include "crackguide/grid.hpp"

namespace crackguide::losses {

inline constexpr double kDiceEps = 1e-7;
inline constexpr double kBceClamp = 1e-7;

/// Scalar loss and its gradient with respect to every pixel of the probability map.
struct LossValue {
  double value = 0.0;
  ProbMap grad;
};

struct LossBreakdown {
  double l_bce = 0.0;
  double l_dice = 0.0;
  double l_dg = 0.0;
  double l_sup = 0.0;
  double l_total = 0.0;
};

struct LossResult {
  LossBreakdown breakdown;
  ProbMap grad;  // d l_total / d pred
};

/// Guidance target: a hard MAP label, or the soft crack posterior.
using SoftTarget = Grid<double>;

/// 1 - (2 Σ X·Y + ε) / (Σ X + Σ Y + ε).
LossValue dice_loss(const ProbMap& pred, const MaskGrid& target);
LossValue dice_loss(const ProbMap& pred, const SoftTarget& target);

/// Mean over pixels of -[q log p + (1-q) log(1-p)], p clamped to [1e-7, 1-1e-7].
LossValue bce_loss(const ProbMap& pred, const MaskGrid& target);

/// L_Bce + β·L_Dice against the annotation; β must lie in (0,1).
double supervised_loss(const ProbMap& pred, const MaskGrid& noisy_target, double beta);

/// L_total = L_Sup + λ·L_Dg. With no pseudo target, l_dg = 0 and l_total = l_sup.
LossResult total_loss(const ProbMap& pred, const MaskGrid& noisy_target, const SoftTarget* pseudo_target, double beta,
                      double lambda);
LossResult total_loss(const ProbMap& pred, const MaskGrid& noisy_target, const MaskGrid* pseudo_target, double beta,
                      double lambda);

void validate_beta(double beta);
void validate_lambda(double lambda);

}  // namespace crackguide::losses
