#ifndef TILT_LOSSES_HPP
#define TILT_LOSSES_HPP

#include <span>
#include <string>
#include <vector>

#include "tilt/dataset.hpp"
#include "tilt/tilt_core.hpp"

namespace tilt {

// Per-sample loss families with exact gradients in the parameters.
//
// Margins are theta^T x with no implicit intercept; append a constant
// feature if one is wanted.  Class labels live in {0,1} and are mapped to
// +-1 inside the logistic loss.  Subgradient convention at kinks: 0.
struct LossFamily {
  enum class Kind { squared, absolute, huber, logistic, point };

  Kind kind{Kind::squared};
  double delta{1.0};  // huber threshold

  // "squared|absolute|huber:<delta>|logistic|point"
  static LossFamily parse(const std::string& name);
  std::string name() const;

  bool is_linear() const { return kind != Kind::point; }
  bool is_classification() const { return kind == Kind::logistic; }
};

double loss_value(const LossFamily& fam, std::span<const double> theta,
                  std::span<const double> x, double y);
void loss_grad(const LossFamily& fam, std::span<const double> theta, std::span<const double> x,
               double y, std::span<double> out);

std::vector<double> batch_losses(const LossFamily& fam, std::span<const double> theta,
                                 const Dataset& ds);
RowMajor batch_grads(const LossFamily& fam, std::span<const double> theta, const Dataset& ds);

// Loss and d(loss)/d(margin) as functions of the margin, for linear
// families; the solvers compute each margin once and fold the derivative
// coefficient into a single weighted row sum.
double margin_loss(const LossFamily& fam, double margin, double y);
double margin_derivative(const LossFamily& fam, double margin, double y);

}  // namespace tilt

#endif
