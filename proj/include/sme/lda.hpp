#pragma once

#include <Eigen/Core>
#include <vector>

#include "sme/types.hpp"

namespace sme {

// Two-class linear discriminant with shrinkage-regularized pooled
// covariance. Decision rule: Remembered iff w . x + b > 0 (tie Forgotten).
struct LdaModel {
  Eigen::VectorXd w;
  double b = 0.0;
  double gamma = 0.0;
  // Retained for audit.
  Eigen::VectorXd mean_remembered, mean_forgotten;
  Eigen::MatrixXd pooled_cov;
};

// Solves S_gamma w = mu_R - mu_F with
// S_gamma = (1-gamma) S + gamma (tr(S)/d) I and equal-prior bias
// b = -w . (mu_R + mu_F) / 2.
LdaModel lda_fit(const Eigen::MatrixXd& x, const std::vector<Label>& y, double gamma);

Eigen::VectorXd lda_scores(const LdaModel& model, const Eigen::MatrixXd& x);

std::vector<Label> lda_predict(const LdaModel& model, const Eigen::MatrixXd& x);

}  // namespace sme
