#include "sme/lda.hpp"

#include <Eigen/Dense>

#include "sme/errors.hpp"

namespace sme {

LdaModel lda_fit(const Eigen::MatrixXd& x, const std::vector<Label>& y, double gamma) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (static_cast<Eigen::Index>(y.size()) != n) {
    throw ShapeError("label count does not match sample count");
  }
  if (n <= 2) throw std::invalid_argument("need more than two samples");
  if (gamma < 0.0 || gamma > 1.0) {
    throw std::invalid_argument("shrinkage must lie in [0, 1]");
  }

  Eigen::VectorXd mean_r = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd mean_f = Eigen::VectorXd::Zero(d);
  double n_r = 0, n_f = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] == Label::Remembered) {
      mean_r += x.row(i).transpose();
      n_r += 1;
    } else {
      mean_f += x.row(i).transpose();
      n_f += 1;
    }
  }
  if (n_r == 0 || n_f == 0) {
    throw MissingCondition("both conditions required to fit a discriminant");
  }
  mean_r /= n_r;
  mean_f /= n_f;

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd& mu = y[i] == Label::Remembered ? mean_r : mean_f;
    const Eigen::VectorXd dev = x.row(i).transpose() - mu;
    scatter += dev * dev.transpose();
  }
  const Eigen::MatrixXd pooled = scatter / static_cast<double>(n - 2);

  Eigen::MatrixXd shrunk =
      (1.0 - gamma) * pooled +
      gamma * (pooled.trace() / static_cast<double>(d)) *
          Eigen::MatrixXd::Identity(d, d);
  shrunk = ((shrunk + shrunk.transpose()) / 2).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shrunk);
  const Eigen::VectorXd evals = eig.eigenvalues();
  if (evals.minCoeff() <= 1e-12 * std::max(evals.maxCoeff(), 1e-300)) {
    throw SingularCovariance(
        "pooled covariance is singular; use shrinkage gamma > 0");
  }

  LdaModel model;
  model.gamma = gamma;
  model.mean_remembered = mean_r;
  model.mean_forgotten = mean_f;
  model.pooled_cov = pooled;
  model.w = eig.eigenvectors() *
            evals.cwiseInverse().asDiagonal() *
            (eig.eigenvectors().transpose() * (mean_r - mean_f));
  model.b = -model.w.dot(mean_r + mean_f) / 2.0;
  return model;
}

Eigen::VectorXd lda_scores(const LdaModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.w.size()) {
    throw ShapeError("feature dimension does not match the fitted model");
  }
  return (x * model.w).array() + model.b;
}

std::vector<Label> lda_predict(const LdaModel& model, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd scores = lda_scores(model, x);
  std::vector<Label> labels(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    labels[i] = scores(i) > 0.0 ? Label::Remembered : Label::Forgotten;
  }
  return labels;
}

}  // namespace sme
