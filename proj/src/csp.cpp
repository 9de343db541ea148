#include "sme/csp.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "sme/errors.hpp"
#include "sme/sigproc.hpp"

namespace sme {

namespace {

// Flip each row so its largest-magnitude coefficient is positive.
void normalize_signs(Eigen::MatrixXd& filters) {
  for (Eigen::Index r = 0; r < filters.rows(); ++r) {
    Eigen::Index idx = 0;
    filters.row(r).cwiseAbs().maxCoeff(&idx);
    if (filters(r, idx) < 0) filters.row(r) = -filters.row(r);
  }
}

double rayleigh(const Eigen::RowVectorXd& w, const Eigen::MatrixXd& a,
                const Eigen::MatrixXd& b) {
  return (w * a).dot(w) / (w * b).dot(w);
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> class_covariances(const EpochSet& epochs) {
  const Eigen::Index c = epochs.n_channels();
  if (epochs.n_samples() < c) {
    throw std::invalid_argument("trials need at least as many samples as channels");
  }
  if (epochs.count(Label::Remembered) < 2 || epochs.count(Label::Forgotten) < 2) {
    throw MissingCondition("covariance estimation needs >= 2 trials per condition");
  }
  Eigen::MatrixXd sum_r = Eigen::MatrixXd::Zero(c, c);
  Eigen::MatrixXd sum_f = Eigen::MatrixXd::Zero(c, c);
  double n_r = 0, n_f = 0;
  for (std::size_t t = 0; t < epochs.n_trials(); ++t) {
    Eigen::MatrixXd cov = epochs.trials[t] * epochs.trials[t].transpose();
    const double tr = cov.trace();
    if (!(tr > 0.0)) {
      throw DegenerateTrial("trial " + std::to_string(t) + " carries no energy");
    }
    cov /= tr;
    if (epochs.labels[t] == Label::Remembered) {
      sum_r += cov;
      n_r += 1;
    } else {
      sum_f += cov;
      n_f += 1;
    }
  }
  sum_r /= n_r;
  sum_f /= n_f;
  sum_r = ((sum_r + sum_r.transpose()) / 2).eval();
  sum_f = ((sum_f + sum_f.transpose()) / 2).eval();
  return {sum_r, sum_f};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> effective_covariances(
    const Eigen::MatrixXd& cov_r, const Eigen::MatrixXd& cov_f,
    const CspOptions& opts) {
  const Eigen::Index c = cov_r.rows();
  const double trace_c = (cov_r + cov_f).trace();
  const double ridge = opts.ridge_scale * trace_c / static_cast<double>(c);
  const double iso = opts.shrinkage * trace_c / (2.0 * static_cast<double>(c));
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(c, c);
  Eigen::MatrixXd er = (1.0 - opts.shrinkage) * cov_r + (iso + ridge / 2) * eye;
  Eigen::MatrixXd ef = (1.0 - opts.shrinkage) * cov_f + (iso + ridge / 2) * eye;
  return {er, ef};
}

CspModel csp_fit(const Eigen::MatrixXd& cov_r, const Eigen::MatrixXd& cov_f, int m,
                 const CspOptions& opts) {
  const Eigen::Index c = cov_r.rows();
  if (cov_r.cols() != c || cov_f.rows() != c || cov_f.cols() != c) {
    throw ShapeError("class covariances must be square and equal-sized");
  }
  if (m < 1 || 2 * m > c) {
    throw std::invalid_argument("need 1 <= m and 2m <= channels");
  }

  const auto [er, ef] = effective_covariances(cov_r, cov_f, opts);
  const Eigen::MatrixXd composite = er + ef;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> comp_eig(composite);
  const Eigen::VectorXd d = comp_eig.eigenvalues();
  if (d.minCoeff() <= 1e-12 * std::max(d.maxCoeff(), 1e-300)) {
    throw SingularCovariance(
        "composite covariance is singular; increase ridge or shrinkage");
  }
  const Eigen::MatrixXd whitener =
      d.cwiseSqrt().cwiseInverse().asDiagonal() * comp_eig.eigenvectors().transpose();

  Eigen::MatrixXd s = whitener * er * whitener.transpose();
  s = ((s + s.transpose()) / 2).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s_eig(s);  // ascending
  const Eigen::MatrixXd all_filters = s_eig.eigenvectors().transpose() * whitener;

  CspModel model;
  model.m = m;
  model.reg = opts;
  model.filters.resize(2 * m, c);
  for (int j = 0; j < m; ++j) {
    model.filters.row(j) = all_filters.row(c - 1 - j);          // largest first
    model.filters.row(m + j) = all_filters.row(j);              // smallest next
  }
  normalize_signs(model.filters);

  model.eigvals.resize(2 * m);
  const Eigen::MatrixXd raw_composite = cov_r + cov_f;
  for (int j = 0; j < 2 * m; ++j) {
    model.eigvals(j) = rayleigh(model.filters.row(j), cov_r, raw_composite);
  }
  return model;
}

Eigen::MatrixXd csp_features(const CspModel& model, const EpochSet& epochs) {
  if (model.filters.cols() != epochs.n_channels()) {
    throw ShapeError("channel count does not match the fitted model");
  }
  constexpr double eps = 1e-12;
  const Eigen::Index k = model.filters.rows();
  Eigen::MatrixXd features(epochs.n_trials(), k);
  for (std::size_t t = 0; t < epochs.n_trials(); ++t) {
    const Eigen::MatrixXd projected = model.filters * epochs.trials[t];
    Eigen::VectorXd v(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      v(j) = projected.row(j).squaredNorm() /
             static_cast<double>(projected.cols());
    }
    const double denom = v.sum() + static_cast<double>(k) * eps;
    for (Eigen::Index j = 0; j < k; ++j) {
      features(static_cast<Eigen::Index>(t), j) = std::log((v(j) + eps) / denom);
    }
  }
  return features;
}

FbcspModel fbcsp_fit(const EpochSet& epochs, const std::vector<BandDef>& bands, int m,
                     const CspOptions& opts) {
  if (epochs.fs != 250.0) {
    throw std::invalid_argument("filter-bank fitting expects 250 Hz epochs");
  }
  if (bands.empty()) throw std::invalid_argument("band list is empty");
  FbcspModel model;
  model.bands = bands;
  model.m = m;
  for (const BandDef& band : bands) {
    const EpochSet filtered = band_filter_epochs(epochs, band);
    const auto [cov_r, cov_f] = class_covariances(filtered);
    CspModel sub = csp_fit(cov_r, cov_f, m, opts);
    sub.band = band;
    model.per_band.push_back(std::move(sub));
  }
  model.feature_dim = static_cast<int>(bands.size()) * 2 * m;
  return model;
}

Eigen::MatrixXd fbcsp_features(const FbcspModel& model, const EpochSet& epochs) {
  Eigen::MatrixXd features(epochs.n_trials(), model.feature_dim);
  Eigen::Index col = 0;
  for (std::size_t b = 0; b < model.per_band.size(); ++b) {
    const EpochSet filtered = band_filter_epochs(epochs, model.bands[b]);
    const Eigen::MatrixXd block = csp_features(model.per_band[b], filtered);
    features.middleCols(col, block.cols()) = block;
    col += block.cols();
  }
  return features;
}

}  // namespace sme
