#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <vector>

#include "sme/types.hpp"

namespace sme {

struct CspOptions {
  // Ridge added to the composite covariance, scaled by trace/channels.
  double ridge_scale = 1e-6;
  // Shrinkage toward the scaled identity, in [0, 1].
  double shrinkage = 0.0;
};

// Spatial filters from the two-class generalized eigenproblem. Rows of
// `filters` are the m most-remembered-biased filters (eigenvalue
// descending) followed by the m most-forgotten-biased ones (ascending).
struct CspModel {
  Eigen::MatrixXd filters;  // 2m x channels
  Eigen::VectorXd eigvals;  // variance ratio w.r.t. the raw covariances
  int m = 0;
  std::optional<BandDef> band;  // nullopt = broadband
  CspOptions reg;
};

struct FbcspModel {
  std::vector<BandDef> bands;
  std::vector<CspModel> per_band;  // one model per band, same order
  int m = 0;
  int feature_dim = 0;  // bands x 2m
};

// Trace-normalized per-trial covariances X X^T / tr(X X^T), averaged
// within class. Returns (remembered, forgotten).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> class_covariances(const EpochSet& epochs);

// The regularized covariance pair csp_fit actually diagonalizes: the
// shrinkage/ridge mass is split evenly between the classes so their sum
// matches the regularized composite.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> effective_covariances(
    const Eigen::MatrixXd& cov_r, const Eigen::MatrixXd& cov_f,
    const CspOptions& opts);

// Whitens the (regularized) composite covariance and eigendecomposes the
// whitened remembered covariance; keeps the m top and m bottom
// eigenvectors. Reported eigenvalues are Rayleigh quotients w.r.t. the
// raw inputs, so eigval + its forgotten counterpart is exactly 1.
CspModel csp_fit(const Eigen::MatrixXd& cov_r, const Eigen::MatrixXd& cov_f, int m,
                 const CspOptions& opts = {});

// Log-normalized variance of each trial projected through the filters:
// feature(i,j) = log((v_ij + eps) / (sum_k v_ik + 2m eps)).
Eigen::MatrixXd csp_features(const CspModel& model, const EpochSet& epochs);

// Band-pass (order 5, via sigproc) then csp_fit, one model per band.
FbcspModel fbcsp_fit(const EpochSet& epochs, const std::vector<BandDef>& bands, int m,
                     const CspOptions& opts = {});

// Per-band features concatenated in declared band order.
Eigen::MatrixXd fbcsp_features(const FbcspModel& model, const EpochSet& epochs);

}  // namespace sme
