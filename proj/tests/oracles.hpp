// Independent reference computations used to freeze expected test values.
// Everything here is derived from closed forms or brute force, never from
// the library code under test.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline double prewarp(double f, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * f / fs);
}

// Closed-form magnitude of the order-n analog Butterworth band-pass
// prototype evaluated under the bilinear frequency map.
inline double butter_bandpass_mag(double f, double lo, double hi, int order, double fs) {
  const double w1 = prewarp(lo, fs);
  const double w2 = prewarp(hi, fs);
  const double w0sq = w1 * w2;
  const double bw = w2 - w1;
  const double om = prewarp(f, fs);
  if (om == 0.0) return 0.0;
  const double r = (om * om - w0sq) / (bw * om);
  return 1.0 / std::sqrt(1.0 + std::pow(r * r, order));
}

inline double butter_lowpass_mag(double f, double fc, int order, double fs) {
  const double r = prewarp(f, fs) / prewarp(fc, fs);
  return 1.0 / std::sqrt(1.0 + std::pow(r * r, order));
}

// Least-squares amplitude of a sinusoid of known frequency over the
// index range [from, to).
inline double fit_amplitude(const Eigen::VectorXd& x, double f_hz, double fs,
                            Eigen::Index from, Eigen::Index to) {
  Eigen::MatrixXd basis(to - from, 2);
  Eigen::VectorXd seg(to - from);
  for (Eigen::Index i = from; i < to; ++i) {
    const double phase = 2.0 * std::numbers::pi * f_hz * static_cast<double>(i) / fs;
    basis(i - from, 0) = std::sin(phase);
    basis(i - from, 1) = std::cos(phase);
    seg(i - from) = x(i);
  }
  const Eigen::Vector2d coeff =
      (basis.transpose() * basis).ldlt().solve(basis.transpose() * seg);
  return coeff.norm();
}

inline Eigen::VectorXd sinusoid(double f_hz, double fs, Eigen::Index n,
                                double amplitude = 1.0, double phase = 0.0) {
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = amplitude *
           std::sin(2.0 * std::numbers::pi * f_hz * static_cast<double>(i) / fs + phase);
  }
  return x;
}

}  // namespace oracle
