#pragma once

#include <Eigen/Core>
#include <vector>

#include "sme/types.hpp"

namespace sme {

enum class FilterKind { BandPass, LowPass };

// One direct-form-II-transposed second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 0, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

struct BiquadCascade {
  std::vector<Biquad> sections;
  FilterKind kind = FilterKind::LowPass;
  int order = 0;
  std::vector<double> edges;  // Hz, as designed
  double fs = 0.0;

  // Number of delay states across the cascade (2 per section).
  int state_size() const { return 2 * static_cast<int>(sections.size()); }

  // Cascade magnitude response at f Hz (single pass).
  double magnitude(double f_hz) const;

  // True when every pole lies strictly inside the unit circle.
  bool stable() const;
};

// Digital Butterworth via the analog prototype, frequency pre-warping and
// the bilinear transform, decomposed into stable second-order sections.
// A bandpass of order n yields 2n poles (n sections).
BiquadCascade design_butterworth(FilterKind kind, const std::vector<double>& edges,
                                 int order, double fs);

// Zero-phase forward-backward filtering with odd-reflection padding and
// steady-state section initialization. The pad length grows with the
// slowest pole's decay time (at least 3 x state_size samples); signals
// must be longer than 3 x state_size. Output length equals input length;
// effective magnitude is |H|^2.
Eigen::VectorXd filtfilt(const BiquadCascade& filter, const Eigen::VectorXd& signal);

// filtfilt applied to every row of a channels x time matrix.
Eigen::MatrixXd filtfilt_rows(const BiquadCascade& filter, const Eigen::MatrixXd& signal);

// Integer-factor downsampling with a zero-phase anti-alias lowpass
// (Butterworth order 8, cutoff 0.4 x target rate) applied first.
// Event indices are rescaled by floor division; output keeps
// floor(n/factor) samples.
ContinuousRecording decimate(const ContinuousRecording& rec, int factor);

// Cuts 1 s stimulus-locked trials at 250 Hz. PreStimulus takes [t-250, t),
// OnGoing takes [t, t+250). Only was_old events are kept; confidence 1-2
// labels Forgotten, 3-4 Remembered.
EpochSet epoch(const ContinuousRecording& rec, Segment segment);

// Variance of each trial/channel after zero-phase band-pass filtering
// (order 5). Entries are >= 0.
Eigen::MatrixXd band_power(const EpochSet& epochs, const BandDef& band);

// Mean band power of Remembered trials minus Forgotten trials,
// bands x channels.
Eigen::MatrixXd spectra_difference(const EpochSet& epochs,
                                   const std::vector<BandDef>& bands);

// Every trial zero-phase band-pass filtered (order 5); metadata copied.
EpochSet band_filter_epochs(const EpochSet& epochs, const BandDef& band);

}  // namespace sme
