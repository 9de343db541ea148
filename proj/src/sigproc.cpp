#include "sme/sigproc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "sme/errors.hpp"

namespace sme {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Analog lowpass prototype poles, |p| = 1, left half plane.
std::vector<cd> prototype_poles(int order) {
  std::vector<cd> poles;
  poles.reserve(order);
  for (int k = 0; k < order; ++k) {
    const double phi = kPi * (2.0 * k + 1.0 + order) / (2.0 * order);
    poles.emplace_back(std::cos(phi), std::sin(phi));
  }
  return poles;
}

cd bilinear(cd s, double k) { return (k + s) / (k - s); }

struct PolePair {
  cd first, second;
  double radius() const { return std::max(std::abs(first), std::abs(second)); }
};

// Groups digital poles into conjugate (or real) pairs plus an optional
// lone real pole, ordered so the highest-Q pair comes last.
void pair_poles(std::vector<cd> poles, std::vector<PolePair>& pairs, cd& lone,
                bool& has_lone) {
  constexpr double imag_tol = 1e-10;
  std::vector<cd> upper, reals;
  for (const cd& p : poles) {
    if (p.imag() > imag_tol) {
      upper.push_back(p);
    } else if (p.imag() >= -imag_tol) {
      reals.emplace_back(p.real(), 0.0);
    }
  }
  std::sort(upper.begin(), upper.end(), [](const cd& a, const cd& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  std::sort(reals.begin(), reals.end(),
            [](const cd& a, const cd& b) { return a.real() < b.real(); });

  pairs.clear();
  for (const cd& p : upper) pairs.push_back({p, std::conj(p)});
  has_lone = (reals.size() % 2) != 0;
  if (has_lone) {
    lone = reals.back();
    reals.pop_back();
  }
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    pairs.push_back({reals[i], reals[i + 1]});
  }
  std::sort(pairs.begin(), pairs.end(), [](const PolePair& a, const PolePair& b) {
    if (a.radius() != b.radius()) return a.radius() < b.radius();
    if (a.first.real() != b.first.real()) return a.first.real() < b.first.real();
    return a.first.imag() < b.first.imag();
  });
}

double section_dc_gain(const Biquad& s) {
  const double num = s.b0 + s.b1 + s.b2;
  if (num == 0.0) return 0.0;
  return num / (1.0 + s.a1 + s.a2);
}

double max_pole_radius(const std::vector<Biquad>& sections) {
  double r = 0.0;
  for (const Biquad& s : sections) {
    const double disc = s.a1 * s.a1 - 4.0 * s.a2;
    if (disc < 0.0) {
      r = std::max(r, std::sqrt(s.a2));
    } else {
      const double q = std::sqrt(disc);
      r = std::max({r, std::abs((-s.a1 + q) / 2.0), std::abs((-s.a1 - q) / 2.0)});
    }
  }
  return r;
}

// Sample the odd-reflection extension of x at virtual index v, unfolding
// repeatedly so the extension can be longer than the signal.
double odd_extension(const Eigen::VectorXd& x, Eigen::Index v) {
  const Eigen::Index n = x.size();
  double sign = 1.0, offset = 0.0;
  while (v < 0 || v >= n) {
    if (v < 0) {
      offset += sign * 2.0 * x[0];
      sign = -sign;
      v = -v;
    } else {
      offset += sign * 2.0 * x[n - 1];
      sign = -sign;
      v = 2 * (n - 1) - v;
    }
  }
  return sign * x[v] + offset;
}

// One forward pass of the cascade with per-section steady-state
// initialization scaled to the first sample.
void sosfilt_steady(const std::vector<Biquad>& sections, Eigen::VectorXd& x) {
  double x0 = x.size() > 0 ? x[0] : 0.0;
  for (const Biquad& s : sections) {
    const double k = section_dc_gain(s);
    double z1 = (k - s.b0) * x0;
    double z2 = (s.b2 - s.a2 * k) * x0;
    for (Eigen::Index n = 0; n < x.size(); ++n) {
      const double xn = x[n];
      const double yn = s.b0 * xn + z1;
      z1 = s.b1 * xn + z2 - s.a1 * yn;
      z2 = s.b2 * xn - s.a2 * yn;
      x[n] = yn;
    }
    x0 *= k;
  }
}

}  // namespace

double BiquadCascade::magnitude(double f_hz) const {
  const cd z = std::polar(1.0, -2.0 * kPi * f_hz / fs);
  cd h(1.0, 0.0);
  for (const Biquad& s : sections) {
    h *= (s.b0 + z * (s.b1 + z * s.b2)) / (1.0 + z * (s.a1 + z * s.a2));
  }
  return std::abs(h);
}

bool BiquadCascade::stable() const {
  for (const Biquad& s : sections) {
    const double disc = s.a1 * s.a1 - 4.0 * s.a2;
    if (disc < 0.0) {
      if (s.a2 >= 1.0) return false;
    } else {
      const double r = std::sqrt(disc);
      if (std::abs((-s.a1 + r) / 2.0) >= 1.0) return false;
      if (std::abs((-s.a1 - r) / 2.0) >= 1.0) return false;
    }
  }
  return true;
}

BiquadCascade design_butterworth(FilterKind kind, const std::vector<double>& edges,
                                 int order, double fs) {
  if (order < 1) throw DesignError("filter order must be >= 1");
  if (fs <= 0.0) throw DesignError("sampling rate must be positive");
  const std::size_t need = kind == FilterKind::BandPass ? 2 : 1;
  if (edges.size() != need) {
    throw DesignError("bandpass needs two edges, lowpass one");
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i] <= 0.0) throw DesignError("band edge must be positive");
    if (edges[i] >= fs / 2.0) throw DesignError("band edge at or above Nyquist");
    if (i > 0 && edges[i] <= edges[i - 1]) {
      throw DesignError("band edges must be strictly increasing");
    }
  }

  const double k_bilinear = 2.0 * fs;
  const auto prewarp = [&](double f) { return k_bilinear * std::tan(kPi * f / fs); };

  std::vector<cd> analog_poles;
  double ref_freq = 0.0;  // digital Hz where |H| is pinned to 1
  if (kind == FilterKind::LowPass) {
    const double wc = prewarp(edges[0]);
    for (const cd& p : prototype_poles(order)) analog_poles.push_back(p * wc);
    ref_freq = 0.0;
  } else {
    const double w1 = prewarp(edges[0]);
    const double w2 = prewarp(edges[1]);
    const double bw = w2 - w1;
    const double w0sq = w1 * w2;
    for (const cd& p : prototype_poles(order)) {
      const cd half = p * (bw / 2.0);
      const cd root = std::sqrt(half * half - w0sq);
      analog_poles.push_back(half + root);
      analog_poles.push_back(half - root);
    }
    ref_freq = fs / kPi * std::atan(std::sqrt(w0sq) / k_bilinear);
  }

  std::vector<cd> digital_poles;
  digital_poles.reserve(analog_poles.size());
  for (const cd& s : analog_poles) digital_poles.push_back(bilinear(s, k_bilinear));

  std::vector<PolePair> pairs;
  cd lone;
  bool has_lone = false;
  pair_poles(std::move(digital_poles), pairs, lone, has_lone);

  BiquadCascade cascade;
  cascade.kind = kind;
  cascade.order = order;
  cascade.edges = edges;
  cascade.fs = fs;
  for (const PolePair& pp : pairs) {
    Biquad s;
    s.a1 = -(pp.first + pp.second).real();
    s.a2 = (pp.first * pp.second).real();
    if (kind == FilterKind::BandPass) {
      s.b0 = 1.0;
      s.b1 = 0.0;
      s.b2 = -1.0;  // one zero at z=1, one at z=-1
    } else {
      s.b0 = 1.0;
      s.b1 = 2.0;
      s.b2 = 1.0;  // both zeros at z=-1
    }
    cascade.sections.push_back(s);
  }
  if (has_lone) {
    Biquad s;
    s.a1 = -lone.real();
    s.a2 = 0.0;
    s.b0 = 1.0;
    s.b1 = kind == FilterKind::LowPass ? 1.0 : -1.0;
    s.b2 = 0.0;
    cascade.sections.push_back(s);
  }

  // Pin unit gain at the reference frequency, spread across sections.
  const double raw = cascade.magnitude(ref_freq);
  if (!(raw > 0.0) || !std::isfinite(raw)) {
    throw DesignError("degenerate response at reference frequency");
  }
  const double g =
      std::pow(1.0 / raw, 1.0 / static_cast<double>(cascade.sections.size()));
  for (Biquad& s : cascade.sections) {
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
  }

  if (!cascade.stable()) throw DesignError("designed cascade is unstable");
  for (double e : edges) {
    if (std::abs(cascade.magnitude(e) - std::numbers::sqrt2 / 2.0) > 1e-3) {
      throw DesignError("band-edge gain deviates from -3 dB");
    }
  }
  return cascade;
}

Eigen::VectorXd filtfilt(const BiquadCascade& filter, const Eigen::VectorXd& signal) {
  const Eigen::Index n = signal.size();
  const Eigen::Index min_len = 3 * filter.state_size();
  if (n <= min_len) {
    throw SignalTooShort("signal length " + std::to_string(n) +
                         " requires more than " + std::to_string(min_len) +
                         " samples");
  }

  // Pad until the slowest pole's transient has decayed to 1e-4, so the
  // kept region is free of start-up artifacts even for narrow bands.
  const double r = max_pole_radius(filter.sections);
  Eigen::Index pad = min_len;
  if (r > 0.0 && r < 1.0) {
    pad = std::max<Eigen::Index>(
        min_len, static_cast<Eigen::Index>(std::ceil(std::log(1e-4) / std::log(r))));
  }
  pad = std::min<Eigen::Index>(pad, 10000);

  const double mean = signal.mean();
  const Eigen::VectorXd centered = signal.array() - mean;

  Eigen::VectorXd ext(n + 2 * pad);
  ext.segment(pad, n) = centered;
  for (Eigen::Index i = 0; i < pad; ++i) {
    ext[pad - 1 - i] = odd_extension(centered, -(i + 1));
    ext[pad + n + i] = odd_extension(centered, n + i);
  }

  sosfilt_steady(filter.sections, ext);
  ext.reverseInPlace();
  sosfilt_steady(filter.sections, ext);
  ext.reverseInPlace();

  double dc = 1.0;
  for (const Biquad& s : filter.sections) dc *= section_dc_gain(s);
  return ext.segment(pad, n).array() + mean * dc * dc;
}

Eigen::MatrixXd filtfilt_rows(const BiquadCascade& filter, const Eigen::MatrixXd& signal) {
  Eigen::MatrixXd out(signal.rows(), signal.cols());
  for (Eigen::Index r = 0; r < signal.rows(); ++r) {
    out.row(r) = filtfilt(filter, signal.row(r).transpose()).transpose();
  }
  return out;
}

ContinuousRecording decimate(const ContinuousRecording& rec, int factor) {
  if (factor < 1) throw std::invalid_argument("decimation factor must be >= 1");
  if (factor == 1) return rec;
  if (std::fmod(rec.fs, static_cast<double>(factor)) != 0.0) {
    throw ResampleError("sampling rate " + std::to_string(rec.fs) +
                        " not divisible by factor " + std::to_string(factor));
  }
  const double fs_out = rec.fs / factor;
  const BiquadCascade aa =
      design_butterworth(FilterKind::LowPass, {0.4 * fs_out}, 8, rec.fs);
  const Eigen::MatrixXd filtered = filtfilt_rows(aa, rec.samples);

  ContinuousRecording out;
  out.fs = fs_out;
  out.channel_names = rec.channel_names;
  const Eigen::Index n_out = rec.n_samples() / factor;
  out.samples.resize(rec.n_channels(), n_out);
  for (Eigen::Index k = 0; k < n_out; ++k) {
    out.samples.col(k) = filtered.col(k * factor);
  }
  for (const Event& e : rec.events) {
    Event scaled = e;
    scaled.sample = e.sample / factor;
    if (scaled.sample < n_out) out.events.push_back(scaled);
  }
  return out;
}

EpochSet epoch(const ContinuousRecording& rec, Segment segment) {
  if (rec.fs != 250.0) {
    throw std::invalid_argument("epoching expects a 250 Hz recording");
  }
  constexpr Eigen::Index window = 250;

  EpochSet set;
  set.fs = rec.fs;
  set.segment = segment;
  set.channel_names = rec.channel_names;
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    const Event& e = rec.events[i];
    if (!e.was_old) continue;
    if (e.confidence < 1 || e.confidence > 4) {
      throw std::invalid_argument("event confidence outside 1..4");
    }
    const Eigen::Index start =
        segment == Segment::PreStimulus ? e.sample - window : e.sample;
    if (start < 0 || start + window > rec.n_samples()) {
      throw EpochOutOfBounds("event " + std::to_string(i) + " at sample " +
                             std::to_string(e.sample) +
                             " lacks a full window on the required side");
    }
    set.trials.push_back(rec.samples.middleCols(start, window));
    set.labels.push_back(e.confidence <= 2 ? Label::Forgotten : Label::Remembered);
  }
  return set;
}

Eigen::MatrixXd band_power(const EpochSet& epochs, const BandDef& band) {
  const BiquadCascade bp =
      design_butterworth(FilterKind::BandPass, {band.lo, band.hi}, 5, epochs.fs);
  const Eigen::Index c = epochs.n_channels();
  Eigen::MatrixXd power(epochs.n_trials(), c);
  for (std::size_t t = 0; t < epochs.n_trials(); ++t) {
    const Eigen::MatrixXd y = filtfilt_rows(bp, epochs.trials[t]);
    for (Eigen::Index ch = 0; ch < c; ++ch) {
      const auto row = y.row(ch).array();
      power(static_cast<Eigen::Index>(t), ch) = (row - row.mean()).square().mean();
    }
  }
  return power;
}

EpochSet band_filter_epochs(const EpochSet& epochs, const BandDef& band) {
  const BiquadCascade bp =
      design_butterworth(FilterKind::BandPass, {band.lo, band.hi}, 5, epochs.fs);
  EpochSet out = epochs;
  for (Eigen::MatrixXd& trial : out.trials) {
    trial = filtfilt_rows(bp, trial);
  }
  return out;
}

Eigen::MatrixXd spectra_difference(const EpochSet& epochs,
                                   const std::vector<BandDef>& bands) {
  if (epochs.count(Label::Remembered) == 0 || epochs.count(Label::Forgotten) == 0) {
    throw MissingCondition("spectra difference needs both conditions");
  }
  Eigen::MatrixXd diff(bands.size(), epochs.n_channels());
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const Eigen::MatrixXd power = band_power(epochs, bands[b]);
    Eigen::RowVectorXd mean_r = Eigen::RowVectorXd::Zero(epochs.n_channels());
    Eigen::RowVectorXd mean_f = Eigen::RowVectorXd::Zero(epochs.n_channels());
    double n_r = 0, n_f = 0;
    for (std::size_t t = 0; t < epochs.n_trials(); ++t) {
      if (epochs.labels[t] == Label::Remembered) {
        mean_r += power.row(static_cast<Eigen::Index>(t));
        n_r += 1;
      } else {
        mean_f += power.row(static_cast<Eigen::Index>(t));
        n_f += 1;
      }
    }
    diff.row(static_cast<Eigen::Index>(b)) = mean_r / n_r - mean_f / n_f;
  }
  return diff;
}

}  // namespace sme
