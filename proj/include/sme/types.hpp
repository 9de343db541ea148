#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace sme {

enum class Label { Forgotten = 0, Remembered = 1 };

enum class Segment { PreStimulus, OnGoing };

// Stimulus-onset marker with the recognition-phase confidence judgement.
struct Event {
  std::int64_t sample = 0;
  int confidence = 0;  // 1 (certain new) .. 4 (certain old)
  bool was_old = false;
};

// Multichannel continuous signal, channels x time, values in microvolts.
struct ContinuousRecording {
  Eigen::MatrixXd samples;
  double fs = 0.0;
  std::vector<std::string> channel_names;
  std::vector<Event> events;

  Eigen::Index n_channels() const { return samples.rows(); }
  Eigen::Index n_samples() const { return samples.cols(); }
};

struct BandDef {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

// Event-locked trials; each trial is a channels x samples matrix.
struct EpochSet {
  std::vector<Eigen::MatrixXd> trials;
  double fs = 0.0;
  std::vector<Label> labels;
  Segment segment = Segment::OnGoing;
  std::vector<std::string> channel_names;
  std::string provenance;  // JSON text; generator metadata, ground truth

  std::size_t n_trials() const { return trials.size(); }
  Eigen::Index n_channels() const {
    return trials.empty() ? 0 : trials.front().rows();
  }
  Eigen::Index n_samples() const {
    return trials.empty() ? 0 : trials.front().cols();
  }
  std::size_t count(Label l) const {
    std::size_t n = 0;
    for (Label x : labels) n += (x == l);
    return n;
  }
};

const char* to_string(Label l);
const char* to_string(Segment s);
Label label_from_string(const std::string& s);
Segment segment_from_string(const std::string& s);

// The four analysis bands in declared order: theta, alpha, beta, gamma.
std::vector<BandDef> default_bands();

}  // namespace sme
