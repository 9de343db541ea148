#include "sme/types.hpp"

#include <stdexcept>

namespace sme {

const char* to_string(Label l) {
  return l == Label::Remembered ? "remembered" : "forgotten";
}

const char* to_string(Segment s) {
  return s == Segment::PreStimulus ? "pre" : "ongoing";
}

Label label_from_string(const std::string& s) {
  if (s == "remembered") return Label::Remembered;
  if (s == "forgotten") return Label::Forgotten;
  throw std::invalid_argument("unknown label: " + s);
}

Segment segment_from_string(const std::string& s) {
  if (s == "pre") return Segment::PreStimulus;
  if (s == "ongoing") return Segment::OnGoing;
  throw std::invalid_argument("unknown segment: " + s);
}

std::vector<BandDef> default_bands() {
  return {{"theta", 4.0, 8.0},
          {"alpha", 8.0, 12.0},
          {"beta", 12.0, 30.0},
          {"gamma", 30.0, 40.0}};
}

}  // namespace sme
