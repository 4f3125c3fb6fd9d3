// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TOLD_TYPES_H_
#define TOLD_TYPES_H_

#include <string>
#include <vector>

#include "told/common.h"

namespace told {

// T x S binary speaker-activity labels, row-major. Used both for ground
// truth and for decoded diarization output.
struct ActivityMatrix {
  int frames = 0;
  int speakers = 0;
  std::vector<uint8_t> bits;  // frames * speakers, row-major
  double frame_period = 0.0;
  std::vector<std::string> speaker_ids;  // optional, size speakers when set

  ActivityMatrix() = default;
  ActivityMatrix(int t, int s)
      : frames(t), speakers(s), bits(static_cast<size_t>(t) * s, 0) {}

  uint8_t at(int t, int s) const {
    return bits[static_cast<size_t>(t) * speakers + s];
  }
  void set(int t, int s, uint8_t v) {
    bits[static_cast<size_t>(t) * speakers + s] = v;
  }

  int popcount_row(int t) const {
    int n = 0;
    for (int s = 0; s < speakers; ++s) n += at(t, s);
    return n;
  }

  bool any_activity(int s) const {
    for (int t = 0; t < frames; ++t)
      if (at(t, s)) return true;
    return false;
  }

  Mat to_mat() const {
    Mat m(frames, speakers);
    for (int t = 0; t < frames; ++t)
      for (int s = 0; s < speakers; ++s) m(t, s) = at(t, s);
    return m;
  }

  static ActivityMatrix from_mat(const Mat& m, double threshold = 0.5) {
    ActivityMatrix a(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
    for (int t = 0; t < a.frames; ++t)
      for (int s = 0; s < a.speakers; ++s)
        a.set(t, s, m(t, s) >= threshold ? 1 : 0);
    return a;
  }
};

// Binary sidecar container for frame-level labels.
void write_labels(const std::string& path, const ActivityMatrix& labels);
ActivityMatrix read_labels(const std::string& path);

}  // namespace told

#endif  // TOLD_TYPES_H_
