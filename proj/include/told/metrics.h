// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Diarization error rate with a no-score collar around reference segment
// boundaries, plus RTTM interchange and frame/segment conversion.

#ifndef TOLD_METRICS_H_
#define TOLD_METRICS_H_

#include <string>
#include <vector>

#include "told/common.h"
#include "told/types.h"

namespace told {

struct Segment {
  std::string speaker;
  double onset = 0.0;
  double duration = 0.0;
};

struct SegmentList {
  std::string recording_id;
  std::vector<Segment> segments;
};

struct DERResult {
  double der = 0.0;
  double miss = 0.0;         // seconds
  double false_alarm = 0.0;  // seconds
  double confusion = 0.0;    // seconds
  double scored_speech = 0.0;  // seconds of reference speech after collar
};

// Frame-discretized scoring at `resolution` seconds. Frames whose centers lie
// within +-collar of any reference segment boundary are excluded. Overlap
// regions are scored. Hyp speakers are mapped to ref speakers by the optimal
// agreement assignment computed on the scored frames.
DERResult der(const SegmentList& ref, const SegmentList& hyp,
              double collar = 0.25, double resolution = 0.001);

// Contiguous active runs become segments. Gaps shorter than merge_gap are
// merged first, then runs shorter than min_dur are dropped.
SegmentList activity_to_segments(const ActivityMatrix& labels,
                                 double frame_period,
                                 const std::vector<std::string>& speaker_ids,
                                 double min_dur = 0.0, double merge_gap = 0.0,
                                 const std::string& recording_id = "rec");

// Inverse of activity_to_segments on its own output when min_dur and
// merge_gap are zero. speaker_ids fixes the column order.
ActivityMatrix segments_to_activity(const SegmentList& segs,
                                    double frame_period, int frames,
                                    const std::vector<std::string>& speaker_ids);

std::string rttm_emit(const SegmentList& segs);
// Accepts multiple recordings in one text; returns lists keyed by recording.
std::vector<SegmentList> rttm_parse(const std::string& text);

void write_rttm(const std::string& path, const SegmentList& segs);
std::vector<SegmentList> read_rttm(const std::string& path);

// Line-delimited score report: one row per recording plus a TOTAL row.
std::string score_report(const std::vector<std::string>& ids,
                         const std::vector<DERResult>& per_recording);

}  // namespace told

#endif  // TOLD_METRICS_H_
