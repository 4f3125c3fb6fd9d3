// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/metrics.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "told/alignment.h"

namespace told {

namespace {

// Frame i covers [i*r, (i+1)*r); membership is decided at the frame center.
int first_center_at_or_after(double t, double r) {
  double x = t / r - 0.5;
  int i = static_cast<int>(std::ceil(x - 1e-9));
  return std::max(i, 0);
}

std::vector<std::string> collect_speakers(const SegmentList& list) {
  std::vector<std::string> ids;
  for (const auto& seg : list.segments) {
    if (std::find(ids.begin(), ids.end(), seg.speaker) == ids.end())
      ids.push_back(seg.speaker);
  }
  return ids;
}

void mark_segments(const SegmentList& list,
                   const std::vector<std::string>& ids, double resolution,
                   int n_frames, std::vector<uint32_t>& act) {
  act.assign(n_frames, 0);
  for (const auto& seg : list.segments) {
    auto it = std::find(ids.begin(), ids.end(), seg.speaker);
    int s = static_cast<int>(it - ids.begin());
    int lo = first_center_at_or_after(seg.onset, resolution);
    int hi = first_center_at_or_after(seg.onset + seg.duration, resolution);
    hi = std::min(hi, n_frames);
    for (int i = lo; i < hi; ++i) act[i] |= (1u << s);
  }
}

}  // namespace

DERResult der(const SegmentList& ref, const SegmentList& hyp, double collar,
              double resolution) {
  require(resolution > 0.0, "der: resolution must be positive");
  require(collar >= 0.0, "der: collar must be non-negative");
  for (const auto& seg : ref.segments)
    require(seg.duration > 0.0 && seg.onset >= 0.0, "der: bad ref segment");
  for (const auto& seg : hyp.segments)
    require(seg.duration > 0.0 && seg.onset >= 0.0, "der: bad hyp segment");

  DERResult out;
  double end = 0.0;
  for (const auto& seg : ref.segments)
    end = std::max(end, seg.onset + seg.duration);
  for (const auto& seg : hyp.segments)
    end = std::max(end, seg.onset + seg.duration);
  int n_frames = static_cast<int>(std::ceil(end / resolution + 1e-9));

  std::vector<std::string> ref_ids = collect_speakers(ref);
  std::vector<std::string> hyp_ids = collect_speakers(hyp);
  require(ref_ids.size() <= 31 && hyp_ids.size() <= 31,
          "der: too many speakers for bitmask scoring");

  std::vector<uint32_t> ref_act, hyp_act;
  mark_segments(ref, ref_ids, resolution, n_frames, ref_act);
  mark_segments(hyp, hyp_ids, resolution, n_frames, hyp_act);

  // No-score regions around every reference segment boundary.
  std::vector<char> excluded(n_frames, 0);
  for (const auto& seg : ref.segments) {
    for (double b : {seg.onset, seg.onset + seg.duration}) {
      int lo = first_center_at_or_after(b - collar, resolution);
      int hi = first_center_at_or_after(b + collar, resolution);
      // centers exactly at b + collar are still excluded (<= comparison)
      while (hi < n_frames &&
             (hi + 0.5) * resolution <= b + collar + 1e-12)
        ++hi;
      hi = std::min(hi, n_frames);
      for (int i = lo; i < hi; ++i) excluded[i] = 1;
    }
  }

  // Optimal speaker mapping on the scored frames.
  int n_ref = static_cast<int>(ref_ids.size());
  int n_hyp = static_cast<int>(hyp_ids.size());
  std::vector<int> mapping;
  if (n_ref > 0 || n_hyp > 0) {
    int n = std::max(n_ref, n_hyp);
    Mat agreement = Mat::Zero(n, n);
    for (int i = 0; i < n_frames; ++i) {
      if (excluded[i]) continue;
      uint32_t rbits = ref_act[i], hbits = hyp_act[i];
      if (!rbits || !hbits) continue;
      for (int h = 0; h < n_hyp; ++h) {
        if (!(hbits & (1u << h))) continue;
        for (int r = 0; r < n_ref; ++r)
          if (rbits & (1u << r)) agreement(h, r) += 1.0;
      }
    }
    mapping = hungarian(-agreement).perm;
  }

  int64_t miss = 0, fa = 0, conf = 0, scored = 0;
  for (int i = 0; i < n_frames; ++i) {
    if (excluded[i]) continue;
    uint32_t rbits = ref_act[i], hbits = hyp_act[i];
    int n_r = std::popcount(rbits);
    int n_h = std::popcount(hbits);
    if (n_r == 0 && n_h == 0) continue;
    int n_correct = 0;
    if (n_r > 0 && n_h > 0) {
      for (int h = 0; h < n_hyp; ++h) {
        if (!(hbits & (1u << h))) continue;
        int r = mapping[h];
        if (r < n_ref && (rbits & (1u << r))) ++n_correct;
      }
    }
    scored += n_r;
    miss += std::max(0, n_r - n_h);
    fa += std::max(0, n_h - n_r);
    conf += std::min(n_r, n_h) - n_correct;
  }

  out.miss = miss * resolution;
  out.false_alarm = fa * resolution;
  out.confusion = conf * resolution;
  out.scored_speech = scored * resolution;
  if (scored > 0) {
    out.der = (out.miss + out.false_alarm + out.confusion) / out.scored_speech;
  } else {
    out.der = (fa == 0) ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return out;
}

SegmentList activity_to_segments(const ActivityMatrix& labels,
                                 double frame_period,
                                 const std::vector<std::string>& speaker_ids,
                                 double min_dur, double merge_gap,
                                 const std::string& recording_id) {
  require(frame_period > 0.0, "activity_to_segments: frame_period > 0");
  require(static_cast<int>(speaker_ids.size()) == labels.speakers,
          "activity_to_segments: speaker_ids size mismatch");
  SegmentList out;
  out.recording_id = recording_id;
  for (int s = 0; s < labels.speakers; ++s) {
    // collect [start, stop) runs in frames
    std::vector<std::pair<int, int>> runs;
    int t = 0;
    while (t < labels.frames) {
      if (labels.at(t, s)) {
        int start = t;
        while (t < labels.frames && labels.at(t, s)) ++t;
        runs.emplace_back(start, t);
      } else {
        ++t;
      }
    }
    // merge short gaps
    std::vector<std::pair<int, int>> merged;
    for (const auto& run : runs) {
      if (!merged.empty() &&
          (run.first - merged.back().second) * frame_period < merge_gap) {
        merged.back().second = run.second;
      } else {
        merged.push_back(run);
      }
    }
    for (const auto& run : merged) {
      double dur = (run.second - run.first) * frame_period;
      if (dur < min_dur) continue;
      out.segments.push_back(
          {speaker_ids[s], run.first * frame_period, dur});
    }
  }
  std::stable_sort(out.segments.begin(), out.segments.end(),
                   [](const Segment& a, const Segment& b) {
                     if (a.onset != b.onset) return a.onset < b.onset;
                     return a.speaker < b.speaker;
                   });
  return out;
}

ActivityMatrix segments_to_activity(
    const SegmentList& segs, double frame_period, int frames,
    const std::vector<std::string>& speaker_ids) {
  require(frame_period > 0.0, "segments_to_activity: frame_period > 0");
  ActivityMatrix out(frames, static_cast<int>(speaker_ids.size()));
  out.frame_period = frame_period;
  out.speaker_ids = speaker_ids;
  for (const auto& seg : segs.segments) {
    auto it = std::find(speaker_ids.begin(), speaker_ids.end(), seg.speaker);
    require(it != speaker_ids.end(),
            "segments_to_activity: unknown speaker " + seg.speaker);
    int s = static_cast<int>(it - speaker_ids.begin());
    int lo = first_center_at_or_after(seg.onset, frame_period);
    int hi = first_center_at_or_after(seg.onset + seg.duration, frame_period);
    hi = std::min(hi, frames);
    for (int t = lo; t < hi; ++t) out.set(t, s, 1);
  }
  return out;
}

std::string rttm_emit(const SegmentList& segs) {
  std::ostringstream os;
  char buf[64];
  for (const auto& seg : segs.segments) {
    std::snprintf(buf, sizeof(buf), "%.3f", seg.onset);
    std::string onset = buf;
    std::snprintf(buf, sizeof(buf), "%.3f", seg.duration);
    std::string dur = buf;
    os << "SPEAKER " << segs.recording_id << " 1 " << onset << " " << dur
       << " <NA> <NA> " << seg.speaker << " <NA> <NA>\n";
  }
  return os.str();
}

std::vector<SegmentList> rttm_parse(const std::string& text) {
  std::vector<SegmentList> lists;
  std::map<std::string, size_t> index;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string type, rec, chan, onset_s, dur_s, f1, f2, spk;
    if (!(ls >> type >> rec >> chan >> onset_s >> dur_s >> f1 >> f2 >> spk))
      throw ParseError("rttm line " + std::to_string(line_no) +
                       ": expected at least 8 fields");
    if (type != "SPEAKER")
      throw ParseError("rttm line " + std::to_string(line_no) +
                       ": unsupported record type '" + type + "'");
    Segment seg;
    seg.speaker = spk;
    try {
      size_t used = 0;
      seg.onset = std::stod(onset_s, &used);
      if (used != onset_s.size()) throw std::invalid_argument(onset_s);
      seg.duration = std::stod(dur_s, &used);
      if (used != dur_s.size()) throw std::invalid_argument(dur_s);
    } catch (const std::exception&) {
      throw ParseError("rttm line " + std::to_string(line_no) +
                       ": bad onset/duration");
    }
    if (seg.duration <= 0.0 || seg.onset < 0.0)
      throw ParseError("rttm line " + std::to_string(line_no) +
                       ": onset/duration out of range");
    auto it = index.find(rec);
    if (it == index.end()) {
      index[rec] = lists.size();
      lists.push_back({rec, {}});
      it = index.find(rec);
    }
    lists[it->second].segments.push_back(seg);
  }
  return lists;
}

void write_rttm(const std::string& path, const SegmentList& segs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << rttm_emit(segs);
  if (!os) throw IoError("write failed: " + path);
}

std::vector<SegmentList> read_rttm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return rttm_parse(ss.str());
}

std::string score_report(const std::vector<std::string>& ids,
                         const std::vector<DERResult>& per_recording) {
  require(ids.size() == per_recording.size(), "score_report: size mismatch");
  std::ostringstream os;
  os << "# recording der miss false_alarm confusion scored_speech\n";
  DERResult total;
  char buf[256];
  for (size_t i = 0; i < ids.size(); ++i) {
    const DERResult& r = per_recording[i];
    std::snprintf(buf, sizeof(buf), "%s %.6f %.3f %.3f %.3f %.3f\n",
                  ids[i].c_str(), r.der, r.miss, r.false_alarm, r.confusion,
                  r.scored_speech);
    os << buf;
    total.miss += r.miss;
    total.false_alarm += r.false_alarm;
    total.confusion += r.confusion;
    total.scored_speech += r.scored_speech;
  }
  total.der = total.scored_speech > 0
                  ? (total.miss + total.false_alarm + total.confusion) /
                        total.scored_speech
                  : 0.0;
  std::snprintf(buf, sizeof(buf), "TOTAL %.6f %.3f %.3f %.3f %.3f\n",
                total.der, total.miss, total.false_alarm, total.confusion,
                total.scored_speech);
  os << buf;
  return os.str();
}

}  // namespace told
