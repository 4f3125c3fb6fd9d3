// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Power set encoding: bijective mapping between multi-speaker binary
// activity vectors (at most k_max simultaneous speakers) and compact
// single-label class indices.

#ifndef TOLD_PSE_CODEC_H_
#define TOLD_PSE_CODEC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "told/common.h"

namespace told {

// Length-s_max vector with entries in {0, 1}.
using ActivityVector = std::vector<uint8_t>;

struct PSECodebook {
  int s_max = 0;
  int k_max = 0;
  std::vector<uint32_t> class_to_raw;  // ascending raw codes, silence first
  std::vector<int32_t> raw_to_class;   // size 1 << s_max, -1 for invalid codes

  int num_classes() const { return static_cast<int>(class_to_raw.size()); }
};

// Raw integer code: sum over set bits of 2^s (speaker s zero-based).
uint32_t encode_raw(const ActivityVector& v);

// Enumerates all raw codes with popcount <= k_max in ascending order.
// Class index = rank of the raw code, so silence is always class 0.
PSECodebook build_codebook(int s_max, int k_max);

// Throws InvalidInput when popcount(v) > k_max; clamp first if needed.
int encode_class(const ActivityVector& v, const PSECodebook& cb);

ActivityVector decode_class(int c, const PSECodebook& cb);

// Keeps the k_max set bits with lowest speaker index, zeroes the rest.
// Increments the module clamp counter whenever clamping actually occurs.
ActivityVector clamp_activity(const ActivityVector& v, int k_max);

uint64_t clamp_event_count();
void reset_clamp_events();

// Text table, one "class_index raw_code" line per class.
std::string codebook_to_text(const PSECodebook& cb);
PSECodebook codebook_from_text(const std::string& text);

}  // namespace told

#endif  // TOLD_PSE_CODEC_H_
