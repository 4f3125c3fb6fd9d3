// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/pse_codec.h"

#include <atomic>
#include <bit>
#include <sstream>

namespace told {

namespace {
std::atomic<uint64_t> g_clamp_events{0};
}

uint32_t encode_raw(const ActivityVector& v) {
  require(v.size() <= 31, "activity vector too long for raw encoding");
  uint32_t code = 0;
  for (size_t s = 0; s < v.size(); ++s) {
    require(v[s] == 0 || v[s] == 1, "activity entries must be binary");
    if (v[s]) code |= (1u << s);
  }
  return code;
}

PSECodebook build_codebook(int s_max, int k_max) {
  require(s_max >= 1 && s_max <= 20, "s_max must be in [1, 20]");
  require(k_max >= 0 && k_max <= s_max, "k_max must be in [0, s_max]");
  PSECodebook cb;
  cb.s_max = s_max;
  cb.k_max = k_max;
  uint32_t n_raw = 1u << s_max;
  cb.raw_to_class.assign(n_raw, -1);
  for (uint32_t raw = 0; raw < n_raw; ++raw) {
    if (std::popcount(raw) <= k_max) {
      cb.raw_to_class[raw] = static_cast<int32_t>(cb.class_to_raw.size());
      cb.class_to_raw.push_back(raw);
    }
  }
  return cb;
}

int encode_class(const ActivityVector& v, const PSECodebook& cb) {
  require(static_cast<int>(v.size()) == cb.s_max,
          "activity vector length must equal s_max");
  uint32_t raw = encode_raw(v);
  int32_t c = cb.raw_to_class[raw];
  if (c < 0)
    throw InvalidInput("activity vector with popcount > k_max; clamp first");
  return c;
}

ActivityVector decode_class(int c, const PSECodebook& cb) {
  if (c < 0 || c >= cb.num_classes())
    throw InvalidInput("class index out of range");
  uint32_t raw = cb.class_to_raw[c];
  ActivityVector v(cb.s_max, 0);
  for (int s = 0; s < cb.s_max; ++s)
    if (raw & (1u << s)) v[s] = 1;
  return v;
}

ActivityVector clamp_activity(const ActivityVector& v, int k_max) {
  int count = 0;
  for (uint8_t b : v) count += b;
  if (count <= k_max) return v;
  ActivityVector out(v.size(), 0);
  int kept = 0;
  for (size_t s = 0; s < v.size() && kept < k_max; ++s) {
    if (v[s]) {
      out[s] = 1;
      ++kept;
    }
  }
  g_clamp_events.fetch_add(1, std::memory_order_relaxed);
  return out;
}

uint64_t clamp_event_count() {
  return g_clamp_events.load(std::memory_order_relaxed);
}

void reset_clamp_events() { g_clamp_events.store(0, std::memory_order_relaxed); }

std::string codebook_to_text(const PSECodebook& cb) {
  std::ostringstream os;
  os << "# s_max " << cb.s_max << " k_max " << cb.k_max << "\n";
  for (int c = 0; c < cb.num_classes(); ++c)
    os << c << " " << cb.class_to_raw[c] << "\n";
  return os.str();
}

PSECodebook codebook_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int s_max = -1, k_max = -1;
  std::vector<uint32_t> raws;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, s1, s2;
      ls >> hash >> s1 >> s_max >> s2 >> k_max;
      continue;
    }
    int c;
    uint32_t raw;
    if (!(ls >> c >> raw))
      throw ParseError("codebook line " + std::to_string(line_no) +
                       ": expected 'class raw'");
    if (c != static_cast<int>(raws.size()))
      throw ParseError("codebook line " + std::to_string(line_no) +
                       ": classes out of order");
    raws.push_back(raw);
  }
  if (s_max < 0 || k_max < 0) throw ParseError("codebook: missing header");
  PSECodebook cb = build_codebook(s_max, k_max);
  if (cb.class_to_raw != raws)
    throw ParseError("codebook: table does not match (s_max, k_max)");
  return cb;
}

}  // namespace told
