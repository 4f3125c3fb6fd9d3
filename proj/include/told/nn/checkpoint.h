// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Checkpoint format: metadata header (JSON echo of config, stage, epoch,
// seed) plus a named parameter table with 32-bit float payloads.

#ifndef TOLD_NN_CHECKPOINT_H_
#define TOLD_NN_CHECKPOINT_H_

#include <string>
#include <vector>

#include "told/nn/layers.h"

namespace told::nn {

struct CheckpointEntry {
  std::string name;
  uint32_t rows = 0;
  uint32_t cols = 0;
  std::vector<float> data;  // row-major
};

struct Checkpoint {
  std::string meta_json;
  std::vector<CheckpointEntry> entries;
};

Checkpoint checkpoint_from_params(const ParamStore& store,
                                  const std::string& meta_json);

// Strict: every entry must match an existing parameter name and shape, and
// every parameter must be covered.
void load_into_params(const Checkpoint& ckpt, ParamStore& store);

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// Elementwise arithmetic mean; tables must agree on names and shapes.
Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts);

}  // namespace told::nn

#endif  // TOLD_NN_CHECKPOINT_H_
