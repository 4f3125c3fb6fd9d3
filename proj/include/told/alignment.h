// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Permutation search for permutation-invariant training and the optimal
// speaker mapping used by the DER scorer.

#ifndef TOLD_ALIGNMENT_H_
#define TOLD_ALIGNMENT_H_

#include <vector>

#include "told/common.h"
#include "told/types.h"

namespace told {

// Probabilities are clipped to [kProbEps, 1 - kProbEps] before logs.
constexpr double kProbEps = 1e-7;

inline double binary_cross_entropy(double label, double prob) {
  double p = prob;
  if (p < kProbEps) p = kProbEps;
  if (p > 1.0 - kProbEps) p = 1.0 - kProbEps;
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

struct PermutationResult {
  // perm[s] = ground-truth speaker assigned to output slot s
  std::vector<int> perm;
  double loss = 0.0;  // frame-averaged BCE under perm
  bool ties_broken = false;
};

struct Assignment {
  std::vector<int> perm;  // perm[row] = column
  double cost = 0.0;      // sum over rows of cost(row, perm[row]), row order
  bool ties_broken = false;
};

// S x S matrix: entry (s, k) is the BCE of posterior column s against label
// column k, summed over frames. Shared by pit_align and brute_force_pit so
// both sides of the cross-check consume identical floats.
Mat pairwise_bce_cost(const Mat& posteriors, const Mat& labels);

// Exact minimum-cost bijection. Ties are broken toward the lexicographically
// smallest permutation. Throws InvalidInput on non-finite entries.
Assignment hungarian(const Mat& cost);

// Permutation minimizing the frame-averaged BCE between posteriors and
// column-permuted labels, via pairwise decomposition plus exact assignment.
PermutationResult pit_align(const Mat& posteriors, const Mat& labels);

// Exhaustive reference; refuses S > 8.
PermutationResult brute_force_pit(const Mat& posteriors, const Mat& labels);

// Mapping from hyp speaker slots to ref speaker slots maximizing the total
// count of frames of agreement. The smaller side is padded with empty
// speakers; returned vector has size max(ref.speakers, hyp.speakers) and
// entries >= ref.speakers denote padding.
std::vector<int> map_speakers_for_eval(const ActivityMatrix& ref,
                                       const ActivityMatrix& hyp);

}  // namespace told

#endif  // TOLD_ALIGNMENT_H_
