// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/alignment.h"

#include <algorithm>
#include <limits>
#include <numeric>

namespace told {

namespace {

// Sum in ascending row order. Every candidate total anywhere in this module
// goes through this helper, so equal assignments produce equal floats.
double sequential_total(const Mat& cost, const std::vector<int>& perm) {
  double total = 0.0;
  for (size_t r = 0; r < perm.size(); ++r) total += cost(r, perm[r]);
  return total;
}

// Classic O(n^3) shortest-augmenting-path assignment with potentials.
std::vector<int> hungarian_raw(const Mat& cost) {
  int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) perm[p[j] - 1] = j - 1;
  return perm;
}

// Solves the assignment restricted to rows [row0, n) and the given columns,
// returning the chosen column (in original indexing) per row.
std::vector<int> solve_suffix(const Mat& cost, int row0,
                              const std::vector<int>& cols) {
  int m = static_cast<int>(cols.size());
  Mat sub(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) sub(r, c) = cost(row0 + r, cols[c]);
  std::vector<int> sub_perm = hungarian_raw(sub);
  std::vector<int> out(m);
  for (int r = 0; r < m; ++r) out[r] = cols[sub_perm[r]];
  return out;
}

}  // namespace

Mat pairwise_bce_cost(const Mat& posteriors, const Mat& labels) {
  require(posteriors.rows() == labels.rows() &&
              posteriors.cols() == labels.cols(),
          "pit: posterior and label shapes must match");
  int t_len = static_cast<int>(posteriors.rows());
  int n_spk = static_cast<int>(posteriors.cols());
  Mat cost = Mat::Zero(n_spk, n_spk);
  for (int s = 0; s < n_spk; ++s) {
    for (int k = 0; k < n_spk; ++k) {
      double acc = 0.0;
      for (int t = 0; t < t_len; ++t)
        acc += binary_cross_entropy(labels(t, k), posteriors(t, s));
      cost(s, k) = acc;
    }
  }
  return cost;
}

Assignment hungarian(const Mat& cost) {
  require(cost.rows() == cost.cols(), "hungarian: matrix must be square");
  if (!cost.allFinite())
    throw InvalidInput("hungarian: cost entries must be finite");
  int n = static_cast<int>(cost.rows());
  Assignment a;
  if (n == 0) return a;

  a.perm = hungarian_raw(cost);
  a.cost = sequential_total(cost, a.perm);

  // Canonicalize toward the lexicographically smallest optimal permutation.
  // For each row in order, try smaller columns; a candidate is kept when its
  // sequentially-summed total does not exceed the incumbent.
  std::vector<char> used(n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < a.perm[i]; ++j) {
      if (used[j]) continue;
      std::vector<int> remaining;
      for (int c = 0; c < n; ++c)
        if (!used[c] && c != j) remaining.push_back(c);
      std::vector<int> suffix =
          remaining.empty() ? std::vector<int>{}
                            : solve_suffix(cost, i + 1, remaining);
      std::vector<int> candidate(a.perm.begin(), a.perm.begin() + i);
      candidate.push_back(j);
      candidate.insert(candidate.end(), suffix.begin(), suffix.end());
      double total = sequential_total(cost, candidate);
      if (total <= a.cost) {
        if (total == a.cost) a.ties_broken = true;
        a.perm = candidate;
        a.cost = total;
        break;
      }
    }
    used[a.perm[i]] = 1;
  }
  return a;
}

PermutationResult pit_align(const Mat& posteriors, const Mat& labels) {
  PermutationResult result;
  int n_spk = static_cast<int>(posteriors.cols());
  if (n_spk == 0) return result;
  require(posteriors.rows() >= 1, "pit: need at least one frame");
  Mat cost = pairwise_bce_cost(posteriors, labels);
  Assignment a = hungarian(cost);
  result.perm = a.perm;
  result.loss = a.cost / static_cast<double>(posteriors.rows());
  result.ties_broken = a.ties_broken;
  return result;
}

PermutationResult brute_force_pit(const Mat& posteriors, const Mat& labels) {
  int n_spk = static_cast<int>(posteriors.cols());
  PermutationResult result;
  if (n_spk == 0) return result;
  if (n_spk > 8)
    throw InvalidInput("brute_force_pit: refusing S > 8 (factorial growth)");
  Mat cost = pairwise_bce_cost(posteriors, labels);
  std::vector<int> perm(n_spk);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_total = sequential_total(cost, perm);
  bool ties = false;
  while (std::next_permutation(perm.begin(), perm.end())) {
    double total = sequential_total(cost, perm);
    if (total < best_total) {
      best_total = total;
      best = perm;
      ties = false;
    } else if (total == best_total) {
      ties = true;
    }
  }
  result.perm = best;
  result.loss = best_total / static_cast<double>(posteriors.rows());
  result.ties_broken = ties;
  return result;
}

std::vector<int> map_speakers_for_eval(const ActivityMatrix& ref,
                                       const ActivityMatrix& hyp) {
  require(ref.frames == hyp.frames,
          "map_speakers_for_eval: ref and hyp must share a frame grid");
  int n = std::max(ref.speakers, hyp.speakers);
  if (n == 0) return {};
  Mat agreement = Mat::Zero(n, n);
  for (int t = 0; t < ref.frames; ++t) {
    for (int h = 0; h < hyp.speakers; ++h) {
      if (!hyp.at(t, h)) continue;
      for (int r = 0; r < ref.speakers; ++r)
        if (ref.at(t, r)) agreement(h, r) += 1.0;
    }
  }
  Assignment a = hungarian(-agreement);
  return a.perm;
}

}  // namespace told
