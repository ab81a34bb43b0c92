#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lut/tensor.hpp"

namespace lut::ctc {

// Merges consecutive duplicates, then removes blanks.
std::vector<int> collapse(std::span<const int> raw, int blank = 0);

// Expanded target [blank, z1, blank, z2, ..., blank] of length 2|z| + 1.
std::vector<int> expand(std::span<const int> z, int blank = 0);

// Fewest frames any path collapsing to z needs: |z| plus one blank for every
// adjacent repeated pair.
std::size_t min_frames(std::span<const int> z);
bool feasible(std::size_t frames, std::span<const int> z);

// Log-space forward lattice alpha[t][s] over the expanded target.
struct PathPosterior {
  std::size_t frames = 0;
  std::size_t states = 0;
  std::vector<double> log_alpha;  // frames x states
  double log_likelihood = 0.0;    // logsumexp of the last two cells of the final row

  double at(std::size_t t, std::size_t s) const { return log_alpha[t * states + s]; }
};

PathPosterior forward_lattice(const Tensor& log_probs, std::span<const int> z, int blank = 0);

// -log P(z|x) for log_probs: [T x C] with log-normalized rows. The recursion is
// built from taped primitives, so backward() yields its exact gradient.
// Throws InfeasibleAlignmentError when no path of length T collapses to z.
Tensor ctc_loss(const Tensor& log_probs, std::span<const int> z, int blank = 0);

// Reference value by enumerating all C^T raw paths. Refuses (SearchSpaceError)
// above `max_paths`. Returns +inf when P(z|x) = 0.
double ctc_brute_force(const Tensor& log_probs, std::span<const int> z, int blank = 0,
                       double max_paths = 1e7);

// Per-frame argmax (lowest id on ties), then collapse.
std::vector<int> greedy_decode(const Tensor& log_probs, int blank = 0);

}  // namespace lut::ctc
