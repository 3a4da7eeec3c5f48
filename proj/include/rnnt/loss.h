// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RNNT_LOSS_H_
#define RNNT_LOSS_H_

#include <span>

#include "rnnt/types.h"

namespace rnnt {

// Log-space alignment grid for one utterance. Node (t, u) means "frames
// 0..t-1 consumed, labels 0..u-1 emitted, about to emit at frame t".
// log_alpha(0, 0) = 0; a rightward move from (t, u) emits blank with
// log_probs(t, u, 0), an upward move emits labels[u] with
// log_probs(t, u, labels[u]). The sequence ends with a required blank at
// (T-1, U), so log_likelihood = log_alpha(T-1, U) + log_probs(T-1, U, 0).
//
// log_beta uses completion semantics: log_beta(t, u) includes the emission
// taken at (t, u), and log_beta(0, 0) = log_likelihood. Every monotonic
// path crosses each anti-diagonal t + u = m exactly once, so
// logsumexp over {(t, u) : t + u = m} of log_alpha + log_beta reproduces
// log_likelihood for every m.
struct LossLattice {
  Matrix log_alpha;  // [T x (U+1)]
  Matrix log_beta;   // [T x (U+1)]
  double log_likelihood = 0.0;
};

// Normalizes logits over the vocabulary axis.
Tensor3 log_softmax(const Tensor3& logits);

// Forward/backward grids for log_probs [T x (U+1) x V] and non-blank
// labels y_0..y_{U-1}. Throws on blank/out-of-range labels, non-finite or
// unnormalized log_probs, or shape mismatch.
LossLattice rnnt_lattice(const Tensor3& log_probs, std::span<const int> labels);

// Negative log-likelihood of the label sequence. When grad_logits is
// non-null it receives d nll / d logits for the logits underlying
// log_probs (the log-softmax is folded into the gradient, so rows of
// grad_logits sum to zero).
double rnnt_loss(const Tensor3& log_probs, std::span<const int> labels,
                 Tensor3* grad_logits = nullptr);

// Explicit enumeration of all C(T-1+U, U) alignment paths. Requires
// T + U <= 12.
double brute_force_nll(const Tensor3& log_probs, std::span<const int> labels);

}  // namespace rnnt

#endif  // RNNT_LOSS_H_
