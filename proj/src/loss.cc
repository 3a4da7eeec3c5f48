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

#include "rnnt/loss.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rnnt/numeric.h"

namespace rnnt {

namespace {

constexpr int kBlank = 0;

void check_inputs(const Tensor3& log_probs, std::span<const int> labels) {
  const int t_len = log_probs.dim0();
  const int u_len = log_probs.dim1();
  const int v = log_probs.dim2();
  if (t_len < 1 || v < 2) {
    throw std::invalid_argument("rnnt_loss: need T >= 1 and V >= 2");
  }
  if (u_len != static_cast<int>(labels.size()) + 1) {
    throw std::invalid_argument("rnnt_loss: log_probs U axis must be labels+1");
  }
  for (const int y : labels) {
    if (y <= kBlank || y >= v) {
      throw std::invalid_argument("rnnt_loss: labels must be non-blank vocab indices");
    }
  }
  for (int t = 0; t < t_len; ++t) {
    for (int u = 0; u < u_len; ++u) {
      double total = kLogZero;
      for (int i = 0; i < v; ++i) {
        const double lp = log_probs(t, u, i);
        if (std::isnan(lp) || lp > 1e-9) {
          throw std::invalid_argument("rnnt_loss: log_probs must be finite log-probabilities");
        }
        total = log_add(total, lp);
      }
      if (std::abs(total) > 1e-6) {
        throw std::invalid_argument("rnnt_loss: log_probs rows must be normalized");
      }
    }
  }
}

}  // namespace

Tensor3 log_softmax(const Tensor3& logits) {
  const int t_len = logits.dim0();
  const int u_len = logits.dim1();
  const int v = logits.dim2();
  Tensor3 out(t_len, u_len, v);
  for (int t = 0; t < t_len; ++t) {
    for (int u = 0; u < u_len; ++u) {
      double m = logits(t, u, 0);
      for (int i = 1; i < v; ++i) m = std::max(m, logits(t, u, i));
      double sum = 0.0;
      for (int i = 0; i < v; ++i) sum += std::exp(logits(t, u, i) - m);
      const double lse = m + std::log(sum);
      for (int i = 0; i < v; ++i) out(t, u, i) = logits(t, u, i) - lse;
    }
  }
  return out;
}

LossLattice rnnt_lattice(const Tensor3& log_probs, std::span<const int> labels) {
  check_inputs(log_probs, labels);
  const int t_len = log_probs.dim0();
  const int u_cap = log_probs.dim1();  // U + 1

  LossLattice lat;
  lat.log_alpha = Matrix::Constant(t_len, u_cap, kLogZero);
  lat.log_beta = Matrix::Constant(t_len, u_cap, kLogZero);

  Matrix& a = lat.log_alpha;
  a(0, 0) = 0.0;
  for (int t = 0; t < t_len; ++t) {
    for (int u = 0; u < u_cap; ++u) {
      if (t == 0 && u == 0) continue;
      double acc = kLogZero;
      if (t > 0) acc = log_add(acc, a(t - 1, u) + log_probs(t - 1, u, kBlank));
      if (u > 0) acc = log_add(acc, a(t, u - 1) + log_probs(t, u - 1, labels[u - 1]));
      a(t, u) = acc;
    }
  }
  lat.log_likelihood = a(t_len - 1, u_cap - 1) + log_probs(t_len - 1, u_cap - 1, kBlank);

  Matrix& b = lat.log_beta;
  for (int t = t_len - 1; t >= 0; --t) {
    for (int u = u_cap - 1; u >= 0; --u) {
      double acc = kLogZero;
      if (t + 1 < t_len) {
        acc = log_add(acc, log_probs(t, u, kBlank) + b(t + 1, u));
      } else if (u == u_cap - 1) {
        acc = log_probs(t, u, kBlank);  // terminal blank
      }
      if (u + 1 < u_cap) {
        acc = log_add(acc, log_probs(t, u, labels[u]) + b(t, u + 1));
      }
      b(t, u) = acc;
    }
  }
  return lat;
}

double rnnt_loss(const Tensor3& log_probs, std::span<const int> labels,
                 Tensor3* grad_logits) {
  const LossLattice lat = rnnt_lattice(log_probs, labels);
  const double nll = -lat.log_likelihood;
  if (!grad_logits) return nll;

  const int t_len = log_probs.dim0();
  const int u_cap = log_probs.dim1();
  const int v = log_probs.dim2();
  *grad_logits = Tensor3(t_len, u_cap, v);

  // d nll / d log_probs(t,u,v) is minus the posterior of the edge leaving
  // (t,u) with symbol v. Folding in the log-softmax Jacobian adds
  // softmax(t,u,v) times the node posterior, so each row sums to zero.
  for (int t = 0; t < t_len; ++t) {
    for (int u = 0; u < u_cap; ++u) {
      const double node_post =
          std::exp(lat.log_alpha(t, u) + lat.log_beta(t, u) - lat.log_likelihood);
      double blank_post = 0.0;
      if (t + 1 < t_len) {
        blank_post = std::exp(lat.log_alpha(t, u) + log_probs(t, u, kBlank) +
                              lat.log_beta(t + 1, u) - lat.log_likelihood);
      } else if (u == u_cap - 1) {
        blank_post = std::exp(lat.log_alpha(t, u) + log_probs(t, u, kBlank) -
                              lat.log_likelihood);
      }
      double label_post = 0.0;
      if (u + 1 < u_cap) {
        label_post = std::exp(lat.log_alpha(t, u) + log_probs(t, u, labels[u]) +
                              lat.log_beta(t, u + 1) - lat.log_likelihood);
      }
      for (int i = 0; i < v; ++i) {
        double g = std::exp(log_probs(t, u, i)) * node_post;
        if (i == kBlank) g -= blank_post;
        if (u + 1 < u_cap && i == labels[u]) g -= label_post;
        (*grad_logits)(t, u, i) = g;
      }
    }
  }
  return nll;
}

double brute_force_nll(const Tensor3& log_probs, std::span<const int> labels) {
  check_inputs(log_probs, labels);
  const int t_len = log_probs.dim0();
  const int u_count = static_cast<int>(labels.size());
  if (t_len + u_count > 12) {
    throw std::invalid_argument("brute_force_nll: T + U exceeds enumeration bound 12");
  }

  std::vector<double> path_logs;
  // Depth-first walk over all monotonic move interleavings.
  const auto walk = [&](const auto& self, int t, int u, double acc) -> void {
    if (t == t_len - 1 && u == u_count) {
      path_logs.push_back(acc + log_probs(t, u, kBlank));
      return;
    }
    if (t + 1 < t_len) self(self, t + 1, u, acc + log_probs(t, u, kBlank));
    if (u < u_count) self(self, t, u + 1, acc + log_probs(t, u, labels[u]));
  };
  walk(walk, 0, 0, 0.0);
  return -log_sum_exp(path_logs);
}

}  // namespace rnnt
