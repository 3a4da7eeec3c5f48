// Copyright 2026 The rnnt-multilingual Authors.
//
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

// Central-difference gradient verification against the analytic backward
// pass, sweeping every parameter coordinate of a model.

#ifndef RNNT_TESTS_GRAD_CHECK_H_
#define RNNT_TESTS_GRAD_CHECK_H_

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "rnnt/model.h"
#include "rnnt/trainer.h"

namespace gradcheck {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  int worst_coord = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  long long coords_checked = 0;
};

// Relative error with a unit floor: |a - n| / max(1, |a|, |n|). Gradients
// of this scale sit well above the O(eps^2) central-difference noise, so
// 1e-4 is a strict bound for a correct backward pass and far below any
// plausible sign or indexing bug.
inline double rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

// Sweeps every coordinate of every tensor in `params`, comparing the
// analytic gradient of the utterance NLL with a central difference of
// step `eps`. All tensors are swept, including ones an optimizer would
// freeze: the backward pass computes their gradients regardless, so a
// mismatch anywhere is a bug.
inline GradCheckResult check_utterance_grad(const rnnt::ParamStore& params,
                                            const rnnt::ModelConfig& config,
                                            const rnnt::Matrix& frames,
                                            std::span<const int> labels,
                                            std::optional<int> lang,
                                            bool use_adapters,
                                            double eps = 1e-5) {
  rnnt::ParamStore work = params;
  rnnt::ParamStore grads = params.zeros_like();
  rnnt::utterance_grad(work, config, frames, labels, lang, use_adapters, 1.0,
                       grads);

  GradCheckResult result;
  for (std::size_t ti = 0; ti < work.tensors().size(); ++ti) {
    rnnt::Matrix& value = work.tensors()[ti].value;
    const rnnt::Matrix& grad = grads.tensors()[ti].value;
    for (int idx = 0; idx < value.size(); ++idx) {
      const double saved = value.data()[idx];
      value.data()[idx] = saved + eps;
      const double up = rnnt::utterance_nll(work, config, frames, labels, lang,
                                            use_adapters);
      value.data()[idx] = saved - eps;
      const double down = rnnt::utterance_nll(work, config, frames, labels,
                                              lang, use_adapters);
      value.data()[idx] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = grad.data()[idx];
      const double err = rel_error(analytic, numeric);
      ++result.coords_checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_tensor = work.tensors()[ti].name;
        result.worst_coord = idx;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace gradcheck

#endif  // RNNT_TESTS_GRAD_CHECK_H_
