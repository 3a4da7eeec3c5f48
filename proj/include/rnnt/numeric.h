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

#ifndef RNNT_NUMERIC_H_
#define RNNT_NUMERIC_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace rnnt {

// Additive identity of log-space accumulation.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)), safe for -inf operands.
inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// Max-shifted logsumexp over a span.
inline double log_sum_exp(std::span<const double> vals) {
  double hi = kLogZero;
  for (const double v : vals) hi = std::max(hi, v);
  if (hi == kLogZero) return kLogZero;
  double sum = 0.0;
  for (const double v : vals) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

}  // namespace rnnt

#endif  // RNNT_NUMERIC_H_
