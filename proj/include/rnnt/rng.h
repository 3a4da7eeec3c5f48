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

#ifndef RNNT_RNG_H_
#define RNNT_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace rnnt {

// Deterministic random source used everywhere seeds appear.
//
// The core generator is std::mt19937_64 (a named, standardized algorithm),
// and all derived draws are defined purely in terms of its raw 64-bit
// outputs, so streams are reproducible across compilers and platforms:
//   uniform()      top 53 bits scaled to [0, 1)
//   uniform_int(n) unbiased via rejection on the top of the 64-bit range
//   normal()       Box-Muller from two uniform draws (no cached spare)
//
// Sub-streams are split off by label from the *root seed* (not from the
// consumed state), so the draw order of one stream never perturbs another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  int uniform_index(int n) { return static_cast<int>(uniform_int(static_cast<std::uint64_t>(n))); }

  // Inclusive integer range draw.
  int uniform_range(int lo, int hi) {
    return lo + uniform_index(hi - lo + 1);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // guard log(0)
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  // Derives an independent stream from the root seed and a label.
  Rng split(std::string_view label) const {
    return Rng(splitmix64(seed_ ^ fnv1a64(label)));
  }

  std::uint64_t seed() const { return seed_; }

  static std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace rnnt

#endif  // RNNT_RNG_H_
