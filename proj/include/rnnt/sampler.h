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

#ifndef RNNT_SAMPLER_H_
#define RNNT_SAMPLER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "rnnt/corpus.h"
#include "rnnt/rng.h"

namespace rnnt {

// Per-language sampling shares interpolated between natural frequencies
// (alpha = 0) and uniform (alpha = 1):
//
//   s(i) = (n_i + alpha * (n* - n_i)) / sum_j (n_j + alpha * (n* - n_j))
//
// where n* = max_i n_i. Throws on empty counts, nonpositive counts, or
// alpha outside [0, 1]. The endpoint cases are exact: alpha = 0 gives
// n_i / N and alpha = 1 gives 1 / k in double arithmetic.
std::vector<double> sampling_ratios(std::span<const long long> counts, double alpha);

struct SamplingSchedule {
  std::vector<long long> counts;
  double alpha = 0.0;
  std::vector<double> ratios;
};

SamplingSchedule make_schedule(std::vector<long long> counts, double alpha);

// Counts utterances per language index; languages sized to corpus.languages.
SamplingSchedule schedule_from_corpus(const Corpus& corpus, double alpha);

// Reproducible batch sequence: each slot draws a language from the schedule
// ratios, then an utterance uniformly (with replacement) from that
// language's pool. The stream is a pure function of (corpus order, schedule,
// seed); prefetching callers must deliver batches in this exact order.
class BatchStream {
 public:
  BatchStream(const Corpus& corpus, const SamplingSchedule& schedule,
              std::uint64_t seed, int batch_size);

  // Indices into corpus.train, in slot order.
  std::vector<int> next_batch();

  int batch_size() const { return batch_size_; }

 private:
  const Corpus& corpus_;
  SamplingSchedule schedule_;
  std::vector<double> cumulative_;
  std::vector<std::vector<int>> pools_;  // per language: train indices
  int batch_size_;
  Rng rng_;
};

}  // namespace rnnt

#endif  // RNNT_SAMPLER_H_
