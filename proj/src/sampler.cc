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

#include "rnnt/sampler.h"

#include <algorithm>
#include <stdexcept>

namespace rnnt {

std::vector<double> sampling_ratios(std::span<const long long> counts, double alpha) {
  if (counts.empty()) throw std::invalid_argument("sampling_ratios: empty counts");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("sampling_ratios: alpha outside [0,1]");
  }
  long long n_star = 0;
  for (const long long n : counts) {
    if (n < 1) throw std::invalid_argument("sampling_ratios: counts must be positive");
    n_star = std::max(n_star, n);
  }
  std::vector<double> weights(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    weights[i] = static_cast<double>(counts[i]) +
                 alpha * static_cast<double>(n_star - counts[i]);
    total += weights[i];
  }
  for (double& w : weights) w /= total;
  return weights;
}

SamplingSchedule make_schedule(std::vector<long long> counts, double alpha) {
  SamplingSchedule schedule;
  schedule.ratios = sampling_ratios(counts, alpha);
  schedule.counts = std::move(counts);
  schedule.alpha = alpha;
  return schedule;
}

SamplingSchedule schedule_from_corpus(const Corpus& corpus, double alpha) {
  std::vector<long long> counts(corpus.languages.size(), 0);
  for (const Utterance& utt : corpus.train) {
    counts.at(utt.lang.index) += 1;
  }
  // Languages without training data get ratio zero; Eq-style interpolation
  // runs over the present languages only.
  std::vector<long long> present;
  for (const long long n : counts) {
    if (n > 0) present.push_back(n);
  }
  if (present.empty()) {
    throw std::invalid_argument("schedule_from_corpus: corpus has no utterances");
  }
  const std::vector<double> present_ratios = sampling_ratios(present, alpha);
  SamplingSchedule schedule;
  schedule.alpha = alpha;
  schedule.ratios.assign(counts.size(), 0.0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) schedule.ratios[i] = present_ratios[j++];
  }
  schedule.counts = std::move(counts);
  return schedule;
}

BatchStream::BatchStream(const Corpus& corpus, const SamplingSchedule& schedule,
                         std::uint64_t seed, int batch_size)
    : corpus_(corpus), schedule_(schedule), batch_size_(batch_size), rng_(seed) {
  if (batch_size < 1) throw std::invalid_argument("BatchStream: batch_size < 1");
  if (schedule_.ratios.size() != corpus.languages.size()) {
    throw std::invalid_argument("BatchStream: schedule/corpus language mismatch");
  }
  pools_.resize(corpus.languages.size());
  for (int i = 0; i < static_cast<int>(corpus.train.size()); ++i) {
    pools_.at(corpus.train[i].lang.index).push_back(i);
  }
  std::size_t last_positive = schedule_.ratios.size();
  for (std::size_t l = 0; l < pools_.size(); ++l) {
    if (schedule_.ratios[l] > 0.0) {
      last_positive = l;
      if (pools_[l].empty()) {
        throw std::invalid_argument("BatchStream: language " +
                                    corpus.languages[l].code + " has no utterances");
      }
    }
  }
  if (last_positive == schedule_.ratios.size()) {
    throw std::invalid_argument("BatchStream: all sampling ratios are zero");
  }
  cumulative_.resize(schedule_.ratios.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < schedule_.ratios.size(); ++i) {
    acc += schedule_.ratios[i];
    cumulative_[i] = acc;
  }
  // Absorb rounding so the last sampled language is always reachable.
  // Zero-ratio languages share a boundary with their predecessor and are
  // never selected by the strict upper-bound search.
  for (std::size_t i = last_positive; i < cumulative_.size(); ++i) {
    cumulative_[i] = 1.0;
  }
}

std::vector<int> BatchStream::next_batch() {
  std::vector<int> batch(batch_size_);
  for (int b = 0; b < batch_size_; ++b) {
    const double u = rng_.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const int lang = std::min<int>(static_cast<int>(it - cumulative_.begin()),
                                   static_cast<int>(cumulative_.size()) - 1);
    const auto& pool = pools_[lang];
    batch[b] = pool[rng_.uniform_index(static_cast<int>(pool.size()))];
  }
  return batch;
}

}  // namespace rnnt
