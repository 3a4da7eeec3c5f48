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

#ifndef RNNT_DECODER_H_
#define RNNT_DECODER_H_

#include <optional>
#include <vector>

#include "rnnt/model.h"

namespace rnnt {

// Output of one greedy pass. per_step_log_probs has one entry per decision
// taken (blank decisions included), in decision order.
struct DecodeResult {
  std::vector<int> tokens;  // grapheme indices, no blank
  std::vector<double> per_step_log_probs;
  int frames_consumed = 0;

  double total_log_prob() const {
    double s = 0.0;
    for (const double v : per_step_log_probs) s += v;
    return s;
  }
};

struct BeamHypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
};

inline constexpr int kDefaultMaxSymbolsPerFrame = 5;

// Incremental greedy decoder. Frames may arrive one at a time; emissions
// for a frame are final the moment the frame is consumed, so streaming and
// one-shot decoding agree exactly.
class GreedyDecoder {
 public:
  GreedyDecoder(const ParamStore& params, const ModelConfig& config,
                std::optional<int> lang, bool use_adapters,
                int max_symbols_per_frame = kDefaultMaxSymbolsPerFrame);

  // Consumes one stacked frame [input_dim]; appends emissions to result().
  void push_frame(const Vector& frame);

  const DecodeResult& result() const { return result_; }

 private:
  const ParamStore& params_;
  const ModelConfig& config_;
  std::optional<int> lang_;
  bool use_adapters_;
  int max_symbols_;
  RecurrentState enc_state_;
  RecurrentState pred_state_;
  Vector dec_out_;
  DecodeResult result_;
};

// One-shot greedy decode of stacked frames [T x input_dim]. At each frame
// the argmax symbol is emitted (ties to the lowest index) until blank wins
// or max_symbols_per_frame symbols have been emitted.
DecodeResult greedy_decode(const ParamStore& params, const ModelConfig& config,
                           const Matrix& frames, std::optional<int> lang,
                           bool use_adapters,
                           int max_symbols_per_frame = kDefaultMaxSymbolsPerFrame);

// Frame-synchronous beam search. Width 1 reproduces greedy_decode's token
// sequence. Hypotheses with equal prefixes are merged at frame boundaries
// (log-sum of scores), results are sorted by score, ties broken toward the
// lexicographically smaller token sequence.
std::vector<BeamHypothesis> beam_decode(
    const ParamStore& params, const ModelConfig& config, const Matrix& frames,
    std::optional<int> lang, bool use_adapters, int beam_width,
    int max_symbols_per_frame = kDefaultMaxSymbolsPerFrame);

}  // namespace rnnt

#endif  // RNNT_DECODER_H_
