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

#include "rnnt/decoder.h"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <utility>

#include "rnnt/numeric.h"

namespace rnnt {

namespace {

// Log-softmax of a logit vector.
Vector log_probs_of(const Vector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

int argmax_lowest(const Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

GreedyDecoder::GreedyDecoder(const ParamStore& params, const ModelConfig& config,
                             std::optional<int> lang, bool use_adapters,
                             int max_symbols_per_frame)
    : params_(params),
      config_(config),
      lang_(lang),
      use_adapters_(use_adapters),
      max_symbols_(max_symbols_per_frame),
      enc_state_(make_encoder_state(config)),
      pred_state_(make_prediction_state(config)) {
  if (max_symbols_ < 1) {
    throw std::invalid_argument("GreedyDecoder: max_symbols_per_frame must be >= 1");
  }
  dec_out_ = predict_step(params_, config_, pred_state_, -1);
}

void GreedyDecoder::push_frame(const Vector& frame) {
  const Vector enc = encode_step(params_, config_, enc_state_, frame, lang_,
                                 use_adapters_);
  int emitted = 0;
  while (emitted < max_symbols_) {
    const Vector lps = log_probs_of(joint_step(params_, config_, enc, dec_out_));
    const int best = argmax_lowest(lps);
    result_.per_step_log_probs.push_back(lps[best]);
    if (best == 0) break;
    result_.tokens.push_back(best);
    dec_out_ = predict_step(params_, config_, pred_state_, best);
    ++emitted;
  }
  ++result_.frames_consumed;
}

DecodeResult greedy_decode(const ParamStore& params, const ModelConfig& config,
                           const Matrix& frames, std::optional<int> lang,
                           bool use_adapters, int max_symbols_per_frame) {
  GreedyDecoder decoder(params, config, lang, use_adapters, max_symbols_per_frame);
  for (int t = 0; t < frames.rows(); ++t) {
    decoder.push_frame(frames.row(t).transpose());
  }
  return decoder.result();
}

namespace {

struct Hyp {
  std::vector<int> tokens;
  double log_prob = 0.0;
  RecurrentState pred_state;
  Vector dec_out;
  bool asleep = false;
};

bool better(const Hyp& a, const Hyp& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

}  // namespace

std::vector<BeamHypothesis> beam_decode(const ParamStore& params,
                                        const ModelConfig& config,
                                        const Matrix& frames,
                                        std::optional<int> lang, bool use_adapters,
                                        int beam_width, int max_symbols_per_frame) {
  if (beam_width < 1) throw std::invalid_argument("beam_decode: beam_width must be >= 1");
  if (max_symbols_per_frame < 1) {
    throw std::invalid_argument("beam_decode: max_symbols_per_frame must be >= 1");
  }

  std::vector<Hyp> beam(1);
  beam[0].pred_state = make_prediction_state(config);
  beam[0].dec_out = predict_step(params, config, beam[0].pred_state, -1);

  RecurrentState enc_state = make_encoder_state(config);
  for (int t = 0; t < frames.rows(); ++t) {
    const Vector enc = encode_step(params, config, enc_state,
                                   frames.row(t).transpose(), lang, use_adapters);
    for (Hyp& h : beam) h.asleep = false;

    // Within the frame: each round every awake hypothesis either takes
    // blank (sleeps until the next frame) or emits one symbol. Hypotheses
    // with identical tokens and sleep status are merged by log-sum.
    for (int round = 0; round <= max_symbols_per_frame; ++round) {
      bool any_awake = false;
      for (const Hyp& h : beam) any_awake |= !h.asleep;
      if (!any_awake) break;

      struct Cand {
        int parent;
        int symbol;  // -1 = carry/sleep
        double log_prob;
        bool asleep;
      };
      std::vector<Cand> cands;
      std::vector<std::vector<int>> cand_tokens;
      std::map<std::pair<std::vector<int>, bool>, int> index;
      const auto add_cand = [&](int parent, int symbol, double lp, bool asleep) {
        std::vector<int> toks = beam[parent].tokens;
        if (symbol >= 0) toks.push_back(symbol);
        const auto key = std::make_pair(toks, asleep);
        const auto it = index.find(key);
        if (it == index.end()) {
          index.emplace(key, static_cast<int>(cands.size()));
          cands.push_back({parent, symbol, lp, asleep});
          cand_tokens.push_back(std::move(toks));
        } else {
          cands[it->second].log_prob = log_add(cands[it->second].log_prob, lp);
        }
      };

      const bool may_emit = round < max_symbols_per_frame;
      for (int hi = 0; hi < static_cast<int>(beam.size()); ++hi) {
        const Hyp& h = beam[hi];
        if (h.asleep) {
          add_cand(hi, -1, h.log_prob, true);
          continue;
        }
        const Vector lps =
            log_probs_of(joint_step(params, config, enc, h.dec_out));
        add_cand(hi, -1, h.log_prob + lps[0], true);
        if (may_emit) {
          for (int v = 1; v < config.vocab_size; ++v) {
            add_cand(hi, v, h.log_prob + lps[v], false);
          }
        }
      }

      std::vector<int> order(cands.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (cands[a].log_prob != cands[b].log_prob) {
          return cands[a].log_prob > cands[b].log_prob;
        }
        return cand_tokens[a] < cand_tokens[b];
      });
      if (static_cast<int>(order.size()) > beam_width) order.resize(beam_width);

      std::vector<Hyp> next;
      next.reserve(order.size());
      for (const int ci : order) {
        const Cand& c = cands[ci];
        Hyp h;
        h.tokens = cand_tokens[ci];
        h.log_prob = c.log_prob;
        h.asleep = c.asleep;
        h.pred_state = beam[c.parent].pred_state;
        if (c.symbol >= 0) {
          h.dec_out = predict_step(params, config, h.pred_state, c.symbol);
        } else {
          h.dec_out = beam[c.parent].dec_out;
        }
        next.push_back(std::move(h));
      }
      beam = std::move(next);
    }
  }

  std::sort(beam.begin(), beam.end(), better);
  std::vector<BeamHypothesis> out;
  out.reserve(beam.size());
  for (const Hyp& h : beam) out.push_back({h.tokens, h.log_prob});
  return out;
}

}  // namespace rnnt
