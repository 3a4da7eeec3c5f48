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

#ifndef RNNT_TRAINER_H_
#define RNNT_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rnnt/corpus.h"
#include "rnnt/metrics.h"
#include "rnnt/model.h"
#include "rnnt/sampler.h"

namespace rnnt {

// One training run. Some model dimensions are resolved from the corpus at
// run start (input_dim from feature width and stacking, vocab_size from
// the grapheme inventory, k from the language list); the resolved copy is
// what gets checkpointed.
struct TrainConfig {
  ModelConfig model;
  double alpha = 0.25;
  int steps = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double grad_clip_norm = 5.0;
  double l2 = 0.0;  // used by monolingual baselines and adapter runs
  int eval_every = 0;  // 0 = evaluate at the end only
  std::uint64_t seed = 1;
  int left_context = 3;
  int downsample = 2;
  int max_symbols_per_frame = 5;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossRecord {
  int step = 0;
  double loss = 0.0;
};

struct EvalRecord {
  int step = 0;
  std::string lang;
  double wer = 0.0;
  double dev_loss = 0.0;
  long long script_substitutions = 0;
};

// Append-only run log; step indices are non-decreasing.
struct TrainLog {
  std::vector<LossRecord> losses;
  std::vector<EvalRecord> evals;
};

// Line-delimited JSON: {"step","loss"} and {"step","lang","wer","dev_loss",
// "script_substitutions"} records, merged in step order.
void write_train_log(const std::filesystem::path& path, const TrainLog& log);

struct LanguageEval {
  std::string code;
  WerReport report;
  double dev_loss = 0.0;
  long long utterances = 0;
};

struct EvalResult {
  std::vector<LanguageEval> languages;
  double average_wer = 0.0;
};

struct TrainResult {
  ModelConfig model;
  ParamStore params;
  TrainLog log;
  EvalResult final_eval;
};

// Adam with bias correction; updates trainable tensors only.
class Adam {
 public:
  Adam(const ParamStore& params, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8);

  void step(ParamStore& params, const ParamStore& grads);

 private:
  ParamStore m_;
  ParamStore v_;
  int t_ = 0;
  double lr_, beta1_, beta2_, eps_;
};

// Global-norm clipping over trainable tensors; returns the pre-clip norm.
double clip_global_norm(ParamStore& grads, double max_norm);

// Loss of one utterance: encode/predict/joint, log-softmax, lattice NLL.
double utterance_nll(const ParamStore& params, const ModelConfig& config,
                     const Matrix& stacked_frames, std::span<const int> labels,
                     std::optional<int> lang, bool use_adapters);

// Same, accumulating parameter gradients scaled by `scale` into grads.
// The returned loss is unscaled.
double utterance_grad(const ParamStore& params, const ModelConfig& config,
                      const Matrix& stacked_frames, std::span<const int> labels,
                      std::optional<int> lang, bool use_adapters, double scale,
                      ParamStore& grads);

// Greedy-decodes every test utterance with its true language id, scores
// with the transliteration rule, and reports per-language pooled WER plus
// mean per-utterance NLL on the same sets.
EvalResult evaluate(const ParamStore& params, const ModelConfig& config,
                    const Corpus& corpus, const GraphemeInventory& inventory,
                    const ScriptMap& script_map, int max_symbols_per_frame,
                    bool use_adapters, int left_context, int downsample);

// Stage 1: trains all base parameters (no adapters) on the multilingual
// corpus with the configured sampling alpha. Checkpoints land in out_dir
// (ckpt_<step>/ at every eval_every steps plus final/); pass an empty path
// to skip disk artifacts.
TrainResult train_stage1(const TrainConfig& config, const Corpus& corpus,
                         const std::filesystem::path& out_dir = {});

// Stage 2: freezes every base tensor, adds per-language adapter banks
// (zero up-projection), and trains only those. Aborts if any base tensor
// changed bit-wise by the end. Sampling honors the configured alpha;
// languages absent from the corpus are never drawn, so their banks keep
// the identity initialization.
TrainResult train_adapters(const ParamStore& base_params,
                           const ModelConfig& base_model, const TrainConfig& config,
                           const Corpus& corpus,
                           const std::filesystem::path& out_dir = {});

// Monolingual baseline: requires a single-language corpus and no language
// vector; honors the L2 coefficient.
TrainResult train_monolingual(const TrainConfig& config, const Corpus& corpus,
                              const std::filesystem::path& out_dir = {});

}  // namespace rnnt

#endif  // RNNT_TRAINER_H_
