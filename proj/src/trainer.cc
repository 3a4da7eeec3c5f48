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

#include "rnnt/trainer.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rnnt/checkpoint.h"
#include "rnnt/decoder.h"
#include "rnnt/loss.h"
#include "rnnt/rng.h"

namespace rnnt {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("TrainConfig: steps must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("TrainConfig: alpha outside [0,1]");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  }
  if (!(grad_clip_norm > 0.0)) {
    throw std::invalid_argument("TrainConfig: grad_clip_norm must be > 0");
  }
  if (l2 < 0.0) throw std::invalid_argument("TrainConfig: l2 must be >= 0");
  if (eval_every < 0) throw std::invalid_argument("TrainConfig: eval_every must be >= 0");
  if (left_context < 0 || downsample < 1) {
    throw std::invalid_argument("TrainConfig: invalid frame stacking");
  }
  if (max_symbols_per_frame < 1) {
    throw std::invalid_argument("TrainConfig: max_symbols_per_frame must be >= 1");
  }
}

json train_config_to_json(const TrainConfig& config) {
  return json{{"model", model_config_to_json(config.model)},
              {"alpha", config.alpha},
              {"steps", config.steps},
              {"batch_size", config.batch_size},
              {"learning_rate", config.learning_rate},
              {"grad_clip_norm", config.grad_clip_norm},
              {"l2", config.l2},
              {"eval_every", config.eval_every},
              {"seed", config.seed},
              {"left_context", config.left_context},
              {"downsample", config.downsample},
              {"max_symbols_per_frame", config.max_symbols_per_frame}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig config;
  if (j.contains("model")) {
    const json& m = j.at("model");
    config.model.input_dim = m.value("input_dim", config.model.input_dim);
    config.model.num_encoder_layers =
        m.value("num_encoder_layers", config.model.num_encoder_layers);
    config.model.lstm_units = m.value("lstm_units", config.model.lstm_units);
    config.model.projection_dim = m.value("projection_dim", config.model.projection_dim);
    config.model.num_prediction_layers =
        m.value("num_prediction_layers", config.model.num_prediction_layers);
    config.model.joint_dim = m.value("joint_dim", config.model.joint_dim);
    config.model.vocab_size = m.value("vocab_size", config.model.vocab_size);
    config.model.use_language_vector =
        m.value("use_language_vector", config.model.use_language_vector);
    config.model.k = m.value("k", config.model.k);
    config.model.adapter_bottleneck =
        m.value("adapter_bottleneck", config.model.adapter_bottleneck);
  }
  config.alpha = j.value("alpha", config.alpha);
  config.steps = j.value("steps", config.steps);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.learning_rate = j.value("learning_rate", config.learning_rate);
  config.grad_clip_norm = j.value("grad_clip_norm", config.grad_clip_norm);
  config.l2 = j.value("l2", config.l2);
  config.eval_every = j.value("eval_every", config.eval_every);
  config.seed = j.value("seed", config.seed);
  config.left_context = j.value("left_context", config.left_context);
  config.downsample = j.value("downsample", config.downsample);
  config.max_symbols_per_frame =
      j.value("max_symbols_per_frame", config.max_symbols_per_frame);
  config.validate();
  return config;
}

void write_train_log(const fs::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_train_log: cannot open " + path.string());
  std::size_t e = 0;
  const auto flush_evals_through = [&](int step) {
    while (e < log.evals.size() && log.evals[e].step <= step) {
      const EvalRecord& r = log.evals[e];
      out << json{{"step", r.step},
                  {"lang", r.lang},
                  {"wer", r.wer},
                  {"dev_loss", r.dev_loss},
                  {"script_substitutions", r.script_substitutions}}
                 .dump()
          << "\n";
      ++e;
    }
  };
  for (const LossRecord& r : log.losses) {
    flush_evals_through(r.step - 1);
    out << json{{"step", r.step}, {"loss", r.loss}}.dump() << "\n";
  }
  flush_evals_through(log.evals.empty() ? 0 : log.evals.back().step);
}

Adam::Adam(const ParamStore& params, double learning_rate, double beta1,
           double beta2, double epsilon)
    : m_(params.zeros_like()),
      v_(params.zeros_like()),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon) {}

void Adam::step(ParamStore& params, const ParamStore& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    NamedTensor& p = params.tensors()[i];
    if (!p.trainable) continue;
    const Matrix& g = grads.tensors()[i].value;
    Matrix& m = m_.tensors()[i].value;
    Matrix& v = v_.tensors()[i].value;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    p.value.array() -=
        lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }
}

double clip_global_norm(ParamStore& grads, double max_norm) {
  double sq = 0.0;
  for (const NamedTensor& t : grads.tensors()) {
    if (t.trainable) sq += t.value.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (NamedTensor& t : grads.tensors()) {
      if (t.trainable) t.value *= scale;
    }
  }
  return norm;
}

double utterance_nll(const ParamStore& params, const ModelConfig& config,
                     const Matrix& stacked_frames, std::span<const int> labels,
                     std::optional<int> lang, bool use_adapters) {
  const Matrix h_enc = encode(params, config, stacked_frames, lang, use_adapters);
  const Matrix h_dec = predict(params, config, labels);
  const Tensor3 logits = joint(params, config, h_enc, h_dec);
  return rnnt_loss(log_softmax(logits), labels);
}

double utterance_grad(const ParamStore& params, const ModelConfig& config,
                      const Matrix& stacked_frames, std::span<const int> labels,
                      std::optional<int> lang, bool use_adapters, double scale,
                      ParamStore& grads) {
  EncodeTrace enc_trace;
  PredictTrace pred_trace;
  JointTrace joint_trace;
  const Matrix h_enc =
      encode(params, config, stacked_frames, lang, use_adapters, &enc_trace);
  const Matrix h_dec = predict(params, config, labels, &pred_trace);
  const Tensor3 logits = joint(params, config, h_enc, h_dec, &joint_trace);

  Tensor3 grad_logits;
  const double nll = rnnt_loss(log_softmax(logits), labels, &grad_logits);
  if (scale != 1.0) {
    for (std::size_t i = 0; i < grad_logits.size(); ++i) grad_logits.data()[i] *= scale;
  }

  Matrix d_enc, d_dec;
  joint_backward(params, config, joint_trace, grad_logits, grads, &d_enc, &d_dec);
  encode_backward(params, config, enc_trace, d_enc, grads);
  predict_backward(params, config, pred_trace, d_dec, grads);
  return nll;
}

EvalResult evaluate(const ParamStore& params, const ModelConfig& config,
                    const Corpus& corpus, const GraphemeInventory& inventory,
                    const ScriptMap& script_map, int max_symbols_per_frame,
                    bool use_adapters, int left_context, int downsample) {
  EvalResult result;
  double wer_sum = 0.0;
  for (std::size_t l = 0; l < corpus.languages.size(); ++l) {
    const LanguageId& lang = corpus.languages[l];
    if (corpus.test.at(l).empty()) continue;  // no test data, no report
    LanguageEval eval;
    eval.code = lang.code;

    EditCounts pooled;
    long long ref_len = 0;
    double nll_sum = 0.0;
    for (const Utterance& utt : corpus.test.at(l)) {
      const Matrix stacked = stack_frames(utt.frames, left_context, downsample);
      const DecodeResult decoded =
          greedy_decode(params, config, stacked, static_cast<int>(l), use_adapters,
                        max_symbols_per_frame);
      const std::vector<std::string> hyp = inventory.decode_to_words(decoded.tokens);
      std::vector<std::string> ref;
      ref.reserve(utt.transcript.size());
      for (const Token& tok : utt.transcript) ref.push_back(tok.surface);

      const WerReport r = translit_wer(ref, hyp, lang.code, script_map);
      pooled.substitutions += r.substitutions;
      pooled.insertions += r.insertions;
      pooled.deletions += r.deletions;
      pooled.script_substitutions += r.script_substitutions;
      ref_len += r.reference_length;

      const std::vector<int> labels = inventory.encode_transcript(utt.transcript);
      nll_sum += utterance_nll(params, config, stacked, labels,
                               static_cast<int>(l), use_adapters);
    }
    eval.report = WerReport::from_counts(pooled, ref_len);
    eval.utterances = static_cast<long long>(corpus.test.at(l).size());
    eval.dev_loss = eval.utterances > 0 ? nll_sum / eval.utterances : 0.0;
    wer_sum += eval.report.wer;
    result.languages.push_back(std::move(eval));
  }
  if (!result.languages.empty()) {
    result.average_wer = wer_sum / static_cast<double>(result.languages.size());
  }
  return result;
}

namespace {

struct RunContext {
  GraphemeInventory inventory;
  ScriptMap script_map;
};

RunContext make_context(const Corpus& corpus) {
  RunContext ctx;
  ctx.inventory = build_grapheme_inventory(corpus);
  ctx.script_map = ScriptMap(corpus.script_map);
  return ctx;
}

ModelConfig resolve_model(const TrainConfig& config, const Corpus& corpus,
                          const GraphemeInventory& inventory) {
  if (corpus.train.empty()) {
    throw std::invalid_argument("train: corpus has no training utterances");
  }
  ModelConfig model = config.model;
  model.input_dim = static_cast<int>(corpus.train.front().frames.cols()) *
                    (config.left_context + 1);
  model.vocab_size = inventory.size();
  model.k = static_cast<int>(corpus.languages.size());
  return model;
}

std::string batch_composition(const Corpus& corpus, std::span<const int> batch) {
  std::string out;
  for (const int idx : batch) {
    if (!out.empty()) out += ",";
    out += corpus.train[idx].id;
  }
  return out;
}

void save_run_checkpoint(const fs::path& out_dir, const std::string& name,
                         const ModelConfig& model, const ParamStore& params,
                         const TrainConfig& config, const std::string& stage,
                         int step) {
  if (out_dir.empty()) return;
  json meta;
  meta["stage"] = stage;
  meta["step"] = step;
  meta["train_config_hash"] = json_hash_hex(train_config_to_json(config));
  meta["left_context"] = config.left_context;
  meta["downsample"] = config.downsample;
  meta["max_symbols_per_frame"] = config.max_symbols_per_frame;
  save_checkpoint(out_dir / name, model, params, meta);
}

std::string step_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%06d", step);
  return buf;
}

// Shared optimization loop. `resolved` must already carry final dimensions;
// adapter-stage callers pass trainable flags on `params` and use_adapters.
TrainResult run_training(const TrainConfig& config, const ModelConfig& resolved,
                         ParamStore params, const Corpus& corpus,
                         const RunContext& ctx, double sample_alpha,
                         bool use_adapters, const std::string& stage,
                         const fs::path& out_dir) {
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream cfg(out_dir / "config.json", std::ios::trunc);
    json resolved_cfg = train_config_to_json(config);
    resolved_cfg["model"] = model_config_to_json(resolved);
    resolved_cfg["alpha"] = sample_alpha;
    resolved_cfg["stage"] = stage;
    cfg << resolved_cfg.dump(2) << "\n";
  }

  const SamplingSchedule schedule = schedule_from_corpus(corpus, sample_alpha);
  BatchStream stream(corpus, schedule,
                     Rng::splitmix64(config.seed ^ Rng::fnv1a64("batch-stream")),
                     config.batch_size);

  Adam adam(params, config.learning_rate);
  ParamStore grads = params.zeros_like();
  TrainResult result;
  result.model = resolved;

  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
  for (int step = 1; step <= config.steps; ++step) {
    const std::vector<int> batch = stream.next_batch();
    grads.set_zero();
    double batch_loss = 0.0;
    for (const int idx : batch) {
      const Utterance& utt = corpus.train[idx];
      const Matrix stacked =
          stack_frames(utt.frames, config.left_context, config.downsample);
      const std::vector<int> labels = ctx.inventory.encode_transcript(utt.transcript);
      const double nll = utterance_grad(params, resolved, stacked, labels,
                                        utt.lang.index, use_adapters, inv_batch, grads);
      batch_loss += nll * inv_batch;
    }
    if (!std::isfinite(batch_loss)) {
      throw std::runtime_error("train: non-finite loss at step " +
                               std::to_string(step) + " (batch: " +
                               batch_composition(corpus, batch) + ")");
    }
    if (config.l2 > 0.0) {
      for (std::size_t i = 0; i < params.tensors().size(); ++i) {
        if (params.tensors()[i].trainable) {
          grads.tensors()[i].value += config.l2 * params.tensors()[i].value;
        }
      }
    }
    clip_global_norm(grads, config.grad_clip_norm);
    adam.step(params, grads);
    result.log.losses.push_back({step, batch_loss});

    if (config.eval_every > 0 && step % config.eval_every == 0 &&
        step != config.steps) {
      save_run_checkpoint(out_dir, step_name(step), resolved, params, config, stage,
                          step);
      const EvalResult eval =
          evaluate(params, resolved, corpus, ctx.inventory, ctx.script_map,
                   config.max_symbols_per_frame, use_adapters, config.left_context,
                   config.downsample);
      for (const LanguageEval& le : eval.languages) {
        result.log.evals.push_back({step, le.code, le.report.wer, le.dev_loss,
                                    le.report.script_substitutions});
      }
    }
  }

  result.final_eval =
      evaluate(params, resolved, corpus, ctx.inventory, ctx.script_map,
               config.max_symbols_per_frame, use_adapters, config.left_context,
               config.downsample);
  for (const LanguageEval& le : result.final_eval.languages) {
    result.log.evals.push_back({config.steps, le.code, le.report.wer, le.dev_loss,
                                le.report.script_substitutions});
  }
  save_run_checkpoint(out_dir, "final", resolved, params, config, stage,
                      config.steps);
  if (!out_dir.empty()) write_train_log(out_dir / "trainlog.jsonl", result.log);
  result.params = std::move(params);
  return result;
}

}  // namespace

TrainResult train_stage1(const TrainConfig& config, const Corpus& corpus,
                         const fs::path& out_dir) {
  config.validate();
  const RunContext ctx = make_context(corpus);
  ModelConfig model = resolve_model(config, corpus, ctx.inventory);
  model.adapter_bottleneck = 0;  // base parameters only in stage 1
  model.validate();
  ParamStore params = init_params(model, config.seed);
  return run_training(config, model, std::move(params), corpus, ctx, config.alpha,
                      /*use_adapters=*/false, "stage1", out_dir);
}

TrainResult train_adapters(const ParamStore& base_params,
                           const ModelConfig& base_model, const TrainConfig& config,
                           const Corpus& corpus, const fs::path& out_dir) {
  config.validate();
  if (config.model.adapter_bottleneck < 1) {
    throw std::invalid_argument("train_adapters: adapter_bottleneck must be >= 1");
  }
  const RunContext ctx = make_context(corpus);

  ModelConfig model = base_model;
  model.adapter_bottleneck = config.model.adapter_bottleneck;
  model.k = static_cast<int>(corpus.languages.size());
  model.validate();

  ParamStore params;
  for (const NamedTensor& t : base_params.tensors()) {
    if (t.is_adapter()) {
      for (int r = 0; r < t.value.rows(); ++r) {
        for (int c = 0; c < t.value.cols(); ++c) {
          if (t.value(r, c) != 0.0 && t.name.find(".up.") != std::string::npos) {
            throw std::invalid_argument(
                "train_adapters: base checkpoint has non-zero adapters");
          }
        }
      }
      continue;  // re-created below
    }
    params.add(t.name, static_cast<int>(t.value.rows()),
               static_cast<int>(t.value.cols()), t.partition);
    params.value(t.name) = t.value;
  }
  add_adapter_params(params, model,
                     Rng::splitmix64(config.seed ^ Rng::fnv1a64("adapters")));
  for (NamedTensor& t : params.tensors()) t.trainable = t.is_adapter();

  // Bit snapshot of the frozen partition for the post-hoc freeze audit.
  std::vector<Matrix> frozen;
  std::vector<std::string> frozen_names;
  for (const NamedTensor& t : params.tensors()) {
    if (!t.is_adapter()) {
      frozen.push_back(t.value);
      frozen_names.push_back(t.name);
    }
  }

  // Zero-data languages are excluded by the schedule at any alpha, so their
  // freshly initialized identity banks survive untouched.
  TrainResult result =
      run_training(config, model, std::move(params), corpus, ctx, config.alpha,
                   /*use_adapters=*/true, "adapters", out_dir);

  std::size_t fi = 0;
  for (const NamedTensor& t : result.params.tensors()) {
    if (t.is_adapter()) continue;
    const Matrix& before = frozen.at(fi);
    if (frozen_names.at(fi) != t.name ||
        before.rows() != t.value.rows() || before.cols() != t.value.cols() ||
        std::memcmp(before.data(), t.value.data(),
                    sizeof(double) * before.size()) != 0) {
      throw std::runtime_error("train_adapters: frozen tensor changed: " + t.name);
    }
    ++fi;
  }
  return result;
}

TrainResult train_monolingual(const TrainConfig& config, const Corpus& corpus,
                              const fs::path& out_dir) {
  config.validate();
  if (corpus.languages.size() != 1) {
    throw std::invalid_argument("train_monolingual: corpus must have exactly one language");
  }
  if (config.model.use_language_vector) {
    throw std::invalid_argument("train_monolingual: language vector not applicable");
  }
  const RunContext ctx = make_context(corpus);
  ModelConfig model = resolve_model(config, corpus, ctx.inventory);
  model.adapter_bottleneck = 0;
  model.validate();
  ParamStore params = init_params(model, config.seed);
  return run_training(config, model, std::move(params), corpus, ctx, config.alpha,
                      /*use_adapters=*/false, "monolingual", out_dir);
}

}  // namespace rnnt
