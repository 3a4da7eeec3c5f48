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

#ifndef RNNT_MODEL_H_
#define RNNT_MODEL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rnnt/types.h"

namespace rnnt {

// Network shape. Every dimension must be >= 1 except adapter_bottleneck,
// where 0 means "no adapter bank".
//
// The desk-scale default mirrors the full-size topology (8x2048/640 encoder,
// 2x2048/640 prediction, 640 joint, 256 bottleneck) at roughly 1/1000 scale
// so finite-difference checks stay tractable.
struct ModelConfig {
  int input_dim = 32;            // stacked feature width, excluding language vector
  int num_encoder_layers = 2;
  int lstm_units = 64;
  int projection_dim = 32;
  int num_prediction_layers = 1;
  int joint_dim = 32;
  int vocab_size = 0;            // includes blank at index 0
  bool use_language_vector = false;
  int k = 1;                     // language count
  int adapter_bottleneck = 0;    // 0 = no adapters

  int encoder_input_dim() const { return input_dim + (use_language_vector ? k : 0); }
  int embedding_dim() const { return projection_dim; }

  void validate() const;  // throws std::invalid_argument
};

// One named parameter tensor. Vectors are stored as n x 1 matrices.
// partition is "base" or "adapter:<language index>".
struct NamedTensor {
  std::string name;
  std::string partition;
  Matrix value;
  bool trainable = true;

  bool is_adapter() const { return partition.rfind("adapter:", 0) == 0; }
  std::size_t count() const { return static_cast<std::size_t>(value.size()); }
};

// Ordered, name-addressable parameter collection shared by the model, the
// optimizer, and the checkpoint format. Order is the construction order and
// is part of the on-disk contract.
class ParamStore {
 public:
  Matrix& add(const std::string& name, int rows, int cols,
              const std::string& partition = "base");

  bool has(const std::string& name) const;
  NamedTensor& at(const std::string& name);
  const NamedTensor& at(const std::string& name) const;
  Matrix& value(const std::string& name) { return at(name).value; }
  const Matrix& value(const std::string& name) const { return at(name).value; }

  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }

  // Same names/shapes/partitions, all values zero.
  ParamStore zeros_like() const;
  void set_zero();

  std::size_t total_parameters() const;

 private:
  std::vector<NamedTensor> tensors_;
  std::map<std::string, int> index_;
};

// Exact tensor-count accounting by partition. Adapter banks are identical
// across languages, so one per-language figure suffices.
struct ParamCounts {
  long long base = 0;
  long long adapter_total = 0;
  long long adapter_per_language = 0;
  double adapter_fraction = 0.0;  // adapter_per_language / base
};

ParamCounts count_parameters(const ParamStore& params);

// One-hot language indicator of width k.
Vector make_language_vector(int lang_index, int k);

// Fresh parameters for the config. Each tensor is initialized from a
// sub-stream derived from (seed, tensor name), so the presence of adapters
// does not perturb base initialization. Weights are uniform +-1/sqrt(fan_in);
// biases zero except the LSTM forget gate (+1); adapter up-projections start
// at zero so adapted and base models coincide exactly.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

// Adds zero-up adapter banks to a store that lacks them.
void add_adapter_params(ParamStore& params, const ModelConfig& config,
                        std::uint64_t seed);

// Standalone adapter parameters (the per-layer, per-language module).
struct AdapterParams {
  Vector ln_gain;
  Vector ln_bias;
  Matrix down;       // [bottleneck x projection_dim]
  Vector down_bias;  // [bottleneck]
  Matrix up;         // [projection_dim x bottleneck]
  Vector up_bias;    // [projection_dim]
};

// h + up * relu(down * layernorm(h) + down_bias) + up_bias, eps = 1e-6.
// With zero `up` and `up_bias` this is exactly the identity.
Vector adapter_apply(const AdapterParams& adapter, const Vector& h);

// Copy of one adapter bank out of a store.
AdapterParams adapter_at(const ParamStore& params, int lang_index, int layer);

// --- forward traces (caches consumed by the backward passes) ---

struct LstmLayerTrace {
  Matrix x;      // [in_dim x T] layer inputs
  Matrix i, f, g, o;  // [H x T] activated gates
  Matrix c;      // [H x T] cell states
  Matrix h;      // [H x T] o * tanh(c)
  Matrix r;      // [P x T] projection outputs (also the recurrent input)
};

struct AdapterTrace {
  Matrix input;   // [P x T]
  Matrix xhat;    // [P x T] normalized pre-gain input
  Vector rstd;    // [T] 1/sqrt(var + eps)
  Matrix bottleneck_pre;  // [B x T]
  Matrix bottleneck;      // [B x T] relu output
};

struct EncodeTrace {
  std::vector<LstmLayerTrace> layers;
  std::vector<AdapterTrace> adapters;  // parallel to layers when enabled
  bool used_adapters = false;
  int lang = -1;
};

struct PredictTrace {
  std::vector<LstmLayerTrace> layers;
  std::vector<int> labels;
};

struct JointTrace {
  Matrix h_enc;  // [T x P] as passed in
  Matrix h_dec;  // [(U+1) x P]
  Tensor3 z;     // [T x (U+1) x joint_dim] tanh activations
};

// --- forward/backward passes ---

// frames is [T x input_dim] (stacked features, no language vector; the
// one-hot is concatenated internally when configured). Output row t is a
// function of frames 0..t only. lang is required when use_adapters or
// use_language_vector is set.
Matrix encode(const ParamStore& params, const ModelConfig& config,
              const Matrix& frames, std::optional<int> lang, bool use_adapters,
              EncodeTrace* trace = nullptr);

// labels are non-blank vocabulary indices (blank = 0 rejected). Output has
// U+1 rows; row 0 is the start context, row u depends on labels[0..u-1].
Matrix predict(const ParamStore& params, const ModelConfig& config,
               std::span<const int> labels, PredictTrace* trace = nullptr);

// logits[t][u] = W_out * tanh(A * h_enc[t] + B * h_dec[u] + b).
Tensor3 joint(const ParamStore& params, const ModelConfig& config,
              const Matrix& h_enc, const Matrix& h_dec,
              JointTrace* trace = nullptr);

// Accumulate parameter gradients. d_enc/d_dec receive dLoss/dh when non-null.
void joint_backward(const ParamStore& params, const ModelConfig& config,
                    const JointTrace& trace, const Tensor3& grad_logits,
                    ParamStore& grads, Matrix* d_enc, Matrix* d_dec);

void encode_backward(const ParamStore& params, const ModelConfig& config,
                     const EncodeTrace& trace, const Matrix& d_output,
                     ParamStore& grads);

void predict_backward(const ParamStore& params, const ModelConfig& config,
                      const PredictTrace& trace, const Matrix& d_output,
                      ParamStore& grads);

// --- streaming single-step evaluation (decoder path) ---

// Per-layer LSTM carry. Causal by construction: advancing with frame t
// reads nothing beyond t.
struct RecurrentState {
  std::vector<Vector> c;  // [H] per layer
  std::vector<Vector> r;  // [P] per layer
};

RecurrentState make_encoder_state(const ModelConfig& config);
RecurrentState make_prediction_state(const ModelConfig& config);

// Consumes one stacked frame, returns the top-layer activation [P].
Vector encode_step(const ParamStore& params, const ModelConfig& config,
                   RecurrentState& state, const Vector& frame,
                   std::optional<int> lang, bool use_adapters);

// Advances the prediction network by one label; label < 0 means the start
// context (zero embedding input).
Vector predict_step(const ParamStore& params, const ModelConfig& config,
                    RecurrentState& state, int label);

// Joint evaluated at a single (enc, dec) pair -> logits [V].
Vector joint_step(const ParamStore& params, const ModelConfig& config,
                  const Vector& h_enc, const Vector& h_dec);

}  // namespace rnnt

#endif  // RNNT_MODEL_H_
