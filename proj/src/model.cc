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

#include "rnnt/model.h"

#include <cmath>
#include <stdexcept>

#include "rnnt/rng.h"

namespace rnnt {

namespace {

constexpr double kLayerNormEps = 1e-6;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string enc_name(int layer, const char* leaf) {
  return "encoder.l" + std::to_string(layer) + "." + leaf;
}

std::string pred_name(int layer, const char* leaf) {
  return "prediction.l" + std::to_string(layer) + "." + leaf;
}

std::string adapter_name(int lang, int layer, const char* leaf) {
  return "adapter.lang" + std::to_string(lang) + ".l" + std::to_string(layer) + "." + leaf;
}

struct LstmView {
  const Matrix* W;
  const Matrix* R;
  const Matrix* b;
  const Matrix* proj;
};

LstmView lstm_view(const ParamStore& params, const std::string& prefix) {
  return {&params.value(prefix + ".lstm.W"), &params.value(prefix + ".lstm.R"),
          &params.value(prefix + ".lstm.b"), &params.value(prefix + ".proj.W")};
}

struct AdapterView {
  const Matrix* ln_gain;
  const Matrix* ln_bias;
  const Matrix* down;
  const Matrix* down_b;
  const Matrix* up;
  const Matrix* up_b;
};

AdapterView adapter_view(const ParamStore& params, int lang, int layer) {
  return {&params.value(adapter_name(lang, layer, "ln_gain")),
          &params.value(adapter_name(lang, layer, "ln_bias")),
          &params.value(adapter_name(lang, layer, "down.W")),
          &params.value(adapter_name(lang, layer, "down.b")),
          &params.value(adapter_name(lang, layer, "up.W")),
          &params.value(adapter_name(lang, layer, "up.b"))};
}

// One LSTM cell step followed by the recurrent projection. Gate order in
// the stacked weight matrices is [input; forget; cell; output].
void lstm_step(const LstmView& v, const Eigen::Ref<const Vector>& x,
               const Vector& c_prev, const Vector& r_prev, Vector& i, Vector& f,
               Vector& g, Vector& o, Vector& c, Vector& h, Vector& r) {
  const int units = static_cast<int>(c_prev.size());
  Vector pre = (*v.W) * x + (*v.R) * r_prev + v.b->col(0);
  i.resize(units);
  f.resize(units);
  g.resize(units);
  o.resize(units);
  for (int j = 0; j < units; ++j) {
    i[j] = sigmoid(pre[j]);
    f[j] = sigmoid(pre[units + j]);
    g[j] = std::tanh(pre[2 * units + j]);
    o[j] = sigmoid(pre[3 * units + j]);
  }
  c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  h = o.cwiseProduct(c.array().tanh().matrix());
  r.noalias() = (*v.proj) * h;
}

// Adapter applied to one activation column. Fills the trace column when
// trace buffers are non-null.
void adapter_step(const AdapterView& v, const Eigen::Ref<const Vector>& input,
                  Vector& out, Vector* xhat_out, double* rstd_out,
                  Vector* pre_out, Vector* relu_out) {
  const int p = static_cast<int>(input.size());
  const double mu = input.mean();
  Vector xc = input.array() - mu;
  const double var = xc.squaredNorm() / p;
  const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
  Vector xhat = xc * rstd;
  Vector normed = v.ln_gain->col(0).cwiseProduct(xhat) + v.ln_bias->col(0);
  Vector pre = (*v.down) * normed + v.down_b->col(0);
  Vector relu = pre.cwiseMax(0.0);
  out = input + (*v.up) * relu + v.up_b->col(0);
  if (xhat_out) *xhat_out = xhat;
  if (rstd_out) *rstd_out = rstd;
  if (pre_out) *pre_out = pre;
  if (relu_out) *relu_out = relu;
}

void check_lang(const ModelConfig& config, std::optional<int> lang, bool needed,
                const char* why) {
  if (!needed) return;
  if (!lang.has_value()) {
    throw std::invalid_argument(std::string("encode: language id required for ") + why);
  }
  if (*lang < 0 || *lang >= config.k) {
    throw std::invalid_argument("encode: language index out of range");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (input_dim < 1 || num_encoder_layers < 1 || lstm_units < 1 ||
      projection_dim < 1 || num_prediction_layers < 1 || joint_dim < 1) {
    throw std::invalid_argument("ModelConfig: dimensions must be >= 1");
  }
  if (vocab_size < 2) {
    throw std::invalid_argument("ModelConfig: vocab_size must include blank and >= 2");
  }
  if (k < 1) throw std::invalid_argument("ModelConfig: k must be >= 1");
  if (adapter_bottleneck < 0) {
    throw std::invalid_argument("ModelConfig: adapter_bottleneck must be >= 0");
  }
}

Matrix& ParamStore::add(const std::string& name, int rows, int cols,
                        const std::string& partition) {
  if (index_.count(name)) {
    throw std::invalid_argument("ParamStore: duplicate tensor name " + name);
  }
  index_[name] = static_cast<int>(tensors_.size());
  tensors_.push_back({name, partition, Matrix::Zero(rows, cols), true});
  return tensors_.back().value;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

NamedTensor& ParamStore::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no tensor named " + name);
  return tensors_[it->second];
}

const NamedTensor& ParamStore::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no tensor named " + name);
  return tensors_[it->second];
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const NamedTensor& t : tensors_) {
    out.add(t.name, static_cast<int>(t.value.rows()), static_cast<int>(t.value.cols()),
            t.partition);
    out.tensors_.back().trainable = t.trainable;
  }
  return out;
}

void ParamStore::set_zero() {
  for (NamedTensor& t : tensors_) t.value.setZero();
}

std::size_t ParamStore::total_parameters() const {
  std::size_t n = 0;
  for (const NamedTensor& t : tensors_) n += t.count();
  return n;
}

ParamCounts count_parameters(const ParamStore& params) {
  ParamCounts counts;
  std::map<std::string, long long> per_partition;
  for (const NamedTensor& t : params.tensors()) {
    if (t.is_adapter()) {
      counts.adapter_total += static_cast<long long>(t.count());
      per_partition[t.partition] += static_cast<long long>(t.count());
    } else {
      counts.base += static_cast<long long>(t.count());
    }
  }
  if (!per_partition.empty()) {
    counts.adapter_per_language = counts.adapter_total /
                                  static_cast<long long>(per_partition.size());
  }
  if (counts.base > 0) {
    counts.adapter_fraction = static_cast<double>(counts.adapter_per_language) /
                              static_cast<double>(counts.base);
  }
  return counts;
}

Vector make_language_vector(int lang_index, int k) {
  if (k < 1) throw std::invalid_argument("make_language_vector: k must be >= 1");
  if (lang_index < 0 || lang_index >= k) {
    throw std::invalid_argument("make_language_vector: index out of range");
  }
  Vector v = Vector::Zero(k);
  v[lang_index] = 1.0;
  return v;
}

namespace {

void init_uniform(Matrix& m, Rng rng, int fan_in) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-s, s);
  }
}

void init_lstm_stack(ParamStore& params, const Rng& root, const std::string& prefix,
                     int in_dim, int units, int proj_dim) {
  Matrix& W = params.add(prefix + ".lstm.W", 4 * units, in_dim);
  init_uniform(W, root.split(prefix + ".lstm.W"), in_dim);
  Matrix& R = params.add(prefix + ".lstm.R", 4 * units, proj_dim);
  init_uniform(R, root.split(prefix + ".lstm.R"), proj_dim);
  Matrix& b = params.add(prefix + ".lstm.b", 4 * units, 1);
  b.block(units, 0, units, 1).setOnes();  // forget-gate bias
  Matrix& proj = params.add(prefix + ".proj.W", proj_dim, units);
  init_uniform(proj, root.split(prefix + ".proj.W"), units);
}

}  // namespace

ParamStore init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ParamStore params;
  const Rng root(seed);

  int in_dim = config.encoder_input_dim();
  for (int l = 0; l < config.num_encoder_layers; ++l) {
    init_lstm_stack(params, root, "encoder.l" + std::to_string(l), in_dim,
                    config.lstm_units, config.projection_dim);
    in_dim = config.projection_dim;
  }

  Matrix& emb = params.add("prediction.embedding", config.vocab_size - 1,
                           config.embedding_dim());
  init_uniform(emb, root.split("prediction.embedding"), config.embedding_dim());
  in_dim = config.embedding_dim();
  for (int l = 0; l < config.num_prediction_layers; ++l) {
    init_lstm_stack(params, root, "prediction.l" + std::to_string(l), in_dim,
                    config.lstm_units, config.projection_dim);
    in_dim = config.projection_dim;
  }

  Matrix& A = params.add("joint.enc.W", config.joint_dim, config.projection_dim);
  init_uniform(A, root.split("joint.enc.W"), config.projection_dim);
  Matrix& B = params.add("joint.dec.W", config.joint_dim, config.projection_dim);
  init_uniform(B, root.split("joint.dec.W"), config.projection_dim);
  params.add("joint.b", config.joint_dim, 1);
  Matrix& W_out = params.add("joint.out.W", config.vocab_size, config.joint_dim);
  init_uniform(W_out, root.split("joint.out.W"), config.joint_dim);

  if (config.adapter_bottleneck > 0) add_adapter_params(params, config, seed);
  return params;
}

void add_adapter_params(ParamStore& params, const ModelConfig& config,
                        std::uint64_t seed) {
  if (config.adapter_bottleneck < 1) {
    throw std::invalid_argument("add_adapter_params: bottleneck must be >= 1");
  }
  const Rng root(seed);
  const int p = config.projection_dim;
  const int bn = config.adapter_bottleneck;
  for (int lang = 0; lang < config.k; ++lang) {
    const std::string partition = "adapter:" + std::to_string(lang);
    for (int l = 0; l < config.num_encoder_layers; ++l) {
      Matrix& gain = params.add(adapter_name(lang, l, "ln_gain"), p, 1, partition);
      gain.setOnes();
      params.add(adapter_name(lang, l, "ln_bias"), p, 1, partition);
      Matrix& down = params.add(adapter_name(lang, l, "down.W"), bn, p, partition);
      init_uniform(down, root.split(adapter_name(lang, l, "down.W")), p);
      // Positive bias keeps every relu unit live at initialization. The
      // layer-normalized inputs concentrate in a narrow cone, so with a
      // zero bias a whole bottleneck can start dead for one language and
      // then never receive gradient; 1.0 dominates the typical |down.x|.
      Matrix& down_b = params.add(adapter_name(lang, l, "down.b"), bn, 1, partition);
      down_b.setConstant(1.0);
      // Up-projection starts at zero: the adapted model equals the base.
      params.add(adapter_name(lang, l, "up.W"), p, bn, partition);
      params.add(adapter_name(lang, l, "up.b"), p, 1, partition);
    }
  }
}

Vector adapter_apply(const AdapterParams& adapter, const Vector& h) {
  const int p = static_cast<int>(h.size());
  if (adapter.ln_gain.size() != p || adapter.ln_bias.size() != p ||
      adapter.down.cols() != p || adapter.up.rows() != p ||
      adapter.down.rows() != adapter.down_bias.size() ||
      adapter.up.cols() != adapter.down.rows() || adapter.up_bias.size() != p) {
    throw std::invalid_argument("adapter_apply: shape mismatch");
  }
  const double mu = h.mean();
  Vector xc = h.array() - mu;
  const double rstd = 1.0 / std::sqrt(xc.squaredNorm() / p + kLayerNormEps);
  Vector normed = adapter.ln_gain.cwiseProduct(xc * rstd) + adapter.ln_bias;
  Vector relu = (adapter.down * normed + adapter.down_bias).cwiseMax(0.0);
  return h + adapter.up * relu + adapter.up_bias;
}

AdapterParams adapter_at(const ParamStore& params, int lang_index, int layer) {
  const AdapterView v = adapter_view(params, lang_index, layer);
  AdapterParams out;
  out.ln_gain = v.ln_gain->col(0);
  out.ln_bias = v.ln_bias->col(0);
  out.down = *v.down;
  out.down_bias = v.down_b->col(0);
  out.up = *v.up;
  out.up_bias = v.up_b->col(0);
  return out;
}

Matrix encode(const ParamStore& params, const ModelConfig& config,
              const Matrix& frames, std::optional<int> lang, bool use_adapters,
              EncodeTrace* trace) {
  if (frames.cols() != config.input_dim) {
    throw std::invalid_argument("encode: frame width does not match config.input_dim");
  }
  if (frames.rows() < 1) throw std::invalid_argument("encode: empty input");
  check_lang(config, lang, config.use_language_vector, "the language vector");
  check_lang(config, lang, use_adapters, "adapter selection");
  if (use_adapters &&
      !params.has(adapter_name(lang.value(), 0, "ln_gain"))) {
    throw std::invalid_argument("encode: adapter bank missing for language " +
                                std::to_string(lang.value()));
  }

  const int t_len = static_cast<int>(frames.rows());
  Matrix x(config.encoder_input_dim(), t_len);
  x.topRows(config.input_dim) = frames.transpose();
  if (config.use_language_vector) {
    x.bottomRows(config.k).colwise() = make_language_vector(*lang, config.k);
  }

  if (trace) {
    trace->layers.assign(config.num_encoder_layers, {});
    trace->adapters.assign(use_adapters ? config.num_encoder_layers : 0, {});
    trace->used_adapters = use_adapters;
    trace->lang = lang.value_or(-1);
  }

  Vector i, f, g, o, c, h, r;
  Vector c_prev, r_prev, adapted, xhat, pre, relu;
  for (int layer = 0; layer < config.num_encoder_layers; ++layer) {
    const LstmView v = lstm_view(params, "encoder.l" + std::to_string(layer));
    LstmLayerTrace* lt = trace ? &trace->layers[layer] : nullptr;
    AdapterTrace* at = (trace && use_adapters) ? &trace->adapters[layer] : nullptr;
    if (lt) {
      lt->x = x;
      lt->i.resize(config.lstm_units, t_len);
      lt->f.resize(config.lstm_units, t_len);
      lt->g.resize(config.lstm_units, t_len);
      lt->o.resize(config.lstm_units, t_len);
      lt->c.resize(config.lstm_units, t_len);
      lt->h.resize(config.lstm_units, t_len);
      lt->r.resize(config.projection_dim, t_len);
    }
    if (at) {
      at->input.resize(config.projection_dim, t_len);
      at->xhat.resize(config.projection_dim, t_len);
      at->rstd.resize(t_len);
      at->bottleneck_pre.resize(config.adapter_bottleneck, t_len);
      at->bottleneck.resize(config.adapter_bottleneck, t_len);
    }
    const AdapterView av = use_adapters ? adapter_view(params, *lang, layer)
                                        : AdapterView{};
    Matrix next(config.projection_dim, t_len);
    c_prev = Vector::Zero(config.lstm_units);
    r_prev = Vector::Zero(config.projection_dim);
    for (int t = 0; t < t_len; ++t) {
      lstm_step(v, x.col(t), c_prev, r_prev, i, f, g, o, c, h, r);
      if (lt) {
        lt->i.col(t) = i;
        lt->f.col(t) = f;
        lt->g.col(t) = g;
        lt->o.col(t) = o;
        lt->c.col(t) = c;
        lt->h.col(t) = h;
        lt->r.col(t) = r;
      }
      if (use_adapters) {
        double rstd = 0.0;
        adapter_step(av, r, adapted, at ? &xhat : nullptr, at ? &rstd : nullptr,
                     at ? &pre : nullptr, at ? &relu : nullptr);
        if (at) {
          at->input.col(t) = r;
          at->xhat.col(t) = xhat;
          at->rstd[t] = rstd;
          at->bottleneck_pre.col(t) = pre;
          at->bottleneck.col(t) = relu;
        }
        next.col(t) = adapted;
      } else {
        next.col(t) = r;
      }
      c_prev = c;
      r_prev = r;
    }
    x = std::move(next);
  }
  return x.transpose();
}

Matrix predict(const ParamStore& params, const ModelConfig& config,
               std::span<const int> labels, PredictTrace* trace) {
  for (const int y : labels) {
    if (y <= 0 || y >= config.vocab_size) {
      throw std::invalid_argument("predict: labels must be non-blank vocab indices");
    }
  }
  const int u_len = static_cast<int>(labels.size()) + 1;
  const Matrix& emb = params.value("prediction.embedding");
  Matrix x = Matrix::Zero(config.embedding_dim(), u_len);
  for (int u = 1; u < u_len; ++u) x.col(u) = emb.row(labels[u - 1] - 1).transpose();

  if (trace) {
    trace->layers.assign(config.num_prediction_layers, {});
    trace->labels.assign(labels.begin(), labels.end());
  }

  Vector i, f, g, o, c, h, r;
  Vector c_prev, r_prev;
  for (int layer = 0; layer < config.num_prediction_layers; ++layer) {
    const LstmView v = lstm_view(params, "prediction.l" + std::to_string(layer));
    LstmLayerTrace* lt = trace ? &trace->layers[layer] : nullptr;
    if (lt) {
      lt->x = x;
      lt->i.resize(config.lstm_units, u_len);
      lt->f.resize(config.lstm_units, u_len);
      lt->g.resize(config.lstm_units, u_len);
      lt->o.resize(config.lstm_units, u_len);
      lt->c.resize(config.lstm_units, u_len);
      lt->h.resize(config.lstm_units, u_len);
      lt->r.resize(config.projection_dim, u_len);
    }
    Matrix next(config.projection_dim, u_len);
    c_prev = Vector::Zero(config.lstm_units);
    r_prev = Vector::Zero(config.projection_dim);
    for (int u = 0; u < u_len; ++u) {
      lstm_step(v, x.col(u), c_prev, r_prev, i, f, g, o, c, h, r);
      if (lt) {
        lt->i.col(u) = i;
        lt->f.col(u) = f;
        lt->g.col(u) = g;
        lt->o.col(u) = o;
        lt->c.col(u) = c;
        lt->h.col(u) = h;
        lt->r.col(u) = r;
      }
      next.col(u) = r;
      c_prev = c;
      r_prev = r;
    }
    x = std::move(next);
  }
  return x.transpose();
}

Tensor3 joint(const ParamStore& params, const ModelConfig& config,
              const Matrix& h_enc, const Matrix& h_dec, JointTrace* trace) {
  if (h_enc.cols() != config.projection_dim || h_dec.cols() != config.projection_dim) {
    throw std::invalid_argument("joint: activation width mismatch");
  }
  const Matrix& A = params.value("joint.enc.W");
  const Matrix& B = params.value("joint.dec.W");
  const Vector b = params.value("joint.b").col(0);
  const Matrix& W_out = params.value("joint.out.W");

  const int t_len = static_cast<int>(h_enc.rows());
  const int u_len = static_cast<int>(h_dec.rows());
  const Matrix ae = A * h_enc.transpose();  // [J x T]
  const Matrix bd = B * h_dec.transpose();  // [J x U+1]

  Tensor3 logits(t_len, u_len, config.vocab_size);
  if (trace) {
    trace->h_enc = h_enc;
    trace->h_dec = h_dec;
    trace->z = Tensor3(t_len, u_len, config.joint_dim);
  }
  Vector z(config.joint_dim), out(config.vocab_size);
  for (int t = 0; t < t_len; ++t) {
    for (int u = 0; u < u_len; ++u) {
      z = (ae.col(t) + bd.col(u) + b).array().tanh();
      out.noalias() = W_out * z;
      for (int v = 0; v < config.vocab_size; ++v) logits(t, u, v) = out[v];
      if (trace) {
        for (int j = 0; j < config.joint_dim; ++j) trace->z(t, u, j) = z[j];
      }
    }
  }
  return logits;
}

void joint_backward(const ParamStore& params, const ModelConfig& config,
                    const JointTrace& trace, const Tensor3& grad_logits,
                    ParamStore& grads, Matrix* d_enc, Matrix* d_dec) {
  const Matrix& A = params.value("joint.enc.W");
  const Matrix& B = params.value("joint.dec.W");
  const Matrix& W_out = params.value("joint.out.W");
  Matrix& dA = grads.value("joint.enc.W");
  Matrix& dB = grads.value("joint.dec.W");
  Matrix& db = grads.value("joint.b");
  Matrix& dW_out = grads.value("joint.out.W");

  const int t_len = trace.z.dim0();
  const int u_len = trace.z.dim1();
  const int j_dim = config.joint_dim;
  const int v_dim = config.vocab_size;
  if (grad_logits.dim0() != t_len || grad_logits.dim1() != u_len ||
      grad_logits.dim2() != v_dim) {
    throw std::invalid_argument("joint_backward: gradient shape mismatch");
  }

  if (d_enc) *d_enc = Matrix::Zero(t_len, config.projection_dim);
  if (d_dec) *d_dec = Matrix::Zero(u_len, config.projection_dim);

  Vector z(j_dim), dz(j_dim), dpre(j_dim);
  for (int t = 0; t < t_len; ++t) {
    for (int u = 0; u < u_len; ++u) {
      const Eigen::Map<const Vector> gl(grad_logits.data() +
                                            (static_cast<std::size_t>(t) * u_len + u) * v_dim,
                                        v_dim);
      const Eigen::Map<const Vector> zv(trace.z.data() +
                                            (static_cast<std::size_t>(t) * u_len + u) * j_dim,
                                        j_dim);
      dz.noalias() = W_out.transpose() * gl;
      dpre = dz.cwiseProduct((1.0 - zv.array().square()).matrix());
      dW_out.noalias() += gl * zv.transpose();
      db.col(0) += dpre;
      dA.noalias() += dpre * trace.h_enc.row(t);
      dB.noalias() += dpre * trace.h_dec.row(u);
      if (d_enc) d_enc->row(t).noalias() += dpre.transpose() * A;
      if (d_dec) d_dec->row(u).noalias() += dpre.transpose() * B;
    }
  }
}

namespace {

// Reverse pass through one LSTM+projection layer. d_r_ext is the gradient
// arriving at the projection outputs from above; returns gradients w.r.t.
// the layer inputs.
Matrix lstm_backward(const LstmView& v, const LstmLayerTrace& lt,
                     const Matrix& d_r_ext, Matrix& dW, Matrix& dR, Matrix& db,
                     Matrix& dproj) {
  const int t_len = static_cast<int>(lt.x.cols());
  const int units = static_cast<int>(lt.c.rows());
  const int in_dim = static_cast<int>(lt.x.rows());

  Matrix dx(in_dim, t_len);
  Vector dc_next = Vector::Zero(units);
  Vector dpre_next;  // empty until the first processed step
  Vector dr(lt.r.rows()), dh(units), dc(units), dpre(4 * units);
  for (int t = t_len - 1; t >= 0; --t) {
    dr = d_r_ext.col(t);
    if (dpre_next.size() > 0) dr.noalias() += v.R->transpose() * dpre_next;
    dproj.noalias() += dr * lt.h.col(t).transpose();
    dh.noalias() = v.proj->transpose() * dr;

    const auto i = lt.i.col(t).array();
    const auto f = lt.f.col(t).array();
    const auto g = lt.g.col(t).array();
    const auto o = lt.o.col(t).array();
    const auto tanh_c = lt.c.col(t).array().tanh();

    dc = (dh.array() * o * (1.0 - tanh_c.square())).matrix() + dc_next;
    const Vector c_prev = t > 0 ? Vector(lt.c.col(t - 1)) : Vector::Zero(units);
    const Vector r_prev = t > 0 ? Vector(lt.r.col(t - 1))
                                : Vector::Zero(lt.r.rows());

    dpre.segment(0, units) = (dc.array() * g * i * (1.0 - i)).matrix();
    dpre.segment(units, units) =
        (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
    dpre.segment(2 * units, units) = (dc.array() * i * (1.0 - g.square())).matrix();
    dpre.segment(3 * units, units) =
        (dh.array() * tanh_c * o * (1.0 - o)).matrix();

    dW.noalias() += dpre * lt.x.col(t).transpose();
    dR.noalias() += dpre * r_prev.transpose();
    db.col(0) += dpre;
    dx.col(t).noalias() = v.W->transpose() * dpre;

    dc_next = dc.cwiseProduct(lt.f.col(t));
    dpre_next = dpre;
  }
  return dx;
}

// Reverse pass through one adapter, column-wise. d_out is consumed in
// place and becomes the gradient w.r.t. the adapter input.
void adapter_backward(const AdapterView& v, const AdapterTrace& at, Matrix& d_out,
                      Matrix& d_gain, Matrix& d_bias, Matrix& d_down,
                      Matrix& d_down_b, Matrix& d_up, Matrix& d_up_b) {
  const int t_len = static_cast<int>(at.input.cols());
  const int p = static_cast<int>(at.input.rows());
  Vector drelu, dpre, dnormed, dxhat, dx;
  for (int t = 0; t < t_len; ++t) {
    const auto dout = d_out.col(t);
    d_up.noalias() += dout * at.bottleneck.col(t).transpose();
    d_up_b.col(0) += dout;
    drelu.noalias() = v.up->transpose() * dout;
    dpre = drelu.cwiseProduct(
        (at.bottleneck_pre.col(t).array() > 0.0).cast<double>().matrix());
    const auto xhat = at.xhat.col(t);
    dnormed.noalias() = v.down->transpose() * dpre;
    d_down.noalias() += dpre * (v.ln_gain->col(0).cwiseProduct(xhat) +
                                v.ln_bias->col(0)).transpose();
    d_down_b.col(0) += dpre;
    d_gain.col(0) += dnormed.cwiseProduct(xhat);
    d_bias.col(0) += dnormed;
    dxhat = dnormed.cwiseProduct(v.ln_gain->col(0));
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = dxhat.cwiseProduct(xhat).mean();
    dx = at.rstd[t] *
         (dxhat.array() - mean_dxhat - xhat.array() * mean_dxhat_xhat).matrix();
    d_out.col(t) = dout + dx;  // residual path plus layernorm path
  }
  (void)p;
}

}  // namespace

void encode_backward(const ParamStore& params, const ModelConfig& config,
                     const EncodeTrace& trace, const Matrix& d_output,
                     ParamStore& grads) {
  Matrix d = d_output.transpose();  // [P x T]
  for (int layer = config.num_encoder_layers - 1; layer >= 0; --layer) {
    if (trace.used_adapters) {
      const AdapterView v = adapter_view(params, trace.lang, layer);
      adapter_backward(v, trace.adapters[layer], d,
                       grads.value(adapter_name(trace.lang, layer, "ln_gain")),
                       grads.value(adapter_name(trace.lang, layer, "ln_bias")),
                       grads.value(adapter_name(trace.lang, layer, "down.W")),
                       grads.value(adapter_name(trace.lang, layer, "down.b")),
                       grads.value(adapter_name(trace.lang, layer, "up.W")),
                       grads.value(adapter_name(trace.lang, layer, "up.b")));
    }
    const std::string prefix = "encoder.l" + std::to_string(layer);
    const LstmView v = lstm_view(params, prefix);
    d = lstm_backward(v, trace.layers[layer], d, grads.value(prefix + ".lstm.W"),
                      grads.value(prefix + ".lstm.R"), grads.value(prefix + ".lstm.b"),
                      grads.value(prefix + ".proj.W"));
  }
}

void predict_backward(const ParamStore& params, const ModelConfig& config,
                      const PredictTrace& trace, const Matrix& d_output,
                      ParamStore& grads) {
  Matrix d = d_output.transpose();  // [P x (U+1)]
  for (int layer = config.num_prediction_layers - 1; layer >= 0; --layer) {
    const std::string prefix = "prediction.l" + std::to_string(layer);
    const LstmView v = lstm_view(params, prefix);
    d = lstm_backward(v, trace.layers[layer], d, grads.value(prefix + ".lstm.W"),
                      grads.value(prefix + ".lstm.R"), grads.value(prefix + ".lstm.b"),
                      grads.value(prefix + ".proj.W"));
  }
  Matrix& d_emb = grads.value("prediction.embedding");
  for (std::size_t u = 0; u < trace.labels.size(); ++u) {
    d_emb.row(trace.labels[u] - 1) += d.col(static_cast<int>(u) + 1).transpose();
  }
}

RecurrentState make_encoder_state(const ModelConfig& config) {
  RecurrentState state;
  state.c.assign(config.num_encoder_layers, Vector::Zero(config.lstm_units));
  state.r.assign(config.num_encoder_layers, Vector::Zero(config.projection_dim));
  return state;
}

RecurrentState make_prediction_state(const ModelConfig& config) {
  RecurrentState state;
  state.c.assign(config.num_prediction_layers, Vector::Zero(config.lstm_units));
  state.r.assign(config.num_prediction_layers, Vector::Zero(config.projection_dim));
  return state;
}

Vector encode_step(const ParamStore& params, const ModelConfig& config,
                   RecurrentState& state, const Vector& frame,
                   std::optional<int> lang, bool use_adapters) {
  if (frame.size() != config.input_dim) {
    throw std::invalid_argument("encode_step: frame width mismatch");
  }
  check_lang(config, lang, config.use_language_vector, "the language vector");
  check_lang(config, lang, use_adapters, "adapter selection");
  Vector x(config.encoder_input_dim());
  x.head(config.input_dim) = frame;
  if (config.use_language_vector) {
    x.tail(config.k) = make_language_vector(*lang, config.k);
  }
  Vector i, f, g, o, c, h, r, adapted;
  for (int layer = 0; layer < config.num_encoder_layers; ++layer) {
    const LstmView v = lstm_view(params, "encoder.l" + std::to_string(layer));
    lstm_step(v, x, state.c[layer], state.r[layer], i, f, g, o, c, h, r);
    state.c[layer] = c;
    state.r[layer] = r;
    if (use_adapters) {
      adapter_step(adapter_view(params, *lang, layer), r, adapted, nullptr, nullptr,
                   nullptr, nullptr);
      x = adapted;
    } else {
      x = r;
    }
  }
  return x;
}

Vector predict_step(const ParamStore& params, const ModelConfig& config,
                    RecurrentState& state, int label) {
  Vector x;
  if (label < 0) {
    x = Vector::Zero(config.embedding_dim());
  } else {
    if (label == 0 || label >= config.vocab_size) {
      throw std::invalid_argument("predict_step: label out of range");
    }
    x = params.value("prediction.embedding").row(label - 1).transpose();
  }
  Vector i, f, g, o, c, h, r;
  for (int layer = 0; layer < config.num_prediction_layers; ++layer) {
    const LstmView v = lstm_view(params, "prediction.l" + std::to_string(layer));
    lstm_step(v, x, state.c[layer], state.r[layer], i, f, g, o, c, h, r);
    state.c[layer] = c;
    state.r[layer] = r;
    x = r;
  }
  return x;
}

Vector joint_step(const ParamStore& params, const ModelConfig& config,
                  const Vector& h_enc, const Vector& h_dec) {
  if (h_enc.size() != config.projection_dim || h_dec.size() != config.projection_dim) {
    throw std::invalid_argument("joint_step: activation width mismatch");
  }
  const Matrix& A = params.value("joint.enc.W");
  const Matrix& B = params.value("joint.dec.W");
  const Vector b = params.value("joint.b").col(0);
  const Matrix& W_out = params.value("joint.out.W");
  const Vector z = (A * h_enc + B * h_dec + b).array().tanh();
  return W_out * z;
}

}  // namespace rnnt
