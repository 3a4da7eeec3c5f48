// Copyright 2026 The rnnt-multilingual Authors.
//
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "grad_check.h"
#include "rnnt/rng.h"

namespace {

using rnnt::Matrix;
using rnnt::ModelConfig;
using rnnt::ParamStore;
using rnnt::Rng;

ModelConfig full_config() {
  ModelConfig c;
  c.input_dim = 3;
  c.num_encoder_layers = 2;
  c.lstm_units = 3;
  c.projection_dim = 2;
  c.num_prediction_layers = 1;
  c.joint_dim = 2;
  c.vocab_size = 4;
  c.use_language_vector = true;
  c.k = 2;
  c.adapter_bottleneck = 2;
  return c;
}

Matrix random_frames(Rng& rng, int t_len, int dim) {
  Matrix frames(t_len, dim);
  for (int t = 0; t < t_len; ++t) {
    for (int d = 0; d < dim; ++d) frames(t, d) = rng.normal();
  }
  return frames;
}

// Adapter up-projections initialize to zero; giving them real values
// exercises the whole adapter backward path instead of just its rim.
void randomize_adapters(ParamStore& params, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& t : params.tensors()) {
    if (!t.is_adapter()) continue;
    for (int i = 0; i < t.value.size(); ++i) t.value.data()[i] = 0.5 * rng.normal();
  }
}

}  // namespace

TEST_CASE("full-model gradients match finite differences") {
  ModelConfig c = full_config();
  ParamStore params = rnnt::init_params(c, 17);
  randomize_adapters(params, 18);
  REQUIRE(params.total_parameters() <= 500);

  Rng rng(19);
  Matrix frames = random_frames(rng, 5, c.input_dim);
  std::vector<int> labels = {1, 3, 2};

  gradcheck::GradCheckResult r = gradcheck::check_utterance_grad(
      params, c, frames, labels, /*lang=*/1, /*use_adapters=*/true);
  INFO("worst: " << r.worst_tensor << "[" << r.worst_coord << "] analytic "
                 << r.analytic << " numeric " << r.numeric);
  CHECK(r.max_rel_error <= 1e-4);
  CHECK(r.coords_checked == static_cast<long long>(params.total_parameters()));
}

TEST_CASE("gradients at the zero-up adapter point also match") {
  // The identity-initialization point is where stage 2 starts; the ReLU
  // and LayerNorm paths must already be differentiated correctly there.
  ModelConfig c = full_config();
  ParamStore params = rnnt::init_params(c, 23);
  Rng rng(24);
  Matrix frames = random_frames(rng, 4, c.input_dim);
  std::vector<int> labels = {2, 1};

  gradcheck::GradCheckResult r = gradcheck::check_utterance_grad(
      params, c, frames, labels, /*lang=*/0, /*use_adapters=*/true);
  INFO("worst: " << r.worst_tensor << "[" << r.worst_coord << "]");
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("empty transcripts differentiate cleanly") {
  ModelConfig c = full_config();
  c.adapter_bottleneck = 0;
  ParamStore params = rnnt::init_params(c, 29);
  Rng rng(30);
  Matrix frames = random_frames(rng, 3, c.input_dim);
  std::vector<int> labels;

  gradcheck::GradCheckResult r = gradcheck::check_utterance_grad(
      params, c, frames, labels, /*lang=*/0, /*use_adapters=*/false);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("no-extras configuration differentiates cleanly") {
  ModelConfig c = full_config();
  c.use_language_vector = false;
  c.adapter_bottleneck = 0;
  c.k = 1;
  ParamStore params = rnnt::init_params(c, 31);
  Rng rng(32);
  Matrix frames = random_frames(rng, 6, c.input_dim);
  std::vector<int> labels = {3, 3, 1, 2};

  gradcheck::GradCheckResult r = gradcheck::check_utterance_grad(
      params, c, frames, labels, std::nullopt, false);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("language one-hot routes gradients to one weight column") {
  ModelConfig c = full_config();
  c.adapter_bottleneck = 0;
  ParamStore params = rnnt::init_params(c, 37);
  Rng rng(38);
  Matrix frames = random_frames(rng, 4, c.input_dim);
  std::vector<int> labels = {1, 2};

  ParamStore grads = params.zeros_like();
  rnnt::utterance_grad(params, c, frames, labels, /*lang=*/0, false, 1.0, grads);

  const Matrix& g = grads.value("encoder.l0.lstm.W");
  // Columns: input features, then one one-hot column per language.
  const int active = c.input_dim + 0;
  const int inactive = c.input_dim + 1;
  CHECK(g.col(active).cwiseAbs().maxCoeff() > 0.0);
  CHECK(g.col(inactive).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adapter gradients stay within the selected language") {
  ModelConfig c = full_config();
  ParamStore params = rnnt::init_params(c, 41);
  randomize_adapters(params, 42);
  Rng rng(43);
  Matrix frames = random_frames(rng, 4, c.input_dim);
  std::vector<int> labels = {3};

  ParamStore grads = params.zeros_like();
  rnnt::utterance_grad(params, c, frames, labels, /*lang=*/0, true, 1.0, grads);

  bool lang0_live = false;
  for (const auto& t : grads.tensors()) {
    if (t.partition == "adapter:1") {
      CHECK(t.value.cwiseAbs().maxCoeff() == 0.0);
    } else if (t.partition == "adapter:0") {
      lang0_live |= t.value.cwiseAbs().maxCoeff() > 0.0;
    }
  }
  CHECK(lang0_live);
}

TEST_CASE("gradient scaling and accumulation compose linearly") {
  ModelConfig c = full_config();
  c.adapter_bottleneck = 0;
  ParamStore params = rnnt::init_params(c, 47);
  Rng rng(48);
  Matrix frames_a = random_frames(rng, 3, c.input_dim);
  Matrix frames_b = random_frames(rng, 5, c.input_dim);
  std::vector<int> labels_a = {1};
  std::vector<int> labels_b = {2, 3};

  ParamStore ga = params.zeros_like();
  ParamStore gb = params.zeros_like();
  rnnt::utterance_grad(params, c, frames_a, labels_a, 0, false, 1.0, ga);
  rnnt::utterance_grad(params, c, frames_b, labels_b, 1, false, 1.0, gb);

  ParamStore combined = params.zeros_like();
  rnnt::utterance_grad(params, c, frames_a, labels_a, 0, false, 0.5, combined);
  rnnt::utterance_grad(params, c, frames_b, labels_b, 1, false, 0.25, combined);

  for (std::size_t i = 0; i < combined.size(); ++i) {
    const Matrix expect = 0.5 * ga.tensors()[i].value + 0.25 * gb.tensors()[i].value;
    const Matrix& got = combined.tensors()[i].value;
    CHECK((expect - got).cwiseAbs().maxCoeff() <= 1e-12);
  }
}
