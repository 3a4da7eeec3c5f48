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

#ifndef RNNT_TYPES_H_
#define RNNT_TYPES_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rnnt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dense language index plus a short human-readable code ("hi", "l0", ...).
struct LanguageId {
  int index = 0;
  std::string code;
};

enum class Script { kNative, kLatin };

// One transcript word. The surface is a sequence of graphemes (one Unicode
// codepoint each); the script records whether the word was rendered in the
// language's native symbols or in the shared Latin alphabet.
struct Token {
  std::string surface;
  Script script = Script::kNative;
};

// The atom of every pipeline: T_raw feature frames plus a word transcript.
struct Utterance {
  std::string id;
  LanguageId lang;
  Matrix frames;  // [T_raw x d_raw], one row per frame
  std::vector<Token> transcript;
};

// Minimal dense rank-3 array (row-major) for joint logits and their grads.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int d0, int d1, int d2)
      : d0_(d0), d1_(d1), d2_(d2),
        v_(static_cast<std::size_t>(d0) * d1 * d2, 0.0) {
    if (d0 < 0 || d1 < 0 || d2 < 0) throw std::invalid_argument("Tensor3: negative dim");
  }

  double& operator()(int i, int j, int k) { return v_[offset(i, j, k)]; }
  double operator()(int i, int j, int k) const { return v_[offset(i, j, k)]; }

  int dim0() const { return d0_; }
  int dim1() const { return d1_; }
  int dim2() const { return d2_; }
  std::size_t size() const { return v_.size(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

 private:
  std::size_t offset(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * d1_ + j) * d2_ + k;
  }

  int d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<double> v_;
};

}  // namespace rnnt

#endif  // RNNT_TYPES_H_
