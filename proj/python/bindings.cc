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

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rnnt/corpus.h"
#include "rnnt/loss.h"
#include "rnnt/metrics.h"
#include "rnnt/model.h"
#include "rnnt/sampler.h"

namespace py = pybind11;
using namespace rnnt;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor3 tensor_from_array(const DoubleArray& arr) {
  if (arr.ndim() != 3) throw std::invalid_argument("expected a rank-3 array");
  Tensor3 t(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
            static_cast<int>(arr.shape(2)));
  std::memcpy(t.data(), arr.data(), sizeof(double) * t.size());
  return t;
}

py::array_t<double> array_from_tensor(const Tensor3& t) {
  py::array_t<double> arr({t.dim0(), t.dim1(), t.dim2()});
  std::memcpy(arr.mutable_data(), t.data(), sizeof(double) * t.size());
  return arr;
}

py::dict report_to_dict(const WerReport& r) {
  py::dict d;
  d["wer"] = r.wer;
  d["substitutions"] = r.substitutions;
  d["insertions"] = r.insertions;
  d["deletions"] = r.deletions;
  d["reference_length"] = r.reference_length;
  d["script_substitutions"] = r.script_substitutions;
  return d;
}

}  // namespace

PYBIND11_MODULE(_rnnt, m) {
  m.doc() = "core operations of the streaming multilingual transducer toolkit";

  m.def(
      "sampling_ratios",
      [](const std::vector<long long>& counts, double alpha) {
        return sampling_ratios(counts, alpha);
      },
      py::arg("counts"), py::arg("alpha"),
      "Per-language sampling shares interpolated between natural frequency "
      "(alpha=0) and uniform (alpha=1).");

  m.def("stack_frames", &stack_frames, py::arg("frames"), py::arg("left_context"),
        py::arg("downsample"),
        "Concatenates each frame with left_context preceding frames and "
        "keeps every downsample-th position.");

  m.def(
      "log_softmax",
      [](const DoubleArray& logits) {
        return array_from_tensor(log_softmax(tensor_from_array(logits)));
      },
      py::arg("logits"), "Log-softmax over the last axis of a [T,U+1,V] array.");

  m.def(
      "rnnt_loss",
      [](const DoubleArray& log_probs, const std::vector<int>& labels) {
        Tensor3 grad;
        const double nll = rnnt_loss(tensor_from_array(log_probs), labels, &grad);
        return py::make_tuple(nll, array_from_tensor(grad));
      },
      py::arg("log_probs"), py::arg("labels"),
      "Exact transducer negative log-likelihood and its gradient with "
      "respect to the logits underlying log_probs.");

  m.def(
      "brute_force_nll",
      [](const DoubleArray& log_probs, const std::vector<int>& labels) {
        return brute_force_nll(tensor_from_array(log_probs), labels);
      },
      py::arg("log_probs"), py::arg("labels"),
      "Path-enumeration oracle for the transducer loss (T+U <= 12).");

  m.def("make_language_vector", &make_language_vector, py::arg("lang_index"),
        py::arg("k"), "One-hot language indicator of width k.");

  m.def(
      "adapter_apply",
      [](const Vector& h, const Vector& ln_gain, const Vector& ln_bias,
         const Matrix& down, const Vector& down_bias, const Matrix& up,
         const Vector& up_bias) {
        AdapterParams a{ln_gain, ln_bias, down, down_bias, up, up_bias};
        return adapter_apply(a, h);
      },
      py::arg("h"), py::arg("ln_gain"), py::arg("ln_bias"), py::arg("down"),
      py::arg("down_bias"), py::arg("up"), py::arg("up_bias"),
      "Residual bottleneck adapter: h + up*relu(down*layernorm(h)+b) + b.");

  py::class_<ScriptMap>(m, "ScriptMap")
      .def(py::init<>())
      .def("add", &ScriptMap::add, py::arg("lang_code"), py::arg("native_form"),
           py::arg("latin_form"))
      .def("equivalent", &ScriptMap::equivalent, py::arg("lang_code"), py::arg("a"),
           py::arg("b"));

  m.def(
      "plain_wer",
      [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
        return report_to_dict(plain_wer(ref, hyp));
      },
      py::arg("ref"), py::arg("hyp"));

  m.def(
      "translit_wer",
      [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
         const std::string& lang_code, const ScriptMap& map) {
        return report_to_dict(translit_wer(ref, hyp, lang_code, map));
      },
      py::arg("ref"), py::arg("hyp"), py::arg("lang_code"), py::arg("script_map"),
      "WER where a correct word rendered in the other script is not an error.");
}
