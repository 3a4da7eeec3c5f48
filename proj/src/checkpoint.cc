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

#include "rnnt/checkpoint.h"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "rnnt/rng.h"

namespace rnnt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void append_le_double(std::string& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_le_double(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint: short write to " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

json model_config_to_json(const ModelConfig& config) {
  return json{{"input_dim", config.input_dim},
              {"num_encoder_layers", config.num_encoder_layers},
              {"lstm_units", config.lstm_units},
              {"projection_dim", config.projection_dim},
              {"num_prediction_layers", config.num_prediction_layers},
              {"joint_dim", config.joint_dim},
              {"vocab_size", config.vocab_size},
              {"use_language_vector", config.use_language_vector},
              {"k", config.k},
              {"adapter_bottleneck", config.adapter_bottleneck}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig config;
  config.input_dim = j.at("input_dim").get<int>();
  config.num_encoder_layers = j.at("num_encoder_layers").get<int>();
  config.lstm_units = j.at("lstm_units").get<int>();
  config.projection_dim = j.at("projection_dim").get<int>();
  config.num_prediction_layers = j.at("num_prediction_layers").get<int>();
  config.joint_dim = j.at("joint_dim").get<int>();
  config.vocab_size = j.at("vocab_size").get<int>();
  config.use_language_vector = j.at("use_language_vector").get<bool>();
  config.k = j.at("k").get<int>();
  config.adapter_bottleneck = j.at("adapter_bottleneck").get<int>();
  config.validate();
  return config;
}

std::string json_hash_hex(const json& j) {
  const std::uint64_t h = Rng::fnv1a64(j.dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void save_checkpoint(const fs::path& dir, const ModelConfig& config,
                     const ParamStore& params, const json& meta) {
  json manifest;
  manifest["format"] = "rnnt-checkpoint-v1";
  manifest["layout"] = "row-major";
  manifest["dtype"] = "float64-le";
  manifest["config"] = model_config_to_json(config);
  manifest["meta"] = meta;

  std::string blob;
  blob.reserve(params.total_parameters() * 8);
  json tensors = json::array();
  for (const NamedTensor& t : params.tensors()) {
    tensors.push_back({{"name", t.name},
                       {"shape", {t.value.rows(), t.value.cols()}},
                       {"partition", t.partition},
                       {"offset", blob.size()}});
    for (int r = 0; r < t.value.rows(); ++r) {
      for (int c = 0; c < t.value.cols(); ++c) append_le_double(blob, t.value(r, c));
    }
  }
  manifest["tensors"] = std::move(tensors);

  const fs::path tmp = dir.parent_path().empty()
                           ? fs::path(dir.string() + ".tmp")
                           : dir.parent_path() / (dir.filename().string() + ".tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_file(tmp / "manifest", manifest.dump(2) + "\n");
  write_file(tmp / "weights", blob);
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const json manifest = json::parse(read_file(dir / "manifest"));
  if (manifest.at("format").get<std::string>() != "rnnt-checkpoint-v1") {
    throw std::runtime_error("checkpoint: unknown format in " + dir.string());
  }
  Checkpoint ckpt;
  ckpt.config = model_config_from_json(manifest.at("config"));
  ckpt.meta = manifest.value("meta", json::object());

  const std::string blob = read_file(dir / "weights");
  for (const json& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape");
    const int rows = shape.at(0).get<int>();
    const int cols = shape.at(1).get<int>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t need = offset + static_cast<std::size_t>(rows) * cols * 8;
    if (need > blob.size()) {
      throw std::runtime_error("checkpoint: weights blob truncated at tensor " + name);
    }
    Matrix& m = ckpt.params.add(name, rows, cols, entry.at("partition").get<std::string>());
    const char* p = blob.data() + offset;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        m(r, c) = read_le_double(p);
        p += 8;
      }
    }
  }
  return ckpt;
}

}  // namespace rnnt
