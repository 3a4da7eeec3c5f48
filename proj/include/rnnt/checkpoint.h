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

#ifndef RNNT_CHECKPOINT_H_
#define RNNT_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "rnnt/model.h"

namespace rnnt {

// On-disk checkpoint layout: a directory holding
//   manifest  - JSON with the model config, optional metadata, and one
//               entry per tensor {name, shape, partition, offset}
//   weights   - one raw blob of little-endian IEEE-754 doubles, each
//               tensor serialized row-major at its manifest offset
// Writes go to a sibling temp directory first and are renamed into place,
// so a checkpoint directory is never observed half-written. Round trips
// are bit-exact.

struct Checkpoint {
  ModelConfig config;
  ParamStore params;
  nlohmann::json meta;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Stable 64-bit content hash of a JSON value (canonical compact dump).
std::string json_hash_hex(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& dir, const ModelConfig& config,
                     const ParamStore& params,
                     const nlohmann::json& meta = nlohmann::json::object());

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace rnnt

#endif  // RNNT_CHECKPOINT_H_
