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

#ifndef RNNT_PRESETS_H_
#define RNNT_PRESETS_H_

#include <optional>
#include <string>
#include <vector>

#include "rnnt/corpus.h"
#include "rnnt/trainer.h"

namespace rnnt {

// Named corpus recipes:
//   table1-skew  nine languages with a 36.1:1 count skew
//   skew4        four languages, 10:1 skew, 70% shared vocabulary
//   tiny2        two tiny languages for smoke runs
std::optional<CorpusSpec> corpus_preset(const std::string& name);

// Named experiment configs forming the ladder:
//   A0  multilingual baseline, natural-frequency sampling, no language vector
//   A1  A0 plus the one-hot language vector
//   A2  A1 plus sampling alpha 0.25
//   A3  A4 stopped at its early checkpoint (same seed, fewer steps)
//   A4  as A2, trained longer with periodic checkpoints
//   A5  adapter stage on top of a trained base (use with `adapt`)
//   B1  monolingual baseline with L2 regularization
std::optional<TrainConfig> train_preset(const std::string& name);

std::vector<std::string> corpus_preset_names();
std::vector<std::string> train_preset_names();

}  // namespace rnnt

#endif  // RNNT_PRESETS_H_
