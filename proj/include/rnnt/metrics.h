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

#ifndef RNNT_METRICS_H_
#define RNNT_METRICS_H_

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rnnt/corpus.h"

namespace rnnt {

// Token-level native<->Latin equivalences, one-to-one per language.
// Lookups are case- and surrounding-whitespace-normalized.
class ScriptMap {
 public:
  ScriptMap() = default;
  explicit ScriptMap(std::span<const ScriptMapEntry> entries);

  // Throws if it would break the one-to-one property for the language.
  void add(const std::string& lang_code, const std::string& native_form,
           const std::string& latin_form);

  std::optional<std::string> native_to_latin(const std::string& lang_code,
                                             const std::string& native_form) const;
  std::optional<std::string> latin_to_native(const std::string& lang_code,
                                             const std::string& latin_form) const;

  // The transliteration-optimized match rule for one language: forms are
  // equivalent iff equal, or one is the other's rendering in the other
  // script. Unmapped forms fall back to exact match.
  bool equivalent(const std::string& lang_code, const std::string& a,
                  const std::string& b) const;

  // Latin form of a token under *any* language's mapping (native scripts
  // are disjoint, so this is unambiguous); Latin forms map to themselves.
  // Used for script-confusion diagnostics.
  std::optional<std::string> canonical_latin(const std::string& form) const;

  bool covers(const std::string& lang_code) const;

  static std::string normalize(const std::string& form);

 private:
  // per language: native -> latin and latin -> native
  std::map<std::string, std::map<std::string, std::string>> to_latin_;
  std::map<std::string, std::map<std::string, std::string>> to_native_;
  std::map<std::string, std::string> global_to_latin_;
};

struct EditCounts {
  long long substitutions = 0;
  long long insertions = 0;
  long long deletions = 0;
  // Substitutions where both sides are renderings of the same Latin form
  // (only populated by the scoring paths that pass a ScriptMap).
  long long script_substitutions = 0;
};

using MatchPredicate =
    std::function<bool(const std::string&, const std::string&)>;

// Minimal unit-cost alignment where equiv(r, h) counts as a match. Tie
// preference along the backtrace: match > substitution > deletion >
// insertion, so the decomposition is deterministic.
EditCounts edit_distance(std::span<const std::string> ref,
                         std::span<const std::string> hyp,
                         const MatchPredicate& equiv);

struct WerReport {
  long long substitutions = 0;
  long long insertions = 0;
  long long deletions = 0;
  long long reference_length = 0;
  double wer = 0.0;
  long long script_substitutions = 0;

  static WerReport from_counts(const EditCounts& counts, long long reference_length);
};

// Plain exact-match WER.
WerReport plain_wer(std::span<const std::string> ref, std::span<const std::string> hyp);

// WER where a correct word in the other script is not an error.
WerReport translit_wer(std::span<const std::string> ref,
                       std::span<const std::string> hyp,
                       const std::string& lang_code, const ScriptMap& map);

struct ScoredUtterance {
  std::string id;
  std::string lang_code;
  std::vector<std::string> words;
};

struct CorpusScore {
  std::map<std::string, WerReport> per_language;  // pooled counts per language
  double average_wer = 0.0;                       // unweighted mean over languages
};

// Pools error counts per language over id-aligned reference/hypothesis
// pairs; throws if a reference id has no hypothesis.
CorpusScore score_corpus(std::span<const ScoredUtterance> refs,
                         std::span<const ScoredUtterance> hyps,
                         const ScriptMap& map);

}  // namespace rnnt

#endif  // RNNT_METRICS_H_
