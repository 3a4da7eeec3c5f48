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

#include "rnnt/metrics.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_map>

namespace rnnt {

std::string ScriptMap::normalize(const std::string& form) {
  std::size_t begin = 0, end = form.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(form[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(form[end - 1]))) --end;
  std::string out = form.substr(begin, end - begin);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

ScriptMap::ScriptMap(std::span<const ScriptMapEntry> entries) {
  for (const ScriptMapEntry& e : entries) add(e.lang_code, e.native_form, e.latin_form);
}

void ScriptMap::add(const std::string& lang_code, const std::string& native_form,
                    const std::string& latin_form) {
  const std::string native = normalize(native_form);
  const std::string latin = normalize(latin_form);
  auto& fwd = to_latin_[lang_code];
  auto& bwd = to_native_[lang_code];
  const auto f = fwd.find(native);
  if (f != fwd.end()) {
    if (f->second != latin) {
      throw std::invalid_argument("ScriptMap: conflicting mapping for native form '" +
                                  native + "' in " + lang_code);
    }
    return;
  }
  if (bwd.count(latin)) {
    throw std::invalid_argument("ScriptMap: latin form '" + latin +
                                "' already mapped in " + lang_code);
  }
  fwd[native] = latin;
  bwd[latin] = native;
  global_to_latin_[native] = latin;
  global_to_latin_.emplace(latin, latin);
}

std::optional<std::string> ScriptMap::native_to_latin(
    const std::string& lang_code, const std::string& native_form) const {
  const auto lang = to_latin_.find(lang_code);
  if (lang == to_latin_.end()) return std::nullopt;
  const auto it = lang->second.find(normalize(native_form));
  if (it == lang->second.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> ScriptMap::latin_to_native(
    const std::string& lang_code, const std::string& latin_form) const {
  const auto lang = to_native_.find(lang_code);
  if (lang == to_native_.end()) return std::nullopt;
  const auto it = lang->second.find(normalize(latin_form));
  if (it == lang->second.end()) return std::nullopt;
  return it->second;
}

bool ScriptMap::equivalent(const std::string& lang_code, const std::string& a,
                           const std::string& b) const {
  const std::string na = normalize(a);
  const std::string nb = normalize(b);
  if (na == nb) return true;
  const auto a_latin = native_to_latin(lang_code, na);
  if (a_latin && *a_latin == nb) return true;
  const auto b_latin = native_to_latin(lang_code, nb);
  return b_latin && *b_latin == na;
}

std::optional<std::string> ScriptMap::canonical_latin(const std::string& form) const {
  const auto it = global_to_latin_.find(normalize(form));
  if (it == global_to_latin_.end()) return std::nullopt;
  return it->second;
}

bool ScriptMap::covers(const std::string& lang_code) const {
  return to_latin_.count(lang_code) > 0;
}

namespace {

enum class Step : unsigned char { kMatch, kSubstitution, kDeletion, kInsertion };

struct AlignedPair {
  Step step;
  int ref_pos;  // -1 for insertions
  int hyp_pos;  // -1 for deletions
};

// Unit-cost DP with deterministic tie preference along the backtrace:
// match > substitution > deletion > insertion.
std::vector<AlignedPair> align(std::span<const std::string> ref,
                               std::span<const std::string> hyp,
                               const MatchPredicate& equiv) {
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  std::vector<std::vector<int>> cost(n + 1, std::vector<int>(m + 1, 0));
  std::vector<std::vector<Step>> step(n + 1, std::vector<Step>(m + 1, Step::kMatch));
  for (int i = 1; i <= n; ++i) {
    cost[i][0] = i;
    step[i][0] = Step::kDeletion;
  }
  for (int j = 1; j <= m; ++j) {
    cost[0][j] = j;
    step[0][j] = Step::kInsertion;
  }
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      const bool match = equiv(ref[i - 1], hyp[j - 1]);
      const int diag = cost[i - 1][j - 1] + (match ? 0 : 1);
      const int del = cost[i - 1][j] + 1;
      const int ins = cost[i][j - 1] + 1;
      if (diag <= del && diag <= ins) {
        cost[i][j] = diag;
        step[i][j] = match ? Step::kMatch : Step::kSubstitution;
      } else if (del <= ins) {
        cost[i][j] = del;
        step[i][j] = Step::kDeletion;
      } else {
        cost[i][j] = ins;
        step[i][j] = Step::kInsertion;
      }
    }
  }
  std::vector<AlignedPair> pairs;
  int i = n, j = m;
  while (i > 0 || j > 0) {
    switch (step[i][j]) {
      case Step::kMatch:
      case Step::kSubstitution:
        pairs.push_back({step[i][j], i - 1, j - 1});
        --i; --j;
        break;
      case Step::kDeletion:
        pairs.push_back({Step::kDeletion, i - 1, -1});
        --i;
        break;
      case Step::kInsertion:
        pairs.push_back({Step::kInsertion, -1, j - 1});
        --j;
        break;
    }
  }
  std::reverse(pairs.begin(), pairs.end());
  return pairs;
}

EditCounts counts_from_alignment(std::span<const AlignedPair> pairs) {
  EditCounts counts;
  for (const AlignedPair& p : pairs) {
    switch (p.step) {
      case Step::kMatch: break;
      case Step::kSubstitution: ++counts.substitutions; break;
      case Step::kDeletion: ++counts.deletions; break;
      case Step::kInsertion: ++counts.insertions; break;
    }
  }
  return counts;
}

// Counts cross-script substitutions too: aligned pairs whose canonical
// Latin forms agree but which still count as errors (wrong native script
// for the utterance's language).
EditCounts translit_counts(std::span<const std::string> ref,
                           std::span<const std::string> hyp,
                           const std::string& lang_code, const ScriptMap& map) {
  const auto pairs = align(ref, hyp, [&](const std::string& a, const std::string& b) {
    return map.equivalent(lang_code, a, b);
  });
  EditCounts counts = counts_from_alignment(pairs);
  for (const AlignedPair& p : pairs) {
    if (p.step != Step::kSubstitution) continue;
    const auto r_latin = map.canonical_latin(ref[p.ref_pos]);
    const auto h_latin = map.canonical_latin(hyp[p.hyp_pos]);
    if (r_latin && h_latin && *r_latin == *h_latin) ++counts.script_substitutions;
  }
  return counts;
}

}  // namespace

EditCounts edit_distance(std::span<const std::string> ref,
                         std::span<const std::string> hyp,
                         const MatchPredicate& equiv) {
  return counts_from_alignment(align(ref, hyp, equiv));
}

WerReport WerReport::from_counts(const EditCounts& counts, long long reference_length) {
  if (reference_length <= 0) {
    throw std::invalid_argument("WerReport: reference_length must be positive");
  }
  WerReport report;
  report.substitutions = counts.substitutions;
  report.insertions = counts.insertions;
  report.deletions = counts.deletions;
  report.script_substitutions = counts.script_substitutions;
  report.reference_length = reference_length;
  report.wer = static_cast<double>(counts.substitutions + counts.insertions +
                                   counts.deletions) /
               static_cast<double>(reference_length);
  return report;
}

WerReport plain_wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const EditCounts counts = edit_distance(
      ref, hyp, [](const std::string& a, const std::string& b) { return a == b; });
  return WerReport::from_counts(counts, static_cast<long long>(ref.size()));
}

WerReport translit_wer(std::span<const std::string> ref,
                       std::span<const std::string> hyp,
                       const std::string& lang_code, const ScriptMap& map) {
  const EditCounts counts = translit_counts(ref, hyp, lang_code, map);
  return WerReport::from_counts(counts, static_cast<long long>(ref.size()));
}

CorpusScore score_corpus(std::span<const ScoredUtterance> refs,
                         std::span<const ScoredUtterance> hyps,
                         const ScriptMap& map) {
  if (refs.empty()) throw std::invalid_argument("score_corpus: no references");
  if (hyps.empty()) throw std::invalid_argument("score_corpus: no hypotheses");
  std::unordered_map<std::string, const ScoredUtterance*> by_id;
  for (const ScoredUtterance& h : hyps) by_id[h.id] = &h;

  struct Pooled {
    EditCounts counts;
    long long ref_len = 0;
  };
  std::map<std::string, Pooled> pooled;
  for (const ScoredUtterance& ref : refs) {
    const auto it = by_id.find(ref.id);
    if (it == by_id.end()) {
      throw std::runtime_error("score_corpus: missing hypothesis for id " + ref.id);
    }
    const EditCounts counts =
        translit_counts(ref.words, it->second->words, ref.lang_code, map);
    Pooled& p = pooled[ref.lang_code];
    p.counts.substitutions += counts.substitutions;
    p.counts.insertions += counts.insertions;
    p.counts.deletions += counts.deletions;
    p.counts.script_substitutions += counts.script_substitutions;
    p.ref_len += static_cast<long long>(ref.words.size());
  }

  CorpusScore score;
  double sum = 0.0;
  for (const auto& [lang, p] : pooled) {
    score.per_language[lang] = WerReport::from_counts(p.counts, p.ref_len);
    sum += score.per_language[lang].wer;
  }
  score.average_wer = sum / static_cast<double>(pooled.size());
  return score;
}

}  // namespace rnnt
