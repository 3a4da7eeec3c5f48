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

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnt/metrics.h"
#include "rnnt/rng.h"

namespace {

using rnnt::EditCounts;
using rnnt::ScriptMap;
using rnnt::WerReport;

std::vector<std::string> words(std::initializer_list<const char*> list) {
  return {list.begin(), list.end()};
}

ScriptMap two_language_map() {
  ScriptMap map;
  map.add("x", "\xce\xb1\xce\xb2", "ka");    // Greek rendering of "ka"
  map.add("x", "\xce\xb3", "to");
  map.add("y", "\xd0\xb4\xd0\xb5", "ka");    // Cyrillic rendering of "ka"
  map.add("y", "\xd0\xb6", "ra");
  return map;
}

}  // namespace

TEST_CASE("edit distance separates the three error kinds") {
  auto exact = [](const std::string& a, const std::string& b) { return a == b; };

  EditCounts sub = rnnt::edit_distance(words({"a", "b", "c"}), words({"a", "x", "c"}), exact);
  CHECK(sub.substitutions == 1);
  CHECK(sub.insertions == 0);
  CHECK(sub.deletions == 0);

  EditCounts ins = rnnt::edit_distance(words({"a", "b"}), words({"a", "b", "c"}), exact);
  CHECK(ins.substitutions == 0);
  CHECK(ins.insertions == 1);
  CHECK(ins.deletions == 0);

  EditCounts del = rnnt::edit_distance(words({"a", "b", "c"}), words({"a", "c"}), exact);
  CHECK(del.substitutions == 0);
  CHECK(del.insertions == 0);
  CHECK(del.deletions == 1);

  EditCounts none = rnnt::edit_distance(words({"a", "b"}), words({"a", "b"}), exact);
  CHECK(none.substitutions + none.insertions + none.deletions == 0);

  EditCounts empty_hyp = rnnt::edit_distance(words({"a", "b"}), {}, exact);
  CHECK(empty_hyp.deletions == 2);
  EditCounts empty_ref = rnnt::edit_distance({}, words({"a", "b"}), exact);
  CHECK(empty_ref.insertions == 2);
}

TEST_CASE("equal-cost alignments resolve by the documented preference") {
  auto exact = [](const std::string& a, const std::string& b) { return a == b; };
  // Cost 1 either way: delete "a" then match "b", or substitute then delete.
  // Match outranks substitution, so the decomposition is one deletion.
  EditCounts c = rnnt::edit_distance(words({"a", "b"}), words({"b"}), exact);
  CHECK(c.substitutions == 0);
  CHECK(c.deletions == 1);
  CHECK(c.insertions == 0);

  EditCounts c2 = rnnt::edit_distance(words({"b"}), words({"a", "b"}), exact);
  CHECK(c2.substitutions == 0);
  CHECK(c2.deletions == 0);
  CHECK(c2.insertions == 1);
}

TEST_CASE("total edits are symmetric with roles swapped") {
  auto exact = [](const std::string& a, const std::string& b) { return a == b; };
  rnnt::Rng rng(5);
  const std::vector<std::string> pool = {"ka", "to", "ra", "mi", "so"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> ref, hyp;
    const int nr = rng.uniform_index(6);
    const int nh = rng.uniform_index(6);
    for (int i = 0; i < nr; ++i) ref.push_back(pool[rng.uniform_index(5)]);
    for (int i = 0; i < nh; ++i) hyp.push_back(pool[rng.uniform_index(5)]);
    EditCounts fwd = rnnt::edit_distance(ref, hyp, exact);
    EditCounts bwd = rnnt::edit_distance(hyp, ref, exact);
    CHECK(fwd.substitutions + fwd.insertions + fwd.deletions ==
          bwd.substitutions + bwd.insertions + bwd.deletions);
    CHECK(fwd.insertions == bwd.deletions);
    CHECK(fwd.deletions == bwd.insertions);
  }
}

TEST_CASE("script map enforces one-to-one per language") {
  ScriptMap map = two_language_map();
  CHECK(map.covers("x"));
  CHECK(map.covers("y"));
  CHECK(!map.covers("z"));

  CHECK(map.native_to_latin("x", "\xce\xb1\xce\xb2") == "ka");
  CHECK(map.latin_to_native("y", "ka") == "\xd0\xb4\xd0\xb5");
  CHECK(!map.native_to_latin("x", "\xd0\xb4\xd0\xb5").has_value());

  // Same native form mapping to a second Latin form breaks the bijection.
  CHECK_THROWS_AS(map.add("x", "\xce\xb1\xce\xb2", "zz"), std::invalid_argument);
  CHECK_THROWS_AS(map.add("x", "\xce\xb4", "ka"), std::invalid_argument);
  // Re-adding the identical pair is harmless.
  map.add("x", "\xce\xb1\xce\xb2", "ka");

  CHECK(ScriptMap::normalize("  Ka ") == "ka");
  CHECK(map.native_to_latin("x", " \xce\xb1\xce\xb2 ") == "ka");

  CHECK(map.canonical_latin("\xce\xb1\xce\xb2") == "ka");
  CHECK(map.canonical_latin("\xd0\xb4\xd0\xb5") == "ka");
  CHECK(map.canonical_latin("ka") == "ka");
  CHECK(!map.canonical_latin("unmapped").has_value());
}

TEST_CASE("transliteration-optimized matching accepts either script") {
  ScriptMap map = two_language_map();
  CHECK(map.equivalent("x", "\xce\xb1\xce\xb2", "\xce\xb1\xce\xb2"));
  CHECK(map.equivalent("x", "\xce\xb1\xce\xb2", "ka"));
  CHECK(map.equivalent("x", "ka", "\xce\xb1\xce\xb2"));
  // The other language's rendering of the same Latin form is not a match.
  CHECK(!map.equivalent("x", "\xce\xb1\xce\xb2", "\xd0\xb4\xd0\xb5"));
  // Unmapped forms fall back to exact comparison.
  CHECK(map.equivalent("x", "novel", "novel"));
  CHECK(!map.equivalent("x", "novel", "other"));
}

TEST_CASE("transliteration WER forgives script switches, plain WER does not") {
  ScriptMap map = two_language_map();
  const std::vector<std::string> ref = {"\xce\xb1\xce\xb2", "\xce\xb3"};

  WerReport plain = rnnt::plain_wer(ref, words({"ka", "\xce\xb3"}));
  CHECK(plain.wer == doctest::Approx(0.5));
  CHECK(plain.substitutions == 1);

  WerReport translit = rnnt::translit_wer(ref, words({"ka", "\xce\xb3"}), "x", map);
  CHECK(translit.wer == 0.0);
  CHECK(translit.substitutions == 0);
  CHECK(translit.script_substitutions == 0);
}

TEST_CASE("transliteration WER never exceeds plain WER") {
  ScriptMap map = two_language_map();
  rnnt::Rng rng(6);
  const std::vector<std::string> pool = {
      "\xce\xb1\xce\xb2", "\xce\xb3", "ka", "to", "ra", "zz"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> ref, hyp;
    const int nr = 1 + rng.uniform_index(5);
    const int nh = rng.uniform_index(6);
    for (int i = 0; i < nr; ++i) ref.push_back(pool[rng.uniform_index(6)]);
    for (int i = 0; i < nh; ++i) hyp.push_back(pool[rng.uniform_index(6)]);
    const double p = rnnt::plain_wer(ref, hyp).wer;
    const double t = rnnt::translit_wer(ref, hyp, "x", map).wer;
    CHECK(t <= p + 1e-12);
  }
}

TEST_CASE("wrong-script words are flagged as script substitutions") {
  ScriptMap map = two_language_map();
  // Hypothesis renders "ka" in language y's script while scoring against
  // language x: an error, but a script-confusion one.
  WerReport r = rnnt::translit_wer(words({"\xce\xb1\xce\xb2"}),
                                   words({"\xd0\xb4\xd0\xb5"}), "x", map);
  CHECK(r.wer == 1.0);
  CHECK(r.substitutions == 1);
  CHECK(r.script_substitutions == 1);

  // An ordinary substitution is not script confusion.
  WerReport r2 = rnnt::translit_wer(words({"\xce\xb1\xce\xb2"}),
                                    words({"\xce\xb3"}), "x", map);
  CHECK(r2.substitutions == 1);
  CHECK(r2.script_substitutions == 0);
}

TEST_CASE("report arithmetic follows the counts") {
  EditCounts counts;
  counts.substitutions = 2;
  counts.insertions = 1;
  counts.deletions = 3;
  WerReport r = WerReport::from_counts(counts, 12);
  CHECK(r.wer == doctest::Approx(0.5));
  CHECK(r.reference_length == 12);
  CHECK_THROWS_AS(WerReport::from_counts(counts, 0), std::invalid_argument);
}

TEST_CASE("corpus scoring pools counts per language, then averages") {
  ScriptMap map = two_language_map();
  std::vector<rnnt::ScoredUtterance> refs = {
      {"u1", "x", words({"\xce\xb1\xce\xb2", "\xce\xb3"})},
      {"u2", "x", words({"\xce\xb3", "\xce\xb3", "\xce\xb3", "\xce\xb3",
                         "\xce\xb3", "\xce\xb3"})},
      {"u3", "y", words({"\xd0\xb6", "\xd0\xb6"})},
  };
  std::vector<rnnt::ScoredUtterance> hyps = {
      {"u1", "x", words({"zz", "\xce\xb3"})},     // 1 error / 2 words
      {"u2", "x", words({"\xce\xb3", "\xce\xb3", "\xce\xb3", "\xce\xb3",
                         "\xce\xb3", "\xce\xb3"})},  // clean / 6 words
      {"u3", "y", words({"\xd0\xb6", "zz"})},     // 1 error / 2 words
  };
  rnnt::CorpusScore score = rnnt::score_corpus(refs, hyps, map);

  // Pooling matters: language x is (1 error / 8 words) = 0.125, not the
  // per-utterance mean (0.5 + 0) / 2 = 0.25.
  CHECK(score.per_language.at("x").wer == doctest::Approx(0.125));
  CHECK(score.per_language.at("y").wer == doctest::Approx(0.5));
  // The cross-language average is unweighted despite x having more words.
  CHECK(score.average_wer == doctest::Approx((0.125 + 0.5) / 2.0));

  hyps.pop_back();
  CHECK_THROWS_AS(rnnt::score_corpus(refs, hyps, map), std::runtime_error);
}
