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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnt/corpus.h"
#include "rnnt/presets.h"

namespace {

using rnnt::Corpus;
using rnnt::CorpusSpec;
using rnnt::Matrix;
using rnnt::Script;
using rnnt::Utterance;

CorpusSpec small_spec() {
  CorpusSpec spec;
  spec.k = 3;
  spec.counts = {40, 20, 10};
  spec.shared_vocab_fraction = 0.6;
  spec.codes = {"aa", "bb", "cc"};
  spec.test_counts = {5, 5, 5};
  return spec;
}

bool frames_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool utterances_equal(const Utterance& a, const Utterance& b) {
  if (a.id != b.id || a.lang.index != b.lang.index || a.lang.code != b.lang.code) return false;
  if (!frames_equal(a.frames, b.frames)) return false;
  if (a.transcript.size() != b.transcript.size()) return false;
  for (std::size_t i = 0; i < a.transcript.size(); ++i) {
    if (a.transcript[i].surface != b.transcript[i].surface) return false;
    if (a.transcript[i].script != b.transcript[i].script) return false;
  }
  return true;
}

std::set<std::string> native_graphemes(const Corpus& corpus, int lang_index) {
  std::set<std::string> out;
  auto absorb = [&](const Utterance& utt) {
    if (utt.lang.index != lang_index) return;
    for (const auto& tok : utt.transcript) {
      if (tok.script != Script::kNative) continue;
      for (const std::string& g : rnnt::utf8_split(tok.surface)) out.insert(g);
    }
  };
  for (const auto& utt : corpus.train) absorb(utt);
  for (const auto& per_lang : corpus.test) {
    for (const auto& utt : per_lang) absorb(utt);
  }
  for (const auto& entry : corpus.script_map) {
    if (entry.lang_code != corpus.languages[lang_index].code) continue;
    for (const std::string& g : rnnt::utf8_split(entry.native_form)) out.insert(g);
  }
  return out;
}

}  // namespace

TEST_CASE("generation is deterministic in (spec, seed)") {
  CorpusSpec spec = small_spec();
  Corpus a = rnnt::generate_corpus(spec, 5);
  Corpus b = rnnt::generate_corpus(spec, 5);

  REQUIRE(a.train.size() == b.train.size());
  REQUIRE(a.train.size() == 70);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(utterances_equal(a.train[i], b.train[i]));
  }
  REQUIRE(a.test.size() == 3);
  for (int l = 0; l < 3; ++l) {
    REQUIRE(a.test[l].size() == 5);
    for (std::size_t i = 0; i < a.test[l].size(); ++i) {
      CHECK(utterances_equal(a.test[l][i], b.test[l][i]));
    }
  }
  REQUIRE(a.script_map.size() == b.script_map.size());
  for (std::size_t i = 0; i < a.script_map.size(); ++i) {
    CHECK(a.script_map[i].lang_code == b.script_map[i].lang_code);
    CHECK(a.script_map[i].native_form == b.script_map[i].native_form);
    CHECK(a.script_map[i].latin_form == b.script_map[i].latin_form);
  }

  Corpus c = rnnt::generate_corpus(spec, 6);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.train.size() && !any_differs; ++i) {
    if (!frames_equal(a.train[i].frames, c.train[i].frames)) any_differs = true;
  }
  CHECK(any_differs);
}

TEST_CASE("native scripts are pairwise disjoint and avoid Latin") {
  Corpus corpus = rnnt::generate_corpus(small_spec(), 9);
  std::vector<std::set<std::string>> scripts;
  for (int l = 0; l < 3; ++l) scripts.push_back(native_graphemes(corpus, l));
  for (int l = 0; l < 3; ++l) {
    CHECK(!scripts[l].empty());
    for (int m = l + 1; m < 3; ++m) {
      for (const std::string& g : scripts[l]) CHECK(scripts[m].count(g) == 0);
    }
    for (const std::string& g : scripts[l]) {
      REQUIRE(g.size() >= 2);  // multi-byte, so never an ASCII Latin letter
    }
  }
}

TEST_CASE("shared-vocabulary fraction lands near the spec value") {
  CorpusSpec spec = small_spec();
  spec.counts = {400, 400, 400};
  Corpus corpus = rnnt::generate_corpus(spec, 17);

  // A token slot is shared iff it was rendered in Latin or its native
  // surface has a script-map entry for the language.
  std::set<std::pair<std::string, std::string>> shared_native;
  for (const auto& e : corpus.script_map) {
    shared_native.insert({e.lang_code, e.native_form});
  }
  long long shared = 0, total = 0;
  for (const Utterance& utt : corpus.train) {
    for (const auto& tok : utt.transcript) {
      ++total;
      if (tok.script == Script::kLatin ||
          shared_native.count({utt.lang.code, tok.surface})) {
        ++shared;
      }
    }
  }
  const double fraction = static_cast<double>(shared) / static_cast<double>(total);
  CHECK(std::fabs(fraction - spec.shared_vocab_fraction) <= 0.05);
}

TEST_CASE("latin renderings appear only for shared words") {
  CorpusSpec spec = small_spec();
  spec.latin_render_prob = 0.5;
  Corpus corpus = rnnt::generate_corpus(spec, 23);
  std::set<std::string> shared_latin;
  for (const auto& e : corpus.script_map) shared_latin.insert(e.latin_form);
  long long latin_tokens = 0;
  for (const Utterance& utt : corpus.train) {
    for (const auto& tok : utt.transcript) {
      if (tok.script != Script::kLatin) continue;
      ++latin_tokens;
      CHECK(shared_latin.count(tok.surface) == 1);
    }
  }
  CHECK(latin_tokens > 0);
}

TEST_CASE("frame synthesis ties acoustics to pronunciation length") {
  CorpusSpec spec = small_spec();
  Corpus corpus = rnnt::generate_corpus(spec, 31);
  for (const Utterance& utt : corpus.train) {
    CHECK(utt.frames.rows() >= spec.min_frames_per_grapheme);
    CHECK(utt.frames.cols() == spec.feature_dim);
    CHECK(!utt.transcript.empty());
    CHECK(utt.frames.array().isFinite().all());
  }
}

TEST_CASE("stack_frames shapes, clamping, and identity") {
  Matrix frames(5, 2);
  for (int t = 0; t < 5; ++t) {
    frames(t, 0) = t;
    frames(t, 1) = 10 + t;
  }

  SUBCASE("identity when no context or downsampling") {
    Matrix out = rnnt::stack_frames(frames, 0, 1);
    CHECK(frames_equal(out, frames));
  }

  SUBCASE("left context clamps before the start") {
    Matrix out = rnnt::stack_frames(frames, 2, 2);
    // ceil(5/2) = 3 output frames, width 2*(2+1) = 6; output j covers raw
    // positions 2j-2, 2j-1, 2j with negatives clamped to 0.
    REQUIRE(out.rows() == 3);
    REQUIRE(out.cols() == 6);
    CHECK(out(0, 0) == 0.0);  // clamped
    CHECK(out(0, 2) == 0.0);  // clamped
    CHECK(out(0, 4) == 0.0);  // raw frame 0
    CHECK(out(1, 0) == 0.0);  // raw frame 0
    CHECK(out(1, 2) == 1.0);  // raw frame 1
    CHECK(out(1, 4) == 2.0);  // raw frame 2
    CHECK(out(2, 0) == 2.0);
    CHECK(out(2, 2) == 3.0);
    CHECK(out(2, 4) == 4.0);
    CHECK(out(2, 5) == 14.0);  // second feature of raw frame 4
  }

  SUBCASE("downsampling alone keeps every downsample-th frame") {
    Matrix out = rnnt::stack_frames(frames, 0, 3);
    REQUIRE(out.rows() == 2);
    REQUIRE(out.cols() == 2);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(1, 0) == 3.0);
  }

  SUBCASE("bad arguments throw") {
    CHECK_THROWS_AS(rnnt::stack_frames(frames, -1, 1), std::invalid_argument);
    CHECK_THROWS_AS(rnnt::stack_frames(frames, 0, 0), std::invalid_argument);
  }
}

TEST_CASE("grapheme inventory is sorted, blank-first, and round-trips") {
  Corpus corpus = rnnt::generate_corpus(small_spec(), 37);
  rnnt::GraphemeInventory inv = rnnt::build_grapheme_inventory(corpus);
  REQUIRE(inv.size() > 2);
  CHECK(inv.blank() == 0);
  for (int i = 2; i < inv.size(); ++i) {
    CHECK(inv.symbol(i - 1) < inv.symbol(i));  // byte-lexicographic order
  }
  CHECK(inv.contains(rnnt::kWordSeparator));
  CHECK(inv.separator() == inv.index_of(rnnt::kWordSeparator));

  for (const Utterance& utt : corpus.train) {
    std::vector<int> labels = inv.encode_transcript(utt.transcript);
    for (const int l : labels) {
      CHECK(l > 0);
      CHECK(l < inv.size());
    }
    std::vector<std::string> words = inv.decode_to_words(labels);
    REQUIRE(words.size() == utt.transcript.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      CHECK(words[i] == utt.transcript[i].surface);
    }
  }

  CHECK_THROWS_AS(inv.index_of("no-such-symbol"), std::out_of_range);
}

TEST_CASE("inventory is independent of corpus order") {
  CorpusSpec spec = small_spec();
  Corpus a = rnnt::generate_corpus(spec, 41);
  Corpus shuffled = a;
  std::reverse(shuffled.train.begin(), shuffled.train.end());
  rnnt::GraphemeInventory ia = rnnt::build_grapheme_inventory(a);
  rnnt::GraphemeInventory ib = rnnt::build_grapheme_inventory(shuffled);
  CHECK(ia.symbols() == ib.symbols());
}

TEST_CASE("single-language view reindexes to k = 1") {
  Corpus corpus = rnnt::generate_corpus(small_spec(), 43);
  Corpus mono = rnnt::single_language_view(corpus, 1);
  REQUIRE(mono.languages.size() == 1);
  CHECK(mono.languages[0].code == "bb");
  CHECK(mono.languages[0].index == 0);
  CHECK(mono.train.size() == 20);
  REQUIRE(mono.test.size() == 1);
  CHECK(mono.test[0].size() == 5);
  for (const Utterance& utt : mono.train) {
    CHECK(utt.lang.index == 0);
    CHECK(utt.lang.code == "bb");
  }
  for (const auto& e : mono.script_map) CHECK(e.lang_code == "bb");
  CHECK(!mono.script_map.empty());
  CHECK_THROWS_AS(rnnt::single_language_view(corpus, 3), std::invalid_argument);
}

TEST_CASE("utf8 helpers round-trip") {
  const std::string text = std::string("ab") + rnnt::kWordSeparator + "\xe0\xa4\x85";
  std::vector<std::string> parts = rnnt::utf8_split(text);
  REQUIRE(parts.size() == 4);
  CHECK(parts[0] == "a");
  CHECK(parts[1] == "b");
  CHECK(parts[2] == rnnt::kWordSeparator);
  CHECK(parts[3] == "\xe0\xa4\x85");
  CHECK(rnnt::utf8_encode(0x0905) == "\xe0\xa4\x85");
  CHECK(rnnt::utf8_encode('a') == "a");
}

TEST_CASE("corpus files round-trip through disk") {
  namespace fs = std::filesystem;
  Corpus corpus = rnnt::generate_corpus(small_spec(), 47);
  const fs::path dir = fs::temp_directory_path() / "rnnt_test_corpus_io";
  fs::create_directories(dir);

  rnnt::write_corpus_jsonl(dir / "train.jsonl", corpus.train);
  std::vector<std::string> codes;
  for (const auto& lang : corpus.languages) codes.push_back(lang.code);
  std::vector<Utterance> back = rnnt::read_corpus_jsonl(dir / "train.jsonl", codes);
  REQUIRE(back.size() == corpus.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(utterances_equal(back[i], corpus.train[i]));
  }

  rnnt::write_language_list(dir / "languages.json", corpus.languages);
  CHECK(rnnt::read_language_list(dir / "languages.json") == codes);

  rnnt::write_script_map_tsv(dir / "script_map.tsv", corpus.script_map);
  std::vector<rnnt::ScriptMapEntry> entries =
      rnnt::read_script_map_tsv(dir / "script_map.tsv");
  REQUIRE(entries.size() == corpus.script_map.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(entries[i].lang_code == corpus.script_map[i].lang_code);
    CHECK(entries[i].native_form == corpus.script_map[i].native_form);
    CHECK(entries[i].latin_form == corpus.script_map[i].latin_form);
  }
  fs::remove_all(dir);
}

TEST_CASE("spec validation rejects inconsistent settings") {
  CorpusSpec spec = small_spec();
  spec.counts = {1, 2};  // wrong length
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.shared_vocab_fraction = 1.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.alphabet_size = 26;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.min_words = 3;
  spec.max_words = 2;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.codes = {"x", "y"};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("presets are registered and valid") {
  for (const std::string& name : rnnt::corpus_preset_names()) {
    auto spec = rnnt::corpus_preset(name);
    REQUIRE(spec.has_value());
    spec->validate();
  }
  CHECK(!rnnt::corpus_preset("no-such-preset").has_value());

  auto table = rnnt::corpus_preset("table1-skew");
  REQUIRE(table.has_value());
  CHECK(table->k == 9);
  REQUIRE(table->counts.size() == 9);
  long long total = 0;
  for (const int c : table->counts) total += c;
  CHECK(total == 758);
  CHECK(table->counts[0] == 361);
  CHECK(table->codes[0] == "hi");
}
