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

#ifndef RNNT_CORPUS_H_
#define RNNT_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rnnt/types.h"

namespace rnnt {

// Recipe for a deterministic synthetic multilingual corpus.
//
// Every word has a pronunciation: a string over the shared Latin alphabet
// (the first `alphabet_size` letters). Acoustics are synthesized from the
// pronunciation, so the same word sounds the same in every language up to a
// per-language accent offset on each acoustic unit. Orthography is separate:
// each
// language renders pronunciations in its own disjoint native script, and a
// shared-lexicon word is the same pronunciation rendered per language (the
// native/Latin pairs go into the script map). This reproduces the regime
// where vocabularies overlap across languages but scripts do not.
struct CorpusSpec {
  int k = 2;                            // language count
  std::vector<int> counts;              // training utterances per language
  double shared_vocab_fraction = 0.5;   // P(word slot drawn from shared lexicon)
  std::uint64_t grapheme_prototype_seed = 1;
  double frame_noise_std = 0.1;
  double accent_shift_scale = 0.1;

  // Plumbing knobs with documented defaults.
  int feature_dim = 8;                  // d_raw
  int alphabet_size = 14;               // Latin letters in use, <= 25
  int shared_lexicon_size = 24;
  int unique_words_per_language = 12;
  int min_words = 1, max_words = 3;     // words per utterance
  int min_word_len = 2, max_word_len = 5;
  int min_frames_per_grapheme = 2, max_frames_per_grapheme = 4;
  double latin_render_prob = 0.1;       // shared word rendered in Latin
  std::vector<int> test_counts;         // empty -> 16 per language
  std::vector<std::string> codes;       // empty -> "l0".."l{k-1}"

  // Throws std::invalid_argument on any violated precondition.
  void validate() const;
};

// One native<->Latin equivalence, keyed by language code.
struct ScriptMapEntry {
  std::string lang_code;
  std::string native_form;
  std::string latin_form;
};

struct Corpus {
  std::vector<LanguageId> languages;
  std::vector<Utterance> train;
  std::vector<std::vector<Utterance>> test;  // per language index
  std::vector<ScriptMapEntry> script_map;
};

// Pure function of (spec, seed); byte-identical output on identical inputs.
Corpus generate_corpus(const CorpusSpec& spec, std::uint64_t seed);

// Restricts a corpus to one language, reindexed to k=1 (monolingual runs).
Corpus single_language_view(const Corpus& corpus, int lang_index);

// Output frame j concatenates raw frames (j*downsample - left_context) ..
// (j*downsample), oldest first, with negative positions clamped to frame 0.
// Output is ceil(T_raw / downsample) x (d_raw * (left_context + 1)).
Matrix stack_frames(const Matrix& frames, int left_context, int downsample);

// Unified symbol table over all languages. Index 0 is the reserved blank;
// the remaining symbols are byte-lexicographically sorted, so the table is
// independent of corpus order. The table also knows the word separator
// used when flattening transcripts to label sequences.
class GraphemeInventory {
 public:
  GraphemeInventory() = default;
  explicit GraphemeInventory(std::vector<std::string> symbols);

  int size() const { return static_cast<int>(symbols_.size()); }
  int blank() const { return 0; }
  const std::string& symbol(int index) const { return symbols_.at(index); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  // Index lookup; throws std::out_of_range for unknown symbols.
  int index_of(const std::string& symbol) const;
  bool contains(const std::string& symbol) const;

  int separator() const;  // index of the word-separator grapheme

  // Graphemes of one word (no separators).
  std::vector<int> encode_word(const std::string& surface) const;
  // Graphemes of a transcript, words joined by the separator symbol.
  std::vector<int> encode_transcript(const std::vector<Token>& transcript) const;
  // Inverse of encode_transcript: label indices -> words.
  std::vector<std::string> decode_to_words(std::span<const int> labels) const;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

// Separator grapheme inserted between words of a label sequence.
extern const char kWordSeparator[];

GraphemeInventory build_grapheme_inventory(const Corpus& corpus);

// Splits a UTF-8 string into one string per codepoint.
std::vector<std::string> utf8_split(const std::string& s);
// UTF-8 encoding of one codepoint (BMP and above).
std::string utf8_encode(std::uint32_t codepoint);

// Corpus files: one JSON object per line with fields
//   id, lang, frames (row-major nested array), transcript (word strings),
//   scripts ("native" | "latin", parallel to transcript).
void write_corpus_jsonl(const std::filesystem::path& path,
                        std::span<const Utterance> utterances);
// `codes` fixes the code -> index mapping (index = position). The overload
// without codes derives indices from the sorted distinct codes in the file.
std::vector<Utterance> read_corpus_jsonl(const std::filesystem::path& path,
                                         const std::vector<std::string>& codes);
std::vector<Utterance> read_corpus_jsonl(const std::filesystem::path& path);

// Language list file: a JSON array of codes in index order.
void write_language_list(const std::filesystem::path& path,
                         std::span<const LanguageId> languages);
std::vector<std::string> read_language_list(const std::filesystem::path& path);

// Script map file: tab-separated "lang<TAB>native_form<TAB>latin_form".
void write_script_map_tsv(const std::filesystem::path& path,
                          std::span<const ScriptMapEntry> entries);
std::vector<ScriptMapEntry> read_script_map_tsv(const std::filesystem::path& path);

}  // namespace rnnt

#endif  // RNNT_CORPUS_H_
