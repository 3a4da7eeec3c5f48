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

#include "rnnt/corpus.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rnnt/rng.h"

namespace rnnt {

using nlohmann::json;

const char kWordSeparator[] = "▁";  // LOWER ONE EIGHTH BLOCK, sentencepiece-style

namespace {

// Starts of fully-assigned contiguous letter runs, one writing system per
// language. Languages beyond the table fall back to disjoint CJK slices.
constexpr std::uint32_t kScriptBases[] = {
    0x0905,  // Devanagari
    0x0430,  // Cyrillic
    0x03B1,  // Greek
    0x0561,  // Armenian
    0x10D0,  // Georgian
    0x05D0,  // Hebrew
    0x0E01,  // Thai
    0xAC00,  // Hangul
    0x1200,  // Ethiopic
    0x13A0,  // Cherokee
    0x16A0,  // Runic
    0x1820,  // Mongolian
};

std::uint32_t script_base(int lang_index) {
  constexpr int n = static_cast<int>(std::size(kScriptBases));
  if (lang_index < n) return kScriptBases[lang_index];
  return 0x4E00 + 32u * static_cast<std::uint32_t>(lang_index - n);
}

// Pronunciations are strings over 'a'..'a'+alphabet_size-1.
std::string native_render(const std::string& pronunciation, int lang_index) {
  const std::uint32_t base = script_base(lang_index);
  std::string out;
  for (const char c : pronunciation) {
    out += utf8_encode(base + static_cast<std::uint32_t>(c - 'a'));
  }
  return out;
}

std::string random_pronunciation(Rng& rng, const CorpusSpec& spec) {
  const int len = rng.uniform_range(spec.min_word_len, spec.max_word_len);
  std::string p;
  for (int i = 0; i < len; ++i) {
    p += static_cast<char>('a' + rng.uniform_index(spec.alphabet_size));
  }
  return p;
}

struct Lexicon {
  std::vector<std::string> shared;                  // pronunciations
  std::vector<std::vector<std::string>> unique;     // per language
};

Lexicon build_lexicon(const CorpusSpec& spec, Rng root) {
  Lexicon lex;
  Rng rng = root.split("lexicon");
  std::set<std::string> seen;
  auto draw_fresh = [&]() {
    std::string p = random_pronunciation(rng, spec);
    while (seen.count(p)) p = random_pronunciation(rng, spec);
    seen.insert(p);
    return p;
  };
  for (int i = 0; i < spec.shared_lexicon_size; ++i) lex.shared.push_back(draw_fresh());
  lex.unique.resize(spec.k);
  for (int l = 0; l < spec.k; ++l) {
    for (int i = 0; i < spec.unique_words_per_language; ++i) {
      lex.unique[l].push_back(draw_fresh());
    }
  }
  return lex;
}

// One Gaussian mean per pronunciation grapheme (Latin letters + separator),
// drawn once from grapheme_prototype_seed in fixed alphabet order.
std::vector<Vector> draw_prototypes(const CorpusSpec& spec) {
  Rng rng(spec.grapheme_prototype_seed);
  std::vector<Vector> protos(spec.alphabet_size + 1);
  for (auto& p : protos) {
    p = Vector(spec.feature_dim);
    for (int d = 0; d < spec.feature_dim; ++d) p[d] = rng.normal();
  }
  return protos;
}

// Each language shifts every acoustic unit by its own stable offset. A
// single global shift per language would be absorbed by any conditioning
// on language identity; per-unit shifts leave residual structure that
// only language-specific capacity can model.
std::vector<std::vector<Vector>> draw_accents(const CorpusSpec& spec, Rng root) {
  Rng rng = root.split("accents");
  std::vector<std::vector<Vector>> accents(spec.k);
  for (auto& lang_accents : accents) {
    lang_accents.resize(spec.alphabet_size + 1);
    for (auto& a : lang_accents) {
      a = Vector(spec.feature_dim);
      for (int d = 0; d < spec.feature_dim; ++d) a[d] = rng.normal();
      if (a.norm() > 0) a = spec.accent_shift_scale * a / a.norm();
    }
  }
  return accents;
}

Utterance synthesize_utterance(const CorpusSpec& spec, const Lexicon& lex,
                               const std::vector<Vector>& protos,
                               const std::vector<std::vector<Vector>>& accents,
                               const LanguageId& lang, const std::string& id,
                               Rng rng) {
  Utterance utt;
  utt.id = id;
  utt.lang = lang;

  const int num_words = rng.uniform_range(spec.min_words, spec.max_words);
  std::vector<std::string> pronunciations;
  for (int w = 0; w < num_words; ++w) {
    Token tok;
    std::string pron;
    const bool shared = rng.uniform() < spec.shared_vocab_fraction;
    if (shared) {
      pron = lex.shared[rng.uniform_index(static_cast<int>(lex.shared.size()))];
      const bool latin = rng.uniform() < spec.latin_render_prob;
      tok.script = latin ? Script::kLatin : Script::kNative;
      tok.surface = latin ? pron : native_render(pron, lang.index);
    } else {
      const auto& pool = lex.unique[lang.index];
      pron = pool[rng.uniform_index(static_cast<int>(pool.size()))];
      tok.script = Script::kNative;
      tok.surface = native_render(pron, lang.index);
    }
    pronunciations.push_back(pron);
    utt.transcript.push_back(std::move(tok));
  }

  // Acoustic units: pronunciation letters with separators between words.
  std::vector<int> units;  // 0..alphabet_size-1 letters, alphabet_size = separator
  for (std::size_t w = 0; w < pronunciations.size(); ++w) {
    if (w > 0) units.push_back(spec.alphabet_size);
    for (const char c : pronunciations[w]) units.push_back(c - 'a');
  }

  std::vector<Vector> rows;
  for (const int u : units) {
    const int reps = rng.uniform_range(spec.min_frames_per_grapheme,
                                       spec.max_frames_per_grapheme);
    for (int r = 0; r < reps; ++r) {
      Vector frame = protos[u] + accents[lang.index][u];
      for (int d = 0; d < spec.feature_dim; ++d) {
        frame[d] += spec.frame_noise_std * rng.normal();
      }
      rows.push_back(std::move(frame));
    }
  }
  utt.frames = Matrix(static_cast<int>(rows.size()), spec.feature_dim);
  for (int t = 0; t < utt.frames.rows(); ++t) utt.frames.row(t) = rows[t].transpose();
  return utt;
}

json utterance_to_json(const Utterance& utt) {
  json frames = json::array();
  for (int t = 0; t < utt.frames.rows(); ++t) {
    json row = json::array();
    for (int d = 0; d < utt.frames.cols(); ++d) row.push_back(utt.frames(t, d));
    frames.push_back(std::move(row));
  }
  json transcript = json::array();
  json scripts = json::array();
  for (const Token& tok : utt.transcript) {
    transcript.push_back(tok.surface);
    scripts.push_back(tok.script == Script::kLatin ? "latin" : "native");
  }
  return json{{"id", utt.id},
              {"lang", utt.lang.code},
              {"frames", std::move(frames)},
              {"transcript", std::move(transcript)},
              {"scripts", std::move(scripts)}};
}

Utterance utterance_from_json(const json& j) {
  Utterance utt;
  utt.id = j.at("id").get<std::string>();
  utt.lang.code = j.at("lang").get<std::string>();
  const auto& frames = j.at("frames");
  const int t_raw = static_cast<int>(frames.size());
  if (t_raw == 0) throw std::runtime_error("corpus record with no frames: " + utt.id);
  const int d_raw = static_cast<int>(frames.at(0).size());
  utt.frames = Matrix(t_raw, d_raw);
  for (int t = 0; t < t_raw; ++t) {
    const auto& row = frames.at(t);
    if (static_cast<int>(row.size()) != d_raw) {
      throw std::runtime_error("ragged frame matrix in record " + utt.id);
    }
    for (int d = 0; d < d_raw; ++d) utt.frames(t, d) = row.at(d).get<double>();
  }
  const auto& transcript = j.at("transcript");
  const auto& scripts = j.at("scripts");
  if (transcript.size() != scripts.size()) {
    throw std::runtime_error("transcript/scripts length mismatch in record " + utt.id);
  }
  for (std::size_t w = 0; w < transcript.size(); ++w) {
    Token tok;
    tok.surface = transcript.at(w).get<std::string>();
    const std::string s = scripts.at(w).get<std::string>();
    if (s != "native" && s != "latin") {
      throw std::runtime_error("unknown script tag '" + s + "' in record " + utt.id);
    }
    tok.script = s == "latin" ? Script::kLatin : Script::kNative;
    utt.transcript.push_back(std::move(tok));
  }
  return utt;
}

}  // namespace

void CorpusSpec::validate() const {
  if (k < 2) throw std::invalid_argument("CorpusSpec: multilingual spec requires k >= 2");
  if (static_cast<int>(counts.size()) != k) {
    throw std::invalid_argument("CorpusSpec: counts must have one entry per language");
  }
  for (const int n : counts) {
    if (n < 1) throw std::invalid_argument("CorpusSpec: counts must all be >= 1");
  }
  if (shared_vocab_fraction < 0.0 || shared_vocab_fraction > 1.0) {
    throw std::invalid_argument("CorpusSpec: shared_vocab_fraction outside [0,1]");
  }
  if (frame_noise_std < 0.0 || accent_shift_scale < 0.0) {
    throw std::invalid_argument("CorpusSpec: noise scales must be >= 0");
  }
  if (latin_render_prob < 0.0 || latin_render_prob > 1.0) {
    throw std::invalid_argument("CorpusSpec: latin_render_prob outside [0,1]");
  }
  if (alphabet_size < 2 || alphabet_size > 25) {
    throw std::invalid_argument("CorpusSpec: alphabet_size must be in [2,25]");
  }
  if (feature_dim < 1) throw std::invalid_argument("CorpusSpec: feature_dim must be >= 1");
  if (shared_lexicon_size < 1 || unique_words_per_language < 1) {
    throw std::invalid_argument("CorpusSpec: lexicon sizes must be >= 1");
  }
  if (min_words < 1 || max_words < min_words) {
    throw std::invalid_argument("CorpusSpec: bad words-per-utterance range");
  }
  if (min_word_len < 1 || max_word_len < min_word_len) {
    throw std::invalid_argument("CorpusSpec: bad word length range");
  }
  if (min_frames_per_grapheme < 1 || max_frames_per_grapheme < min_frames_per_grapheme) {
    throw std::invalid_argument("CorpusSpec: bad frames-per-grapheme range");
  }
  if (!test_counts.empty() && static_cast<int>(test_counts.size()) != k) {
    throw std::invalid_argument("CorpusSpec: test_counts must be empty or size k");
  }
  if (!codes.empty() && static_cast<int>(codes.size()) != k) {
    throw std::invalid_argument("CorpusSpec: codes must be empty or size k");
  }
}

Corpus generate_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng root(seed);

  Corpus corpus;
  for (int l = 0; l < spec.k; ++l) {
    LanguageId lang;
    lang.index = l;
    lang.code = spec.codes.empty() ? "l" + std::to_string(l) : spec.codes[l];
    corpus.languages.push_back(lang);
  }

  const Lexicon lex = build_lexicon(spec, root);
  const auto protos = draw_prototypes(spec);
  const auto accents = draw_accents(spec, root);

  for (const std::string& pron : lex.shared) {
    for (const LanguageId& lang : corpus.languages) {
      corpus.script_map.push_back({lang.code, native_render(pron, lang.index), pron});
    }
  }

  for (const LanguageId& lang : corpus.languages) {
    for (int n = 0; n < spec.counts[lang.index]; ++n) {
      const std::string id = lang.code + "_train_" + std::to_string(n);
      corpus.train.push_back(synthesize_utterance(spec, lex, protos, accents, lang,
                                                  id, root.split("utt/" + id)));
    }
  }
  corpus.test.resize(spec.k);
  for (const LanguageId& lang : corpus.languages) {
    const int n_test =
        spec.test_counts.empty() ? 16 : spec.test_counts[lang.index];
    for (int n = 0; n < n_test; ++n) {
      const std::string id = lang.code + "_test_" + std::to_string(n);
      corpus.test[lang.index].push_back(synthesize_utterance(
          spec, lex, protos, accents, lang, id, root.split("utt/" + id)));
    }
  }
  return corpus;
}

Corpus single_language_view(const Corpus& corpus, int lang_index) {
  if (lang_index < 0 || lang_index >= static_cast<int>(corpus.languages.size())) {
    throw std::invalid_argument("single_language_view: language index out of range");
  }
  Corpus mono;
  LanguageId lang = corpus.languages[lang_index];
  const std::string code = lang.code;
  lang.index = 0;
  mono.languages.push_back(lang);
  for (const Utterance& utt : corpus.train) {
    if (utt.lang.code != code) continue;
    Utterance copy = utt;
    copy.lang.index = 0;
    mono.train.push_back(std::move(copy));
  }
  mono.test.resize(1);
  for (const Utterance& utt : corpus.test.at(lang_index)) {
    Utterance copy = utt;
    copy.lang.index = 0;
    mono.test[0].push_back(std::move(copy));
  }
  for (const ScriptMapEntry& e : corpus.script_map) {
    if (e.lang_code == code) mono.script_map.push_back(e);
  }
  return mono;
}

Matrix stack_frames(const Matrix& frames, int left_context, int downsample) {
  if (frames.rows() == 0) throw std::invalid_argument("stack_frames: empty input");
  if (left_context < 0) throw std::invalid_argument("stack_frames: left_context < 0");
  if (downsample < 1) throw std::invalid_argument("stack_frames: downsample < 1");
  const int t_raw = static_cast<int>(frames.rows());
  const int d_raw = static_cast<int>(frames.cols());
  const int t_out = (t_raw + downsample - 1) / downsample;
  Matrix out(t_out, d_raw * (left_context + 1));
  for (int j = 0; j < t_out; ++j) {
    for (int c = 0; c <= left_context; ++c) {
      const int src = std::max(0, j * downsample - left_context + c);
      out.block(j, c * d_raw, 1, d_raw) = frames.row(src);
    }
  }
  return out;
}

GraphemeInventory::GraphemeInventory(std::vector<std::string> symbols)
    : symbols_(std::move(symbols)) {
  for (int i = 0; i < static_cast<int>(symbols_.size()); ++i) {
    if (!index_.emplace(symbols_[i], i).second) {
      throw std::invalid_argument("GraphemeInventory: duplicate symbol " + symbols_[i]);
    }
  }
}

int GraphemeInventory::index_of(const std::string& symbol) const {
  const auto it = index_.find(symbol);
  if (it == index_.end()) {
    throw std::out_of_range("GraphemeInventory: unknown symbol '" + symbol + "'");
  }
  return it->second;
}

bool GraphemeInventory::contains(const std::string& symbol) const {
  return index_.count(symbol) > 0;
}

int GraphemeInventory::separator() const { return index_of(kWordSeparator); }

std::vector<int> GraphemeInventory::encode_word(const std::string& surface) const {
  std::vector<int> out;
  for (const std::string& g : utf8_split(surface)) out.push_back(index_of(g));
  return out;
}

std::vector<int> GraphemeInventory::encode_transcript(
    const std::vector<Token>& transcript) const {
  std::vector<int> out;
  const int sep = separator();
  for (std::size_t w = 0; w < transcript.size(); ++w) {
    if (w > 0) out.push_back(sep);
    for (const int g : encode_word(transcript[w].surface)) out.push_back(g);
  }
  return out;
}

std::vector<std::string> GraphemeInventory::decode_to_words(
    std::span<const int> labels) const {
  std::vector<std::string> words;
  std::string current;
  const int sep = separator();
  for (const int g : labels) {
    if (g == sep) {
      words.push_back(current);
      current.clear();
    } else {
      current += symbol(g);
    }
  }
  words.push_back(current);
  // Collapse empty words produced by leading/trailing/doubled separators.
  std::erase_if(words, [](const std::string& w) { return w.empty(); });
  return words;
}

GraphemeInventory build_grapheme_inventory(const Corpus& corpus) {
  if (corpus.train.empty() && corpus.test.empty()) {
    throw std::invalid_argument("build_grapheme_inventory: empty corpus");
  }
  std::set<std::string> symbols;
  symbols.insert(kWordSeparator);
  auto add_utterance = [&](const Utterance& utt) {
    for (const Token& tok : utt.transcript) {
      for (const std::string& g : utf8_split(tok.surface)) symbols.insert(g);
    }
  };
  for (const Utterance& utt : corpus.train) add_utterance(utt);
  for (const auto& per_lang : corpus.test) {
    for (const Utterance& utt : per_lang) add_utterance(utt);
  }
  std::vector<std::string> table;
  table.push_back("<blank>");
  table.insert(table.end(), symbols.begin(), symbols.end());
  return GraphemeInventory(std::move(table));
}

std::vector<std::string> utf8_split(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if ((b & 0x80) == 0x00) len = 1;
    else if ((b & 0xE0) == 0xC0) len = 2;
    else if ((b & 0xF0) == 0xE0) len = 3;
    else if ((b & 0xF8) == 0xF0) len = 4;
    else throw std::invalid_argument("utf8_split: invalid lead byte");
    if (i + len > s.size()) throw std::invalid_argument("utf8_split: truncated sequence");
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::string utf8_encode(std::uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

void write_corpus_jsonl(const std::filesystem::path& path,
                        std::span<const Utterance> utterances) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const Utterance& utt : utterances) {
    out << utterance_to_json(utt).dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Utterance> read_corpus_jsonl(const std::filesystem::path& path,
                                         const std::vector<std::string>& codes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path.string());
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(codes.size()); ++i) index[codes[i]] = i;
  std::vector<Utterance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Utterance utt = utterance_from_json(json::parse(line));
    const auto it = index.find(utt.lang.code);
    if (it == index.end()) {
      throw std::runtime_error("unknown language code '" + utt.lang.code + "' at " +
                               path.string() + ":" + std::to_string(lineno));
    }
    utt.lang.index = it->second;
    out.push_back(std::move(utt));
  }
  return out;
}

std::vector<Utterance> read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path.string());
  std::vector<Utterance> out;
  std::set<std::string> codes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(utterance_from_json(json::parse(line)));
    codes.insert(out.back().lang.code);
  }
  std::unordered_map<std::string, int> index;
  int i = 0;
  for (const std::string& c : codes) index[c] = i++;
  for (Utterance& utt : out) utt.lang.index = index[utt.lang.code];
  return out;
}

void write_language_list(const std::filesystem::path& path,
                         std::span<const LanguageId> languages) {
  json j = json::array();
  for (const LanguageId& lang : languages) j.push_back(lang.code);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump() << '\n';
}

std::vector<std::string> read_language_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open language list: " + path.string());
  json j;
  in >> j;
  return j.get<std::vector<std::string>>();
}

void write_script_map_tsv(const std::filesystem::path& path,
                          std::span<const ScriptMapEntry> entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const ScriptMapEntry& e : entries) {
    out << e.lang_code << '\t' << e.native_form << '\t' << e.latin_form << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<ScriptMapEntry> read_script_map_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open script map: " + path.string());
  std::vector<ScriptMapEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw std::runtime_error("malformed script map line " + std::to_string(lineno) +
                               " in " + path.string());
    }
    out.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                   line.substr(t2 + 1)});
  }
  return out;
}

}  // namespace rnnt
