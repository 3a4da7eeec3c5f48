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
//
// Command-line front end: gen-data, train, adapt, decode, score, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rnnt/checkpoint.h"
#include "rnnt/corpus.h"
#include "rnnt/decoder.h"
#include "rnnt/metrics.h"
#include "rnnt/presets.h"
#include "rnnt/trainer.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rnnt;

namespace {

// Distinguishes "referenced file does not exist" (exit 2) from validation
// failures (exit 1).
struct MissingFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_exists(const fs::path& path, const char* what) {
  if (!fs::exists(path)) {
    throw MissingFileError(std::string(what) + " not found: " + path.string());
  }
}

json read_json_file(const fs::path& path, const char* what) {
  require_exists(path, what);
  std::ifstream in(path);
  json j;
  in >> j;
  return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

json spec_to_json(const CorpusSpec& spec) {
  return json{{"k", spec.k},
              {"counts", spec.counts},
              {"shared_vocab_fraction", spec.shared_vocab_fraction},
              {"grapheme_prototype_seed", spec.grapheme_prototype_seed},
              {"frame_noise_std", spec.frame_noise_std},
              {"accent_shift_scale", spec.accent_shift_scale},
              {"feature_dim", spec.feature_dim},
              {"alphabet_size", spec.alphabet_size},
              {"shared_lexicon_size", spec.shared_lexicon_size},
              {"unique_words_per_language", spec.unique_words_per_language},
              {"min_words", spec.min_words},
              {"max_words", spec.max_words},
              {"min_word_len", spec.min_word_len},
              {"max_word_len", spec.max_word_len},
              {"min_frames_per_grapheme", spec.min_frames_per_grapheme},
              {"max_frames_per_grapheme", spec.max_frames_per_grapheme},
              {"latin_render_prob", spec.latin_render_prob},
              {"test_counts", spec.test_counts},
              {"codes", spec.codes}};
}

CorpusSpec spec_from_json(const json& j) {
  CorpusSpec spec;
  spec.k = j.value("k", spec.k);
  spec.counts = j.value("counts", spec.counts);
  spec.shared_vocab_fraction =
      j.value("shared_vocab_fraction", spec.shared_vocab_fraction);
  spec.grapheme_prototype_seed =
      j.value("grapheme_prototype_seed", spec.grapheme_prototype_seed);
  spec.frame_noise_std = j.value("frame_noise_std", spec.frame_noise_std);
  spec.accent_shift_scale = j.value("accent_shift_scale", spec.accent_shift_scale);
  spec.feature_dim = j.value("feature_dim", spec.feature_dim);
  spec.alphabet_size = j.value("alphabet_size", spec.alphabet_size);
  spec.shared_lexicon_size = j.value("shared_lexicon_size", spec.shared_lexicon_size);
  spec.unique_words_per_language =
      j.value("unique_words_per_language", spec.unique_words_per_language);
  spec.min_words = j.value("min_words", spec.min_words);
  spec.max_words = j.value("max_words", spec.max_words);
  spec.min_word_len = j.value("min_word_len", spec.min_word_len);
  spec.max_word_len = j.value("max_word_len", spec.max_word_len);
  spec.min_frames_per_grapheme =
      j.value("min_frames_per_grapheme", spec.min_frames_per_grapheme);
  spec.max_frames_per_grapheme =
      j.value("max_frames_per_grapheme", spec.max_frames_per_grapheme);
  spec.latin_render_prob = j.value("latin_render_prob", spec.latin_render_prob);
  spec.test_counts = j.value("test_counts", spec.test_counts);
  spec.codes = j.value("codes", spec.codes);
  return spec;
}

Corpus load_corpus_dir(const fs::path& dir) {
  require_exists(dir, "data directory");
  require_exists(dir / "languages.json", "language list");
  require_exists(dir / "train.jsonl", "training corpus");
  require_exists(dir / "test.jsonl", "test corpus");
  require_exists(dir / "script_map.tsv", "script map");

  Corpus corpus;
  const std::vector<std::string> codes = read_language_list(dir / "languages.json");
  for (std::size_t i = 0; i < codes.size(); ++i) {
    corpus.languages.push_back({static_cast<int>(i), codes[i]});
  }
  corpus.train = read_corpus_jsonl(dir / "train.jsonl", codes);
  corpus.test.resize(codes.size());
  for (Utterance& utt : read_corpus_jsonl(dir / "test.jsonl", codes)) {
    corpus.test.at(utt.lang.index).push_back(std::move(utt));
  }
  corpus.script_map = read_script_map_tsv(dir / "script_map.tsv");
  return corpus;
}

int cmd_gen_data(const std::string& preset, const std::string& spec_path,
                 const fs::path& out, std::uint64_t seed) {
  CorpusSpec spec;
  if (!preset.empty()) {
    const auto p = corpus_preset(preset);
    if (!p) throw std::invalid_argument("unknown corpus preset: " + preset);
    spec = *p;
  } else if (!spec_path.empty()) {
    spec = spec_from_json(read_json_file(spec_path, "corpus spec"));
  } else {
    throw std::invalid_argument("gen-data needs --preset or --spec");
  }

  const Corpus corpus = generate_corpus(spec, seed);
  fs::create_directories(out);
  write_corpus_jsonl(out / "train.jsonl", corpus.train);
  std::vector<Utterance> test_all;
  for (const auto& per_lang : corpus.test) {
    test_all.insert(test_all.end(), per_lang.begin(), per_lang.end());
  }
  write_corpus_jsonl(out / "test.jsonl", test_all);
  write_language_list(out / "languages.json", corpus.languages);
  write_script_map_tsv(out / "script_map.tsv", corpus.script_map);
  json resolved = spec_to_json(spec);
  resolved["seed"] = seed;
  write_text_file(out / "spec.json", resolved.dump(2) + "\n");

  std::size_t n_test = test_all.size();
  std::printf("wrote %zu train / %zu test utterances for %d languages to %s\n",
              corpus.train.size(), n_test, spec.k, out.string().c_str());
  return 0;
}

TrainConfig resolve_train_config(const std::string& preset,
                                 const std::string& config_path,
                                 std::optional<std::uint64_t> seed) {
  TrainConfig config;
  if (!preset.empty()) {
    const auto p = train_preset(preset);
    if (!p) throw std::invalid_argument("unknown train preset: " + preset);
    config = *p;
  } else if (!config_path.empty()) {
    config = train_config_from_json(read_json_file(config_path, "train config"));
  } else {
    throw std::invalid_argument("need --preset or --config");
  }
  if (seed) config.seed = *seed;
  config.validate();
  return config;
}

int cmd_train(const std::string& preset, const std::string& config_path,
              const fs::path& data, const fs::path& out,
              std::optional<std::uint64_t> seed, const std::string& lang) {
  if (preset == "A5") {
    throw std::invalid_argument("preset A5 is an adapter stage; use `adapt`");
  }
  const TrainConfig config = resolve_train_config(preset, config_path, seed);
  Corpus corpus = load_corpus_dir(data);

  TrainResult result;
  if (!lang.empty()) {
    int index = -1;
    for (const LanguageId& l : corpus.languages) {
      if (l.code == lang) index = l.index;
    }
    if (index < 0) throw std::invalid_argument("unknown language code: " + lang);
    const Corpus mono = single_language_view(corpus, index);
    result = train_monolingual(config, mono, out);
  } else {
    result = train_stage1(config, corpus, out);
  }

  std::printf("trained %d steps; final loss %.4f; avg WER %.4f\n",
              config.steps, result.log.losses.back().loss,
              result.final_eval.average_wer);
  return 0;
}

int cmd_adapt(const fs::path& base, const std::string& preset,
              const std::string& config_path, const fs::path& data,
              const fs::path& out, std::optional<std::uint64_t> seed,
              const std::string& langs) {
  require_exists(base, "base checkpoint");
  require_exists(base / "manifest", "base checkpoint manifest");
  const Checkpoint ckpt = load_checkpoint(base);
  const TrainConfig config =
      resolve_train_config(preset.empty() && config_path.empty() ? "A5" : preset,
                           config_path, seed);
  Corpus corpus = load_corpus_dir(data);

  // Restrict the adaptation pool to the requested languages; the others
  // keep identity banks. Test splits stay complete so the final evaluation
  // still covers every language.
  if (!langs.empty()) {
    std::set<std::string> keep;
    std::stringstream ss(langs);
    for (std::string code; std::getline(ss, code, ',');) {
      bool known = false;
      for (const LanguageId& l : corpus.languages) known |= l.code == code;
      if (!known) throw std::invalid_argument("unknown language code: " + code);
      keep.insert(code);
    }
    std::erase_if(corpus.train, [&keep](const Utterance& u) {
      return !keep.count(u.lang.code);
    });
    if (corpus.train.empty()) {
      throw std::invalid_argument("--langs filtered out every train utterance");
    }
  }

  const TrainResult result =
      train_adapters(ckpt.params, ckpt.config, config, corpus, out);
  std::printf("adapted %d steps; final loss %.4f; avg WER %.4f\n", config.steps,
              result.log.losses.back().loss, result.final_eval.average_wer);
  return 0;
}

int cmd_decode(const fs::path& ckpt_dir, const fs::path& data,
               const std::string& split, const fs::path& out, int beam,
               bool greedy, bool no_adapters, int max_symbols) {
  require_exists(ckpt_dir, "checkpoint");
  require_exists(ckpt_dir / "manifest", "checkpoint manifest");
  const Checkpoint ckpt = load_checkpoint(ckpt_dir);
  const Corpus corpus = load_corpus_dir(data);
  const GraphemeInventory inventory = build_grapheme_inventory(corpus);
  if (inventory.size() != ckpt.config.vocab_size) {
    throw std::invalid_argument("corpus vocabulary does not match checkpoint");
  }

  const int left_context = ckpt.meta.value("left_context", 3);
  const int downsample = ckpt.meta.value("downsample", 2);
  if (max_symbols <= 0) max_symbols = ckpt.meta.value("max_symbols_per_frame", 5);
  const bool use_adapters = !no_adapters && ckpt.config.adapter_bottleneck > 0;

  std::vector<const Utterance*> utts;
  if (split == "train") {
    for (const Utterance& u : corpus.train) utts.push_back(&u);
  } else if (split == "test") {
    for (const auto& per_lang : corpus.test) {
      for (const Utterance& u : per_lang) utts.push_back(&u);
    }
  } else {
    throw std::invalid_argument("--split must be train or test");
  }

  std::string lines;
  for (const Utterance* utt : utts) {
    const Matrix stacked = stack_frames(utt->frames, left_context, downsample);
    std::vector<int> tokens;
    double logprob = 0.0;
    if (greedy || beam <= 1) {
      const DecodeResult r = greedy_decode(ckpt.params, ckpt.config, stacked,
                                           utt->lang.index, use_adapters, max_symbols);
      tokens = r.tokens;
      logprob = r.total_log_prob();
    } else {
      const std::vector<BeamHypothesis> nbest =
          beam_decode(ckpt.params, ckpt.config, stacked, utt->lang.index,
                      use_adapters, beam, max_symbols);
      tokens = nbest.front().tokens;
      logprob = nbest.front().log_prob;
    }
    json rec;
    rec["id"] = utt->id;
    rec["lang"] = utt->lang.code;
    json toks = json::array();
    for (const int t : tokens) toks.push_back(inventory.symbol(t));
    rec["tokens"] = std::move(toks);
    rec["logprob"] = logprob;
    lines += rec.dump() + "\n";
  }
  write_text_file(out, lines);
  std::printf("decoded %zu utterances to %s\n", utts.size(), out.string().c_str());
  return 0;
}

std::vector<std::string> words_from_token_strings(const std::vector<std::string>& tokens) {
  std::vector<std::string> words;
  std::string current;
  for (const std::string& t : tokens) {
    if (t == kWordSeparator) {
      if (!current.empty()) words.push_back(current);
      current.clear();
    } else {
      current += t;
    }
  }
  if (!current.empty()) words.push_back(current);
  return words;
}

json score_to_json(const CorpusScore& score) {
  json per_language = json::object();
  for (const auto& [code, report] : score.per_language) {
    per_language[code] = {{"wer", report.wer},
                          {"substitutions", report.substitutions},
                          {"insertions", report.insertions},
                          {"deletions", report.deletions},
                          {"reference_length", report.reference_length},
                          {"script_substitutions", report.script_substitutions}};
  }
  return json{{"per_language", per_language}, {"average_wer", score.average_wer}};
}

void print_score_table(const CorpusScore& score) {
  std::printf("%-8s %8s %6s %6s %6s %8s %12s\n", "lang", "wer", "sub", "ins",
              "del", "ref_len", "script_subs");
  for (const auto& [code, r] : score.per_language) {
    std::printf("%-8s %8.4f %6lld %6lld %6lld %8lld %12lld\n", code.c_str(), r.wer,
                r.substitutions, r.insertions, r.deletions, r.reference_length,
                r.script_substitutions);
  }
  std::printf("%-8s %8.4f\n", "Avg", score.average_wer);
}

int cmd_score(const fs::path& data, const std::string& split, const fs::path& hyps,
              const fs::path& out) {
  const Corpus corpus = load_corpus_dir(data);
  require_exists(hyps, "hypothesis file");

  std::vector<ScoredUtterance> refs;
  const auto add_ref = [&](const Utterance& utt) {
    ScoredUtterance s;
    s.id = utt.id;
    s.lang_code = utt.lang.code;
    for (const Token& t : utt.transcript) s.words.push_back(t.surface);
    refs.push_back(std::move(s));
  };
  if (split == "train") {
    for (const Utterance& u : corpus.train) add_ref(u);
  } else if (split == "test") {
    for (const auto& per_lang : corpus.test) {
      for (const Utterance& u : per_lang) add_ref(u);
    }
  } else {
    throw std::invalid_argument("--split must be train or test");
  }

  std::vector<ScoredUtterance> hypotheses;
  std::ifstream in(hyps);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    ScoredUtterance s;
    s.id = rec.at("id").get<std::string>();
    s.lang_code = rec.at("lang").get<std::string>();
    s.words = words_from_token_strings(rec.at("tokens").get<std::vector<std::string>>());
    hypotheses.push_back(std::move(s));
  }

  const ScriptMap map{std::span<const ScriptMapEntry>(corpus.script_map)};
  const CorpusScore score = score_corpus(refs, hypotheses, map);
  print_score_table(score);
  if (!out.empty()) write_text_file(out, score_to_json(score).dump(2) + "\n");
  return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const fs::path& out) {
  if (run_dirs.empty()) throw std::invalid_argument("report needs at least one run dir");

  struct Row {
    std::string name;
    std::map<std::string, double> wer;
    double avg = 0.0;
  };
  std::vector<Row> rows;
  std::set<std::string> langs;
  for (const std::string& dir : run_dirs) {
    fs::path score_path = fs::path(dir) / "score.json";
    if (!fs::exists(score_path) && fs::is_regular_file(dir)) score_path = dir;
    require_exists(score_path, "score file");
    const json j = read_json_file(score_path, "score file");
    Row row;
    row.name = fs::path(dir).filename().string();
    if (row.name.empty()) row.name = fs::path(dir).parent_path().filename().string();
    for (const auto& [code, entry] : j.at("per_language").items()) {
      row.wer[code] = entry.at("wer").get<double>();
      langs.insert(code);
    }
    row.avg = j.at("average_wer").get<double>();
    rows.push_back(std::move(row));
  }
  for (const Row& row : rows) {
    if (row.wer.size() != langs.size()) {
      throw std::invalid_argument("inconsistent language sets across runs (row " +
                                  row.name + ")");
    }
  }

  // Column minima (language columns and Avg).
  std::map<std::string, std::string> best;
  for (const std::string& code : langs) {
    const Row* min_row = nullptr;
    for (const Row& row : rows) {
      if (!min_row || row.wer.at(code) < min_row->wer.at(code)) min_row = &row;
    }
    best[code] = min_row->name;
  }
  const Row* best_avg = nullptr;
  for (const Row& row : rows) {
    if (!best_avg || row.avg < best_avg->avg) best_avg = &row;
  }

  std::string text;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-12s", "run");
  text += buf;
  for (const std::string& code : langs) {
    std::snprintf(buf, sizeof(buf), " %9s", code.c_str());
    text += buf;
  }
  std::snprintf(buf, sizeof(buf), " %9s\n", "Avg");
  text += buf;
  for (const Row& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-12s", row.name.c_str());
    text += buf;
    for (const std::string& code : langs) {
      const char mark = best.at(code) == row.name ? '*' : ' ';
      std::snprintf(buf, sizeof(buf), " %c%8.4f", mark, row.wer.at(code));
      text += buf;
    }
    const char mark = best_avg->name == row.name ? '*' : ' ';
    std::snprintf(buf, sizeof(buf), " %c%8.4f\n", mark, row.avg);
    text += buf;
  }

  json machine;
  machine["languages"] = json(std::vector<std::string>(langs.begin(), langs.end()));
  json jrows = json::array();
  for (const Row& row : rows) {
    json r;
    r["run"] = row.name;
    for (const auto& [code, wer] : row.wer) r["wer"][code] = wer;
    r["avg"] = row.avg;
    jrows.push_back(std::move(r));
  }
  machine["rows"] = std::move(jrows);
  json jbest = json::object();
  for (const auto& [code, name] : best) jbest[code] = name;
  jbest["Avg"] = best_avg->name;
  machine["best"] = std::move(jbest);

  std::fputs(text.c_str(), stdout);
  if (!out.empty()) {
    fs::create_directories(out);
    write_text_file(out / "report.txt", text);
    write_text_file(out / "report.json", machine.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming multilingual transducer toolkit"};
  app.require_subcommand(1);

  std::string preset, spec_path, config_path, lang, split = "test";
  std::string data, out, base, ckpt, hyps;
  std::uint64_t seed = 1;
  bool have_seed = false;
  int beam = 0;
  bool greedy = false, no_adapters = false;
  int max_symbols = 0;
  std::vector<std::string> run_dirs;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen->add_option("--preset", preset, "corpus preset name");
  gen->add_option("--spec", spec_path, "corpus spec JSON path");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--seed", seed, "corpus seed");

  CLI::App* train = app.add_subcommand("train", "stage-1 or monolingual training");
  train->add_option("--preset", preset, "experiment preset (A0..A4, B1)");
  train->add_option("--config", config_path, "train config JSON path");
  train->add_option("--data", data, "corpus directory")->required();
  train->add_option("--out", out, "run output directory")->required();
  train->add_option("--seed", seed, "training seed")->each([&](const std::string&) {
    have_seed = true;
  });
  train->add_option("--lang", lang, "language code (monolingual baseline)");

  CLI::App* adapt = app.add_subcommand("adapt", "stage-2 adapter training");
  adapt->add_option("--base", base, "base checkpoint directory")->required();
  adapt->add_option("--preset", preset, "experiment preset (A5)");
  adapt->add_option("--config", config_path, "train config JSON path");
  adapt->add_option("--data", data, "corpus directory")->required();
  adapt->add_option("--out", out, "run output directory")->required();
  adapt->add_option("--seed", seed, "training seed")->each([&](const std::string&) {
    have_seed = true;
  });
  std::string langs;
  adapt->add_option("--langs", langs,
                    "comma-separated languages to adapt (default: all)");

  CLI::App* decode = app.add_subcommand("decode", "decode a corpus split");
  decode->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  decode->add_option("--data", data, "corpus directory")->required();
  decode->add_option("--split", split, "train|test (default test)");
  decode->add_option("--out", out, "hypothesis JSONL path")->required();
  decode->add_option("--beam", beam, "beam width (1 = greedy)");
  decode->add_flag("--greedy", greedy, "greedy decoding");
  decode->add_flag("--no-adapters", no_adapters, "ignore adapter banks");
  decode->add_option("--max-symbols", max_symbols, "per-frame emission cap");

  CLI::App* score = app.add_subcommand("score", "score hypotheses against a split");
  score->add_option("--data", data, "corpus directory")->required();
  score->add_option("--split", split, "train|test (default test)");
  score->add_option("--hyps", hyps, "hypothesis JSONL path")->required();
  score->add_option("--out", out, "report JSON path");

  CLI::App* report = app.add_subcommand("report", "compare run score files");
  report->add_option("runs", run_dirs, "run directories or score.json paths")
      ->required();
  report->add_option("--out", out, "report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const std::optional<std::uint64_t> seed_opt =
        have_seed ? std::optional<std::uint64_t>(seed) : std::nullopt;
    if (gen->parsed()) return cmd_gen_data(preset, spec_path, out, seed);
    if (train->parsed()) return cmd_train(preset, config_path, data, out, seed_opt, lang);
    if (adapt->parsed())
      return cmd_adapt(base, preset, config_path, data, out, seed_opt, langs);
    if (decode->parsed()) {
      return cmd_decode(ckpt, data, split, out, beam, greedy, no_adapters, max_symbols);
    }
    if (score->parsed()) return cmd_score(data, split, hyps, out);
    if (report->parsed()) return cmd_report(run_dirs, out);
  } catch (const MissingFileError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
