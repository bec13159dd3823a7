#include <cstdio>
#include <functional>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "opseq/opseq.hpp"

using namespace opseq;

namespace {

// Config-like inputs: inline JSON or a file. Unreadable or malformed input is
// a configuration error.
json read_config_json(const std::string& arg) {
  try {
    if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) return json::parse(arg);
    return read_json_file(arg);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse JSON '" + arg + "': " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  write_text_file(path, text);
}

ReportFormat pick_format(const std::string& format, const std::string& out) {
  if (!format.empty()) return parse_report_format(format);
  const auto ext = fs::path(out).extension().string();
  if (ext == ".csv") return ReportFormat::csv;
  if (ext == ".txt") return ReportFormat::text;
  return ReportFormat::json;
}

void emit(const Report& r, const std::string& format, const std::string& out) {
  write_output(out, render_report(r, pick_format(format, out)));
}

std::string file_stem_id(const std::string& path) { return fs::path(path).stem().string(); }

// Per-sample model files carry the sample id and family next to the model.
std::vector<fs::path> json_files_in(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no model files in " + dir);
  return files;
}

struct CorpusInput {
  CorpusManifest manifest;
  std::vector<EncodedSequence> sequences;
};

CorpusInput load_filtered(const std::string& manifest_path, const std::string& vocab_path, std::size_t min_length) {
  CorpusInput in;
  in.manifest = load_manifest(manifest_path);
  const Vocabulary vocab = vocabulary_from_json(read_json_file(vocab_path));
  for (const auto& s : load_sequences(in.manifest)) {
    std::size_t kept = 0;
    for (const auto& m : s.mnemonics) kept += vocab.find(m).has_value();
    if (kept < min_length) {
      warning_sink()("skipping sample " + s.sample_id + ": " + std::to_string(kept) +
                     " tokens after filtering, minimum is " + std::to_string(min_length));
      continue;
    }
    in.sequences.push_back(filter_sequence(s, vocab));
  }
  return in;
}

std::vector<double> parse_fraction_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size()) throw ConfigError("bad fraction '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

GridSpec grid_from_arg(const std::string& arg) {
  if (arg == "svm") return presets::svm_grid();
  if (arg == "knn") return presets::knn_sweep();
  if (arg == "word2vec") return presets::word2vec_sweep();
  if (arg == "opcodes") return presets::opcode_count_sweep();
  return grid_spec_from_json(read_config_json(arg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Opcode-sequence feature engineering and malware family classification"};
  app.require_subcommand(1);
  std::function<void()> run;

  // extract
  auto* extract = app.add_subcommand("extract", "Parse disassembly listings into opcode files");
  std::vector<std::string> listings;
  std::string extract_out, extract_family = "unknown", extract_manifest;
  double tolerate = 0.0;
  extract->add_option("listings", listings, "Listing files (sample id = file stem)");
  extract->add_option("--manifest", extract_manifest, "Manifest whose entries point at listings");
  extract->add_option("--family", extract_family, "Family of positional listings");
  extract->add_option("--out-dir", extract_out, "Output directory")->required();
  extract->add_option("--tolerate", tolerate, "Tolerated fraction of malformed instruction lines");
  extract->callback([&] {
    run = [&] {
      CorpusManifest in;
      if (!extract_manifest.empty()) in = load_manifest(extract_manifest);
      if (!listings.empty()) {
        if (std::find(in.families.begin(), in.families.end(), extract_family) == in.families.end())
          in.families.push_back(extract_family);
        for (const auto& l : listings) in.entries.push_back({file_stem_id(l), extract_family, l});
      }
      if (in.entries.empty()) throw ConfigError("extract needs listing files or --manifest");
      validate_manifest(in, true);
      CorpusManifest out{in.families, {}};
      ParseOptions opt;
      opt.tolerated_malformed_fraction = tolerate;
      for (const auto& e : in.entries) {
        OpcodeSequence seq;
        try {
          seq = parse_disassembly({e.id, e.family, read_text_file(e.path)}, opt);
        } catch (const Error& err) {
          rethrow_with_context(err, "extract", e.id);
        }
        const std::string rel = e.id + ".ops";
        write_text_file(fs::path(extract_out) / rel, format_opcode_file(seq));
        out.entries.push_back({e.id, e.family, rel});
      }
      write_json_file(fs::path(extract_out) / "manifest.json", manifest_to_json(out));
    };
  });

  // vocab
  auto* vocab = app.add_subcommand("vocab", "Build the top-M opcode vocabulary of a corpus");
  std::string vocab_manifest, vocab_out;
  std::size_t vocab_M = 31;
  vocab->add_option("--manifest", vocab_manifest, "Corpus manifest")->required();
  vocab->add_option("-M", vocab_M, "Number of opcodes to keep");
  vocab->add_option("--out", vocab_out, "Output file (default stdout)");
  vocab->callback([&] {
    run = [&] {
      const auto seqs = load_sequences(load_manifest(vocab_manifest));
      write_output(vocab_out, vocabulary_to_json(build_vocabulary(seqs, vocab_M)).dump(2) + "\n");
    };
  });

  // scramble
  auto* scr = app.add_subcommand("scramble", "Shuffle one contiguous block of opcode sequences");
  std::string scr_in, scr_out, scr_manifest, scr_out_dir;
  double scr_fraction = 0.0;
  Seed scr_seed = 0;
  scr->add_option("--fraction", scr_fraction, "Fraction of each sequence covered by the block")->required()->check(CLI::Range(0.0, 1.0));
  scr->add_option("--seed", scr_seed, "Seed");
  scr->add_option("--input", scr_in, "Opcode file (default stdin)");
  scr->add_option("--out", scr_out, "Output file (default stdout)");
  scr->add_option("--manifest", scr_manifest, "Scramble a whole corpus instead");
  scr->add_option("--out-dir", scr_out_dir, "Output directory for --manifest");
  scr->callback([&] {
    run = [&] {
      if (!scr_manifest.empty()) {
        if (scr_out_dir.empty()) throw ConfigError("--manifest needs --out-dir");
        const auto m = load_manifest(scr_manifest);
        CorpusManifest out{m.families, {}};
        for (const auto& s : load_sequences(m)) {
          const auto sc = scramble(s, scr_fraction, derive_seed(scr_seed, s.sample_id));
          const std::string rel = s.sample_id + ".ops";
          write_text_file(fs::path(scr_out_dir) / rel, format_opcode_file(sc));
          out.entries.push_back({s.sample_id, s.family, rel});
        }
        write_json_file(fs::path(scr_out_dir) / "manifest.json", manifest_to_json(out));
        return;
      }
      std::string text;
      if (scr_in.empty() || scr_in == "-") text.assign(std::istreambuf_iterator<char>(std::cin), {});
      else text = read_text_file(scr_in);
      bool ids = false;
      OpcodeSequence seq{"stdin", "unknown", parse_opcode_text(text, &ids)};
      seq = scramble(std::move(seq), scr_fraction, scr_seed);
      std::string out = ids ? "# format: ids\n" : "";
      for (const auto& m : seq.mnemonics) out += m + "\n";
      write_output(scr_out, out);
    };
  });

  // hmm-train
  auto* hmm_train = app.add_subcommand("hmm-train", "Train one HMM per sample");
  std::string ht_manifest, ht_vocab, ht_out;
  std::size_t ht_N = 2, ht_min_length = 10;
  Seed ht_seed = 1;
  int ht_restarts = 0;
  unsigned ht_threads = 0;
  BaumWelchOptions ht_opt;
  hmm_train->add_option("--manifest", ht_manifest, "Corpus manifest")->required();
  hmm_train->add_option("--vocab", ht_vocab, "Vocabulary file")->required();
  hmm_train->add_option("-N", ht_N, "Hidden states");
  hmm_train->add_option("--seed", ht_seed, "Seed");
  hmm_train->add_option("--out-dir", ht_out, "Output directory")->required();
  hmm_train->add_option("--restarts", ht_restarts, "Fixed restart count (default: by sequence length)");
  hmm_train->add_option("--max-iters", ht_opt.max_iters, "Baum-Welch iteration cap");
  hmm_train->add_option("--tol", ht_opt.tol, "Log-likelihood convergence tolerance");
  hmm_train->add_option("--min-length", ht_min_length, "Skip samples shorter than this after filtering");
  hmm_train->add_option("--threads", ht_threads, "Worker threads (0: all cores)");
  hmm_train->callback([&] {
    run = [&] {
      const auto in = load_filtered(ht_manifest, ht_vocab, ht_min_length);
      const std::size_t M = vocabulary_from_json(read_json_file(ht_vocab)).size();
      const RestartPolicy policy = ht_restarts > 0 ? RestartPolicy::fixed(ht_restarts) : RestartPolicy{};
      const Seed base = derive_seed(ht_seed, "hmm");
      parallel_for(in.sequences.size(), resolve_threads(ht_threads), [&](std::size_t i) {
        const auto& s = in.sequences[i];
        try {
          const auto model = train_with_restarts(s.ids, ht_N, M, policy, derive_seed(base, s.sample_id), ht_opt);
          json j = hmm_to_json(model);
          j["sample_id"] = s.sample_id;
          j["family"] = s.family;
          write_json_file(fs::path(ht_out) / (s.sample_id + ".json"), j);
        } catch (const Error& e) {
          rethrow_with_context(e, "hmm", s.sample_id);
        }
      });
    };
  });

  // hmm2vec
  auto* h2v = app.add_subcommand("hmm2vec", "Turn trained HMMs into feature vectors");
  std::string h2v_models, h2v_out;
  bool h2v_general = false;
  h2v->add_option("--models", h2v_models, "Directory of model files")->required();
  h2v->add_option("--out", h2v_out, "Feature CSV (default stdout)");
  h2v->add_flag("--allow-general-n", h2v_general, "Accept N != 2");
  h2v->callback([&] {
    run = [&] {
      std::vector<FeatureVector> rows;
      for (const auto& f : json_files_in(h2v_models)) {
        const json j = read_json_file(f);
        auto fv = hmm2vec(hmm_from_json(j), {h2v_general});
        fv.sample_id = j.value("sample_id", f.stem().string());
        fv.family = j.value("family", std::string("unknown"));
        rows.push_back(std::move(fv));
      }
      write_output(h2v_out, format_feature_csv(rows));
    };
  });

  // w2v-train
  auto* w2v = app.add_subcommand("w2v-train", "Train one word embedding per sample");
  std::string wt_manifest, wt_vocab, wt_out;
  std::size_t wt_N = 31, wt_W = 1, wt_min_length = 10;
  Seed wt_seed = 1;
  unsigned wt_threads = 0;
  Word2VecParams wt_params;
  w2v->add_option("--manifest", wt_manifest, "Corpus manifest")->required();
  w2v->add_option("--vocab", wt_vocab, "Vocabulary file")->required();
  w2v->add_option("-N", wt_N, "Vector length");
  w2v->add_option("-W", wt_W, "Window size");
  w2v->add_option("--seed", wt_seed, "Seed");
  w2v->add_option("--out-dir", wt_out, "Output directory")->required();
  w2v->add_option("--epochs", wt_params.epochs, "Epochs");
  w2v->add_option("--negatives", wt_params.negatives, "Negative samples per pair");
  w2v->add_option("--min-length", wt_min_length, "Skip samples shorter than this after filtering");
  w2v->add_option("--threads", wt_threads, "Worker threads (0: all cores)");
  w2v->callback([&] {
    run = [&] {
      const auto in = load_filtered(wt_manifest, wt_vocab, wt_min_length);
      const std::size_t M = vocabulary_from_json(read_json_file(wt_vocab)).size();
      const Seed seed = derive_seed(wt_seed, "word2vec");
      parallel_for(in.sequences.size(), resolve_threads(wt_threads), [&](std::size_t i) {
        const auto& s = in.sequences[i];
        try {
          const auto model = train_word2vec(s.ids, M, wt_N, wt_W, wt_params, seed);
          json j = embedding_to_json(model.embedding);
          j["sample_id"] = s.sample_id;
          j["family"] = s.family;
          write_json_file(fs::path(wt_out) / (s.sample_id + ".json"), j);
        } catch (const Error& e) {
          rethrow_with_context(e, "word2vec", s.sample_id);
        }
      });
    };
  });

  // w2v-features
  auto* wf = app.add_subcommand("w2v-features", "Turn trained embeddings into feature vectors");
  std::string wf_emb, wf_out;
  wf->add_option("--emb", wf_emb, "Directory of embedding files")->required();
  wf->add_option("--out", wf_out, "Feature CSV (default stdout)");
  wf->callback([&] {
    run = [&] {
      std::vector<FeatureVector> rows;
      for (const auto& f : json_files_in(wf_emb)) {
        const json j = read_json_file(f);
        auto fv = word2vec_features(embedding_from_json(j));
        fv.sample_id = j.value("sample_id", f.stem().string());
        fv.family = j.value("family", std::string("unknown"));
        rows.push_back(std::move(fv));
      }
      write_output(wf_out, format_feature_csv(rows));
    };
  });

  // classify
  auto* cls = app.add_subcommand("classify", "Train on one feature CSV and score another");
  std::string cl_algo, cl_train, cl_test, cl_params, cl_out, cl_format, cl_save;
  unsigned cl_threads = 0;
  cls->add_option("--algo", cl_algo, "knn, svm, rf or nn")->required();
  cls->add_option("--train", cl_train, "Training features")->required();
  cls->add_option("--test", cl_test, "Test features")->required();
  cls->add_option("--params", cl_params, "Parameter file or inline JSON");
  cls->add_option("--out", cl_out, "Report file (default stdout)");
  cls->add_option("--format", cl_format, "json, csv or text (default from --out)");
  cls->add_option("--save-model", cl_save, "Write the trained classifier here");
  cls->add_option("--threads", cl_threads, "Worker threads (0: all cores)");
  cls->callback([&] {
    run = [&] {
      const auto start = std::chrono::steady_clock::now();
      const json params = cl_params.empty() ? json::object() : read_config_json(cl_params);
      const auto spec = classifier_spec_from_json(parse_algo(cl_algo), params);
      const auto train_rows = parse_feature_csv(read_text_file(cl_train));
      const auto test_rows = parse_feature_csv(read_text_file(cl_test));
      std::vector<std::string> families;
      for (const auto* rows : {&train_rows, &test_rows}) {
        for (const auto& r : *rows) {
          if (std::find(families.begin(), families.end(), r.family) == families.end()) families.push_back(r.family);
        }
      }
      const auto train = make_dataset(train_rows, families);
      const auto test = make_dataset(test_rows, families);
      const auto model = train_classifier(spec, train, nullptr, resolve_threads(cl_threads));
      if (!cl_save.empty()) write_json_file(cl_save, classifier_to_json(model));
      Report r;
      r.kind = "classify";
      r.config = {{"algo", cl_algo}, {"params", classifier_params_to_json(spec)}};
      r.confusion = ConfusionMatrix::from_predictions(families, test.y, predict_all(model, test));
      r.accuracy = r.confusion.accuracy();
      r.train_size = train.size();
      r.test_size = test.size();
      if (const auto* nn = std::get_if<NnModel>(&model.model)) r.curves = nn->curves;
      r.timing = {{"total", FeatureCache::elapsed(start)}};
      emit(r, cl_format, cl_out);
    };
  });

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run one end-to-end experiment");
  std::string ex_config, ex_out, ex_format;
  unsigned ex_threads = 0;
  exp->add_option("--config", ex_config, "Experiment config")->required();
  exp->add_option("--out", ex_out, "Report file (default stdout)");
  exp->add_option("--format", ex_format, "json, csv or text (default from --out)");
  exp->add_option("--threads", ex_threads, "Worker threads (0: all cores)");
  exp->callback([&] {
    run = [&] {
      auto cfg = load_config(ex_config);
      if (ex_threads) cfg.threads = ex_threads;
      emit(run_experiment(cfg), ex_format, ex_out);
    };
  });

  // grid
  auto* grid = app.add_subcommand("grid", "Run an experiment over a parameter grid");
  std::string gr_config, gr_grid, gr_out, gr_format;
  unsigned gr_threads = 0;
  grid->add_option("--config", gr_config, "Base experiment config")->required();
  grid->add_option("--grid", gr_grid, "Grid file, inline JSON, or preset: svm, knn, word2vec, opcodes")->required();
  grid->add_option("--out", gr_out, "Report file (default stdout)");
  grid->add_option("--format", gr_format, "json, csv or text (default from --out)");
  grid->add_option("--threads", gr_threads, "Worker threads (0: all cores)");
  grid->callback([&] {
    run = [&] {
      const json base = read_config_json(gr_config);
      emit(grid_search(base, fs::path(gr_config).parent_path(), grid_from_arg(gr_grid), gr_threads), gr_format,
           gr_out);
    };
  });

  // robustness
  auto* rob = app.add_subcommand("robustness", "Accuracy against scrambling fraction");
  std::string rb_config, rb_fractions = "0,0.1,0.2,0.3,0.4", rb_classifiers, rb_out, rb_format;
  unsigned rb_threads = 0;
  rob->add_option("--config", rb_config, "Base experiment config")->required();
  rob->add_option("--fractions", rb_fractions, "Comma-separated scramble fractions");
  rob->add_option("--classifiers", rb_classifiers,
                  "\"presets\", or a file / inline JSON list of {name, classifier} (default: the config's)");
  rob->add_option("--out", rb_out, "Report file (default stdout)");
  rob->add_option("--format", rb_format, "json, csv or text (default from --out)");
  rob->add_option("--threads", rb_threads, "Worker threads (0: all cores)");
  rob->callback([&] {
    run = [&] {
      const json base = read_config_json(rb_config);
      std::vector<NamedClassifier> classifiers;
      if (rb_classifiers == "presets") {
        classifiers = presets::robustness_classifiers();
      } else if (!rb_classifiers.empty()) {
        const json list = read_config_json(rb_classifiers);
        if (!list.is_array()) throw ConfigError("--classifiers must be a JSON list");
        for (const auto& c : list) {
          if (!c.is_object() || !c.contains("name") || !c.contains("classifier"))
            throw ConfigError("each classifier entry needs 'name' and 'classifier'");
          classifiers.push_back({c["name"].get<std::string>(), c["classifier"]});
        }
      }
      emit(robustness_study(base, fs::path(rb_config).parent_path(), parse_fraction_list(rb_fractions),
                            classifiers, rb_threads),
           rb_format, rb_out);
    };
  });

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
  std::string sy_spec, sy_out;
  syn->add_option("--spec", sy_spec, "Corpus spec file, inline JSON, or preset: planted7, binary_pair")->required();
  syn->add_option("--out-dir", sy_out, "Output directory")->required();
  syn->callback([&] {
    run = [&] {
      const json spec = sy_spec == "planted7"      ? presets::planted7_corpus()
                        : sy_spec == "binary_pair" ? presets::binary_pair_corpus()
                                                   : read_config_json(sy_spec);
      write_synthetic_corpus(generate(synth_spec_from_json(spec)), sy_out);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    run();
  } catch (const Error& e) {
    std::fprintf(stderr, "opseq: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "opseq: %s\n", e.what());
    return 2;
  }
  return 0;
}
