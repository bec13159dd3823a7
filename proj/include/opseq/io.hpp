#pragma once

// File formats: opcode-sequence files, corpus manifests, vocabularies, HMM
// and embedding model files, feature CSVs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "opseq/corpus.hpp"
#include "opseq/embed.hpp"
#include "opseq/features.hpp"
#include "opseq/hmm.hpp"

namespace opseq {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

inline json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Opcode-sequence files: one token per line, '#' comments. A "# format: ids"
// header marks numeric tokens; they are kept as opaque symbol names.
// ---------------------------------------------------------------------------

inline std::string format_opcode_file(const OpcodeSequence& seq) {
  std::string out = "# sample: " + seq.sample_id + "\n# family: " + seq.family + "\n";
  for (const auto& m : seq.mnemonics) {
    out += m;
    out += '\n';
  }
  return out;
}

inline std::vector<std::string> parse_opcode_text(std::string_view text, bool* ids_format = nullptr) {
  std::vector<std::string> tokens;
  bool ids = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line.front() == '#') {
      if (line.find("format: ids") != std::string_view::npos) ids = true;
      continue;
    }
    if (ids && !std::all_of(line.begin(), line.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      throw DataError("non-numeric token '" + std::string(line) + "' in an ids-format sequence file");
    tokens.push_back(ids ? std::string(line) : detail::to_lower(line));
  }
  if (ids_format) *ids_format = ids;
  return tokens;
}

inline OpcodeSequence read_opcode_file(const fs::path& path, std::string sample_id, std::string family) {
  return {std::move(sample_id), std::move(family), parse_opcode_text(read_text_file(path))};
}

// ---------------------------------------------------------------------------
// Corpus manifest: {families: [...], entries: [{id, family, path}]}. Relative
// paths are resolved against the manifest's directory on load.
// ---------------------------------------------------------------------------

inline json manifest_to_json(const CorpusManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) entries.push_back({{"id", e.id}, {"family", e.family}, {"path", e.path}});
  return {{"families", m.families}, {"entries", entries}};
}

inline void validate_manifest(const CorpusManifest& m, bool check_paths) {
  std::set<std::string> ids;
  const std::set<std::string> fams(m.families.begin(), m.families.end());
  for (const auto& e : m.entries) {
    if (e.id.empty()) throw DataError("manifest entry with empty id");
    if (!ids.insert(e.id).second) throw DataError("duplicate sample id '" + e.id + "' in manifest");
    if (!fams.count(e.family))
      throw DataError("manifest entry " + e.id + " has undeclared family '" + e.family + "'");
    if (check_paths && !fs::exists(e.path))
      throw DataError("manifest entry " + e.id + " points to missing file " + e.path);
  }
}

inline CorpusManifest manifest_from_json(const json& j, const fs::path& base_dir = {}) {
  CorpusManifest m;
  try {
    m.families = j.at("families").get<std::vector<std::string>>();
    for (const auto& e : j.at("entries")) {
      fs::path p = e.at("path").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      m.entries.push_back({e.at("id").get<std::string>(), e.at("family").get<std::string>(), p.string()});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

inline CorpusManifest load_manifest(const fs::path& path) {
  auto m = manifest_from_json(read_json_file(path), path.parent_path());
  validate_manifest(m, true);
  return m;
}

inline std::vector<OpcodeSequence> load_sequences(const CorpusManifest& m) {
  std::vector<OpcodeSequence> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) out.push_back(read_opcode_file(e.path, e.id, e.family));
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

inline json vocabulary_to_json(const Vocabulary& v) {
  return {{"M", v.size()}, {"mnemonics", v.mnemonics()}, {"frequencies", v.frequencies()}};
}

inline Vocabulary vocabulary_from_json(const json& j) {
  try {
    Vocabulary v(j.at("mnemonics").get<std::vector<std::string>>(),
                 j.at("frequencies").get<std::vector<double>>());
    if (j.contains("M") && j.at("M").get<std::size_t>() != v.size())
      throw DataError("vocabulary M does not match its mnemonic list");
    return v;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed vocabulary: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// HMM model file: {N, M, A, B, pi, log_likelihood, iterations, seed}
// ---------------------------------------------------------------------------

inline json hmm_to_json(const HmmModel& m) {
  return {{"N", m.N()},           {"M", m.M()},
          {"A", m.A.to_rows()},   {"B", m.B.to_rows()},
          {"pi", m.pi},           {"log_likelihood", m.log_likelihood},
          {"iterations", m.iterations}, {"seed", m.seed}};
}

inline HmmModel hmm_from_json(const json& j) {
  try {
    HmmModel m;
    m.A = Matrix::from_rows(j.at("A").get<std::vector<std::vector<double>>>());
    m.B = Matrix::from_rows(j.at("B").get<std::vector<std::vector<double>>>());
    m.pi = j.at("pi").get<std::vector<double>>();
    // A non-finite likelihood is written as null.
    const json& ll = j.contains("log_likelihood") ? j["log_likelihood"] : json();
    m.log_likelihood = ll.is_null() ? -std::numeric_limits<double>::infinity() : ll.get<double>();
    m.iterations = j.value("iterations", 0);
    m.seed = j.value("seed", Seed{0});
    if (j.value("N", m.N()) != m.N() || j.value("M", m.M()) != m.M())
      throw DataError("model N/M fields disagree with matrix shapes");
    validate_model(m, 1e-6);
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed HMM model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Embedding file: {N, M, W, params, seed, vectors}
// ---------------------------------------------------------------------------

inline json word2vec_params_to_json(const Word2VecParams& p) {
  return {{"epochs", p.epochs},
          {"lr_start", p.lr_start},
          {"lr_end", p.lr_end},
          {"negatives", p.negatives},
          {"noise_power", p.noise_power}};
}

inline Word2VecParams word2vec_params_from_json(const json& j) {
  Word2VecParams p;
  p.epochs = j.value("epochs", p.epochs);
  p.lr_start = j.value("lr_start", p.lr_start);
  p.lr_end = j.value("lr_end", p.lr_end);
  p.negatives = j.value("negatives", p.negatives);
  p.noise_power = j.value("noise_power", p.noise_power);
  return p;
}

inline json embedding_to_json(const EmbeddingMatrix& e) {
  return {{"N", e.N},
          {"M", e.M},
          {"W", e.W},
          {"params", word2vec_params_to_json(e.params)},
          {"seed", e.seed},
          {"vectors", e.vectors.to_rows()}};
}

inline EmbeddingMatrix embedding_from_json(const json& j) {
  try {
    EmbeddingMatrix e;
    e.N = j.at("N").get<std::size_t>();
    e.M = j.at("M").get<std::size_t>();
    e.W = j.at("W").get<std::size_t>();
    e.params = word2vec_params_from_json(j.value("params", json::object()));
    e.seed = j.value("seed", Seed{0});
    e.vectors = Matrix::from_rows(j.at("vectors").get<std::vector<std::vector<double>>>());
    if (e.vectors.rows() != e.M || e.vectors.cols() != e.N)
      throw DataError("embedding vectors do not form an M x N matrix");
    return e;
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed embedding: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Feature CSV: header sample_id,family,f0..f{D-1}
// ---------------------------------------------------------------------------

inline std::string format_feature_csv(std::span<const FeatureVector> rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  std::string out = "sample_id,family";
  for (std::size_t k = 0; k < dim; ++k) out += ",f" + std::to_string(k);
  out += '\n';
  for (const auto& r : rows) {
    if (r.size() != dim) throw DataError("feature rows have differing lengths");
    if (r.sample_id.find_first_of(",\n") != std::string::npos ||
        r.family.find_first_of(",\n") != std::string::npos)
      throw DataError("sample ids and family names must not contain commas or newlines");
    out += r.sample_id + "," + r.family;
    for (double v : r.values) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

inline std::vector<FeatureVector> parse_feature_csv(std::string_view text) {
  std::vector<FeatureVector> rows;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
      const auto c = line.find(',', pos);
      cells.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
      if (c == std::string_view::npos) break;
      pos = c + 1;
    }
    if (line_no == 1) {
      if (cells.size() < 2 || cells[0] != "sample_id" || cells[1] != "family")
        throw DataError("feature CSV must start with header sample_id,family,f0,...");
      dim = cells.size() - 2;
      continue;
    }
    if (cells.size() != dim + 2)
      throw DataError("feature CSV line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(dim + 2));
    FeatureVector fv;
    fv.sample_id = std::string(cells[0]);
    fv.family = std::string(cells[1]);
    for (std::size_t k = 0; k < dim; ++k) {
      const std::string cell(cells[k + 2]);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw DataError("bad number '" + cell + "' on feature CSV line " + std::to_string(line_no));
      fv.values.push_back(v);
    }
    rows.push_back(std::move(fv));
  }
  return rows;
}

}  // namespace opseq
