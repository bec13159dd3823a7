#pragma once

#include <string>
#include <vector>

#include "opseq/io.hpp"
#include "opseq/synthetic.hpp"

namespace opseq {

// Two-state generator over M symbols. State 0 emits the anchor symbol 0 with
// probability 0.3, state 1 with 0.05. The remaining mass is split evenly
// between a uniform spread over symbols 1..M-1 and a four-symbol signature
// set that differs per family and per state.
inline HmmModel planted_family_generator(std::size_t family, std::size_t M = 31, double stay = 0.9) {
  if (M < 9) throw ConfigError("planted families need M >= 9");
  const std::size_t K = M - 1;
  HmmModel g;
  g.A = Matrix::from_rows({{stay, 1.0 - stay}, {1.0 - stay, stay}});
  g.pi = {0.5, 0.5};
  g.B = Matrix(2, M, 0.0);
  const double anchor[2] = {0.3, 0.05};
  for (std::size_t s = 0; s < 2; ++s) {
    const double rest = 1.0 - anchor[s];
    g.B(s, 0) = anchor[s];
    for (std::size_t k = 1; k < M; ++k) g.B(s, k) += 0.5 * rest / static_cast<double>(K);
    const std::size_t base = 4 * family + (s == 0 ? 0 : K / 2);
    for (std::size_t k = 0; k < 4; ++k) g.B(s, 1 + (base + k) % K) += 0.5 * rest / 4.0;
  }
  return g;
}

inline std::vector<FamilySpec> planted_families(std::size_t count, std::size_t M = 31) {
  std::vector<FamilySpec> out;
  for (std::size_t f = 0; f < count; ++f)
    out.push_back({"family" + std::to_string(f), planted_family_generator(f, M)});
  return out;
}

// Two families with identical emissions that differ only in how often the
// hidden state switches: opcode frequencies match, local order does not.
inline std::vector<FamilySpec> binary_pair_families(std::size_t M = 31, double stay_a = 0.95,
                                                    double stay_b = 0.6) {
  return {{"alpha", planted_family_generator(0, M, stay_a)}, {"beta", planted_family_generator(0, M, stay_b)}};
}

// Synthetic corpus description, shared by `synth` and inline experiment
// corpora: {"preset": "planted7" | "binary_pair"} or {"families": [{label,
// A, B, pi}...]}, plus samples_per_family, lengths [min, max], seed.
struct SynthSpec {
  std::vector<FamilySpec> families;
  std::size_t samples_per_family = 100;
  LengthRange lengths{1000, 3000};
  Seed seed = 1;
  json echo;
};

inline SynthSpec synth_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synthetic corpus spec must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "preset" && key != "families" && key != "samples_per_family" && key != "lengths" &&
        key != "seed" && key != "M")
      throw ConfigError("unknown synthetic corpus key '" + key + "'");
  }
  try {
    SynthSpec s;
    const auto M = j.value("M", std::size_t{31});
    if (j.contains("preset") == j.contains("families"))
      throw ConfigError("synthetic corpus needs exactly one of 'preset' or 'families'");
    if (j.contains("preset")) {
      const std::string p = j["preset"].get<std::string>();
      if (p == "planted7") s.families = planted_families(7, M);
      else if (p == "binary_pair") s.families = binary_pair_families(M);
      else throw ConfigError("unknown synthetic preset '" + p + "' (expected planted7 or binary_pair)");
    } else {
      for (const auto& f : j["families"]) {
        try {
          s.families.push_back({f.at("label").get<std::string>(), hmm_from_json(f)});
        } catch (const DataError& e) {
          throw ConfigError(std::string("synthetic family: ") + e.what());
        }
      }
      if (s.families.empty()) throw ConfigError("synthetic corpus needs at least one family");
    }
    s.samples_per_family = j.value("samples_per_family", s.samples_per_family);
    if (j.contains("lengths")) {
      const auto l = j["lengths"].get<std::vector<std::size_t>>();
      if (l.size() != 2) throw ConfigError("synthetic lengths must be [min, max]");
      s.lengths = {l[0], l[1]};
    }
    if (s.lengths.min < 2 || s.lengths.max < s.lengths.min)
      throw ConfigError("synthetic lengths must satisfy 2 <= min <= max");
    if (s.samples_per_family < 1) throw ConfigError("samples_per_family must be >= 1");
    s.seed = j.value("seed", s.seed);
    s.echo = j;
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid synthetic corpus spec: ") + e.what());
  }
}

inline SyntheticCorpus generate(const SynthSpec& s) {
  return generate_synthetic_corpus(s.families, s.samples_per_family, s.lengths, s.seed);
}

// Symbol ids become opaque token names, so synthetic and parsed corpora take
// the same path through vocabulary building and filtering.
inline std::vector<OpcodeSequence> as_opcode_sequences(const SyntheticCorpus& c) {
  std::vector<OpcodeSequence> out;
  out.reserve(c.sequences.size());
  for (const auto& s : c.sequences) {
    OpcodeSequence o{s.sample_id, s.family, {}};
    o.mnemonics.reserve(s.ids.size());
    for (Symbol id : s.ids) o.mnemonics.push_back(std::to_string(id));
    out.push_back(std::move(o));
  }
  return out;
}

inline std::string format_ids_file(const EncodedSequence& seq) {
  std::string out = "# sample: " + seq.sample_id + "\n# family: " + seq.family + "\n# format: ids\n";
  for (Symbol id : seq.ids) out += std::to_string(id) + "\n";
  return out;
}

// Writes one ids-format file per sample plus manifest.json into `dir`.
inline CorpusManifest write_synthetic_corpus(const SyntheticCorpus& c, const fs::path& dir) {
  CorpusManifest m = c.manifest;
  for (std::size_t i = 0; i < c.sequences.size(); ++i) {
    const auto& s = c.sequences[i];
    const std::string rel = s.family + "/" + s.sample_id + ".ops";
    write_text_file(dir / rel, format_ids_file(s));
    m.entries[i].path = rel;
  }
  write_json_file(dir / "manifest.json", manifest_to_json(m));
  return m;
}

}  // namespace opseq
