#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "opseq/corpus.hpp"
#include "opseq/hmm.hpp"

namespace opseq {

// One labeled family and the planted model its samples are drawn from.
struct FamilySpec {
  std::string label;
  HmmModel generator;
};

struct LengthRange {
  std::size_t min = 1;
  std::size_t max = 1;
};

struct SyntheticCorpus {
  CorpusManifest manifest;  // entry paths are left empty until written out
  std::vector<EncodedSequence> sequences;
};

// A first-order Markov chain over M symbols, as an HMM whose states emit
// their own index.
inline HmmModel markov_chain_generator(const Matrix& transitions, std::vector<double> initial) {
  const std::size_t m = transitions.rows();
  HmmModel g{transitions, Matrix(m, m), std::move(initial), 0.0, 0, 0};
  for (std::size_t i = 0; i < m; ++i) g.B(i, i) = 1.0;
  return g;
}

inline std::string synthetic_sample_id(const std::string& label, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return label + "-" + buf;
}

// Seeded, reproducible corpus: samples_per_family sequences per family with
// lengths uniform in `lengths`. Each sample's stream depends only on (seed,
// sample id).
inline SyntheticCorpus generate_synthetic_corpus(const std::vector<FamilySpec>& families,
                                                 std::size_t samples_per_family,
                                                 LengthRange lengths, Seed seed) {
  if (lengths.min < 1 || lengths.max < lengths.min)
    throw ConfigError("synthetic length range must satisfy 1 <= min <= max");
  SyntheticCorpus out;
  for (const auto& fam : families) {
    try {
      validate_model(fam.generator);
    } catch (const Error& e) {
      throw DataError("generator for family '" + fam.label + "': " + e.what());
    }
    out.manifest.families.push_back(fam.label);
  }
  for (const auto& fam : families) {
    for (std::size_t s = 0; s < samples_per_family; ++s) {
      EncodedSequence seq;
      seq.sample_id = synthetic_sample_id(fam.label, s);
      seq.family = fam.label;
      Rng rng(derive_seed(seed, seq.sample_id));
      const std::size_t len = uniform_index(rng, lengths.min, lengths.max);
      seq.ids = sample_sequence(fam.generator, len, rng);
      out.manifest.entries.push_back({seq.sample_id, seq.family, {}});
      out.sequences.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace opseq
