#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "opseq/error.hpp"

namespace opseq {

enum class Provenance { hmm2vec, word2vec };

inline std::string_view to_string(Provenance p) noexcept {
  return p == Provenance::hmm2vec ? "hmm2vec" : "word2vec";
}

inline Provenance parse_provenance(std::string_view s) {
  if (s == "hmm2vec") return Provenance::hmm2vec;
  if (s == "word2vec") return Provenance::word2vec;
  throw ConfigError("unknown feature kind '" + std::string(s) + "' (expected hmm2vec or word2vec)");
}

// Engineered per-sample vector of length N*M.
struct FeatureVector {
  std::vector<double> values;
  Provenance provenance = Provenance::hmm2vec;
  std::string sample_id;
  std::string family;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

}  // namespace opseq
