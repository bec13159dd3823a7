#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "opseq/error.hpp"
#include "opseq/random.hpp"

namespace opseq {

using Symbol = std::uint32_t;

struct RawListing {
  std::string sample_id;
  std::string family;
  std::string text;
};

// Mnemonic stream of one sample, before vocabulary filtering.
struct OpcodeSequence {
  std::string sample_id;
  std::string family;
  std::vector<std::string> mnemonics;

  std::size_t length() const noexcept { return mnemonics.size(); }
};

// Filtered sequence: every id lies in [0, M) of the vocabulary it was
// encoded against.
struct EncodedSequence {
  std::string sample_id;
  std::string family;
  std::vector<Symbol> ids;

  std::size_t length() const noexcept { return ids.size(); }
  friend bool operator==(const EncodedSequence&, const EncodedSequence&) = default;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> mnemonics, std::vector<double> frequencies)
      : mnemonics_(std::move(mnemonics)), frequencies_(std::move(frequencies)) {
    if (frequencies_.size() != mnemonics_.size())
      throw DataError("vocabulary: frequency list length differs from mnemonic list");
    for (std::size_t i = 0; i < mnemonics_.size(); ++i) {
      if (!index_.emplace(mnemonics_[i], static_cast<Symbol>(i)).second)
        throw DataError("vocabulary: duplicate mnemonic '" + mnemonics_[i] + "'");
    }
  }

  std::size_t size() const noexcept { return mnemonics_.size(); }
  const std::vector<std::string>& mnemonics() const noexcept { return mnemonics_; }
  // Percent of all opcode occurrences in the corpus the vocabulary was built from.
  const std::vector<double>& frequencies() const noexcept { return frequencies_; }
  const std::string& mnemonic(Symbol id) const { return mnemonics_.at(id); }

  std::optional<Symbol> find(std::string_view mnemonic) const {
    auto it = index_.find(std::string(mnemonic));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> mnemonics_;
  std::vector<double> frequencies_;
  std::unordered_map<std::string, Symbol> index_;
};

struct ManifestEntry {
  std::string id;
  std::string family;
  std::string path;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
  std::vector<std::string> families;
  std::vector<ManifestEntry> entries;
  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

// ---------------------------------------------------------------------------
// Disassembly parsing
// ---------------------------------------------------------------------------

struct ParseOptions {
  // Fraction of instruction-like lines allowed to yield no mnemonic.
  double tolerated_malformed_fraction = 0.0;
};

namespace detail {

inline bool is_hex(char c) noexcept { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

inline bool is_byte_token(std::string_view t) noexcept {
  return t.size() == 2 && is_hex(t[0]) && is_hex(t[1]);
}

inline bool is_mnemonic_token(std::string_view t) noexcept {
  if (t.empty() || !std::isalpha(static_cast<unsigned char>(t[0]))) return false;
  return std::all_of(t.begin(), t.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_';
  });
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_prefix(std::string_view m) noexcept {
  static constexpr std::string_view kPrefixes[] = {
      "rep",    "repe",   "repz",  "repne", "repnz", "lock", "data16", "data32",
      "addr16", "addr32", "notrack", "bnd", "xacquire", "xrelease",
      "cs",     "ds",     "es",    "fs",    "gs",    "ss"};
  if (m.starts_with("rex")) return true;
  return std::find(std::begin(kPrefixes), std::end(kPrefixes), m) != std::end(kPrefixes);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

enum class LineKind { other, instruction, continuation, malformed };

// Classifies one listing line and appends its mnemonic(s) to `out`.
// Instruction lines are "<hex address>:" followed by hex byte pairs and the
// mnemonic; anything else (section headers, "<symbol>:" labels, blanks,
// elided "..." runs) is ignored.
inline LineKind parse_line(std::string_view line, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  const std::size_t addr_begin = i;
  while (i < line.size() && is_hex(line[i])) ++i;
  if (i == addr_begin || i >= line.size() || line[i] != ':') return LineKind::other;

  const std::string_view rest = line.substr(i + 1);
  if (rest.find("file format") != std::string_view::npos) return LineKind::other;

  const auto tokens = split_ws(rest);
  std::size_t k = 0;
  while (k < tokens.size() && is_byte_token(tokens[k])) ++k;
  if (k == tokens.size()) {
    // objdump wraps long encodings onto byte-only lines.
    return k > 0 ? LineKind::continuation : LineKind::malformed;
  }
  if (!is_mnemonic_token(tokens[k])) return LineKind::malformed;

  std::string m = to_lower(tokens[k]);
  while (is_prefix(m) && k + 1 < tokens.size() && is_mnemonic_token(tokens[k + 1])) {
    out.push_back(std::move(m));
    ++k;
    m = to_lower(tokens[k]);
  }
  out.push_back(std::move(m));
  return LineKind::instruction;
}

}  // namespace detail

inline OpcodeSequence parse_disassembly(const RawListing& listing, const ParseOptions& options = {}) {
  OpcodeSequence seq{listing.sample_id, listing.family, {}};
  std::size_t instruction_like = 0;
  std::size_t malformed = 0;
  std::size_t first_bad_line = 0;

  std::string_view text = listing.text;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    switch (detail::parse_line(line, seq.mnemonics)) {
      case detail::LineKind::other:
        break;
      case detail::LineKind::instruction:
      case detail::LineKind::continuation:
        ++instruction_like;
        break;
      case detail::LineKind::malformed:
        ++instruction_like;
        if (++malformed == 1) first_bad_line = line_no;
        break;
    }
  }

  if (malformed > 0 &&
      static_cast<double>(malformed) >
          options.tolerated_malformed_fraction * static_cast<double>(instruction_like)) {
    throw DataError("parse error in " + listing.sample_id + ": " + std::to_string(malformed) +
                    " malformed instruction line(s), first at line " +
                    std::to_string(first_bad_line));
  }
  return seq;
}

// Renders mnemonics as an objdump-style listing that parse_disassembly reads
// back to the same token list.
inline std::string render_listing(std::span<const std::string> mnemonics,
                                  std::uint64_t base_address = 0x401000) {
  std::string out = "\nDisassembly of section .text:\n\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%016llx <_start>:\n", static_cast<unsigned long long>(base_address));
  out += buf;
  std::uint64_t addr = base_address;
  for (const auto& m : mnemonics) {
    std::snprintf(buf, sizeof buf, "  %llx:\t90 \t", static_cast<unsigned long long>(addr));
    out += buf;
    out += m;
    out += '\n';
    ++addr;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

// Keeps the M globally most frequent mnemonics; ties by mnemonic order.
inline Vocabulary build_vocabulary(std::span<const OpcodeSequence> sequences, std::size_t M) {
  if (M == 0) throw ConfigError("vocabulary size M must be at least 1");
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  for (const auto& seq : sequences) {
    for (const auto& m : seq.mnemonics) ++counts[m];
    total += seq.mnemonics.size();
  }
  if (counts.size() < M) {
    throw DataError("cannot keep " + std::to_string(M) + " opcodes: corpus has only " +
                    std::to_string(counts.size()) + " distinct mnemonics");
  }

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  ranked.resize(M);

  std::vector<std::string> mnemonics;
  std::vector<double> freqs;
  for (auto& [m, c] : ranked) {
    mnemonics.push_back(m);
    freqs.push_back(100.0 * static_cast<double>(c) / static_cast<double>(total));
  }
  return Vocabulary(std::move(mnemonics), std::move(freqs));
}

// Drops out-of-vocabulary tokens and maps the survivors to ids.
inline EncodedSequence filter_sequence(const OpcodeSequence& seq, const Vocabulary& vocab) {
  EncodedSequence out{seq.sample_id, seq.family, {}};
  out.ids.reserve(seq.mnemonics.size());
  for (const auto& m : seq.mnemonics) {
    if (auto id = vocab.find(m)) out.ids.push_back(*id);
  }
  if (out.ids.empty())
    throw DataError("sequence " + seq.sample_id + " is empty after vocabulary filtering");
  return out;
}

// ---------------------------------------------------------------------------
// Scrambling
// ---------------------------------------------------------------------------

struct ScrambleBlock {
  std::size_t offset = 0;
  std::size_t length = 0;
};

inline std::size_t scramble_block_length(std::size_t length, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ConfigError("scramble fraction must lie in [0, 1]");
  // The epsilon keeps e.g. 0.1 * 100 from rounding up to 11.
  const double raw = std::ceil(fraction * static_cast<double>(length) - 1e-9);
  return std::min(length, static_cast<std::size_t>(std::max(0.0, raw)));
}

// Shuffles one contiguous block covering ceil(fraction * n) tokens. The block
// start is uniform over valid offsets. Tokens outside the block are untouched.
template <class T>
ScrambleBlock scramble_in_place(std::span<T> tokens, double fraction, Seed seed) {
  const std::size_t len = scramble_block_length(tokens.size(), fraction);
  if (len == 0) return {};
  Rng rng(seed);
  const std::size_t offset = uniform_index(rng, 0, tokens.size() - len);
  std::shuffle(tokens.begin() + static_cast<std::ptrdiff_t>(offset),
               tokens.begin() + static_cast<std::ptrdiff_t>(offset + len), rng);
  return {offset, len};
}

inline EncodedSequence scramble(EncodedSequence seq, double fraction, Seed seed) {
  scramble_in_place(std::span<Symbol>(seq.ids), fraction, seed);
  return seq;
}

inline OpcodeSequence scramble(OpcodeSequence seq, double fraction, Seed seed) {
  scramble_in_place(std::span<std::string>(seq.mnemonics), fraction, seed);
  return seq;
}

}  // namespace opseq
