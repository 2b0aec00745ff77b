#pragma once

// Corpus ingestion, vocabulary, batching.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ntrr/rng.hpp"
#include "ntrr/tagging.hpp"

namespace ntrr::data {

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;  // BMES after ingestion
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Corpus {
  std::vector<Sentence> sentences;
  tagging::Scheme source_scheme = tagging::Scheme::bmes;
  std::size_t repairs = 0;  // ill-formed BIO spans dropped during conversion

  /// Entity types present, sorted.
  std::vector<std::string> entity_types() const;
  tagging::LabelSet label_set() const;
  std::size_t token_count() const;
};

/// Parses CoNLL column text: "token tag" per line (whitespace separated, the
/// tag is the last column), blank line between sentences. BIO input is
/// converted to BMES. Errors carry `source` and a 1-based line number.
Corpus parse_conll(std::string_view text, tagging::Scheme scheme, const std::string& source = "<input>");
Corpus read_conll(const std::string& path, tagging::Scheme scheme);
void write_conll(const Corpus& corpus, std::ostream& out);
void write_conll_file(const Corpus& corpus, const std::string& path);

/// Seeded split: returns (first, second) with round(ratio * n) sentences in
/// the second part.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double second_ratio, std::uint64_t seed);

enum class TokenMode { character, whitespace };

/// Splits a UTF-8 string into code-point strings, skipping whitespace.
/// Invalid bytes become single-byte tokens.
std::vector<std::string> utf8_characters(std::string_view text);
std::vector<std::string> tokenize(std::string_view line, TokenMode mode);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();
  /// From training sentences only; tokens with frequency >= min_freq, ordered
  /// by frequency descending then lexicographically.
  static Vocab build(const Corpus& corpus, std::size_t min_freq);
  /// Restores a saved token list (ids are positions); first two entries must
  /// be the reserved tokens.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::vector<int> encode(std::span<const std::string> tokens) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

/// Padded batch. Matrices are row-major [batch, max_len].
struct Batch {
  std::size_t batch_size = 0;
  std::size_t max_len = 0;
  std::vector<int> token_ids;
  std::vector<int> tag_ids;
  std::vector<std::uint8_t> token_mask;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> sentence_index;  // position in the source corpus

  std::span<const int> tokens(std::size_t row) const { return {token_ids.data() + row * max_len, lengths[row]}; }
  std::span<const int> tags(std::size_t row) const { return {tag_ids.data() + row * max_len, lengths[row]}; }
  /// Rows followed by the same rows again (R-Drop batch duplication).
  Batch duplicated() const;
};

/// Shuffles sentence order with `rng` (when given) and cuts padded batches.
std::vector<Batch> make_batches(const Corpus& corpus, const Vocab& vocab, const tagging::LabelSet& labels,
                                std::size_t batch_size, Rng* rng);

/// Deterministic synthetic BMES corpus (PER/LOC/ORG, character tokens).
Corpus synthetic_corpus(std::size_t sentences, std::uint64_t seed);

}  // namespace ntrr::data
