#pragma once

// BMES tag scheme, BIO conversion, entity extraction and entity-level scoring.
//
// Ill-formed sequences are repaired by dropping every unclosed or
// type-inconsistent span; a close is never guessed. Repairs are counted.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ntrr::tagging {

enum class TagKind : std::uint8_t { O, B, M, E, S, I };

enum class Scheme { bio, bmes };

struct Tag {
  TagKind kind = TagKind::O;
  std::string type;  // empty for O
  friend bool operator==(const Tag&, const Tag&) = default;
};

/// Parses "O", "B-PER", ... against a scheme. Returns nullopt when the tag is
/// not part of the scheme (e.g. "M-PER" under BIO, "X", "B-").
std::optional<Tag> parse_tag(std::string_view text, Scheme scheme);
std::string format_tag(const Tag& tag);

/// Tag vocabulary: index 0 is O, then B-,M-,E-,S- for each entity type in the
/// order given.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> entity_types);

  const std::vector<std::string>& entity_types() const noexcept { return types_; }
  std::size_t size() const noexcept { return 1 + 4 * types_.size(); }
  std::string name(int index) const;
  std::optional<int> index_of(std::string_view tag) const;
  /// Throws IndexError for unknown tags.
  int require_index(std::string_view tag) const;
  TagKind kind(int index) const;
  /// Entity type slot of a non-O tag, -1 for O.
  int type_slot(int index) const;
  int index(TagKind kind, int type_slot) const;

  /// BMES transition legality; prev == -1 means start of sentence.
  bool allowed_transition(int prev, int cur) const;
  bool allowed_end(int last) const;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<std::string> types_;
};

struct Entity {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  std::string type;
  friend auto operator<=>(const Entity&, const Entity&) = default;
};

struct TagSequence {
  std::vector<int> tags;
  bool valid = true;
};

TagSequence make_tag_sequence(const LabelSet& labels, std::vector<int> tags);

struct BmesConversion {
  std::vector<std::string> tags;
  std::size_t repairs = 0;
};

/// BIO -> BMES. An I- tag that does not continue a span of its own type is
/// ill-formed; it and the rest of that broken run become O and count as one
/// repair each. Throws ContractError for strings that are not BIO tags.
BmesConversion bio_to_bmes(std::span<const std::string> bio);

/// Indices whose incoming transition is illegal, plus the last index when the
/// sequence ends inside an open span.
std::vector<std::size_t> validate_bmes(const LabelSet& labels, std::span<const int> tags);

struct Extraction {
  std::vector<Entity> entities;  // sorted by start, non-overlapping
  std::size_t repairs = 0;       // == validate_bmes(...).size()
};

Extraction extract_entities(const LabelSet& labels, std::span<const int> tags);
Extraction extract_entities(const TagSequence& seq, const LabelSet& labels);
/// String form; throws ContractError on strings that are not BMES tags.
Extraction extract_entities(std::span<const std::string> bmes_tags);

struct Score {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
};

struct TypeScore {
  std::string type;
  Score score;
};

struct PrfReport {
  Score overall;
  std::vector<TypeScore> per_type;  // sorted by type name
};

/// Precision/recall with the empty-set convention: 1.0 when numerator and
/// denominator sets are both empty, 0.0 when only the denominator set is.
Score score_from_counts(std::size_t true_positives, std::size_t predicted, std::size_t gold);

/// Exact-match (start, end, type) scoring of one entity set pair.
PrfReport entity_prf(std::span<const Entity> pred, std::span<const Entity> gold);

/// Corpus-level accumulation over many sentences.
class PrfAccumulator {
 public:
  void add(std::span<const Entity> pred, std::span<const Entity> gold);
  PrfReport report() const;

 private:
  struct Counts {
    std::size_t tp = 0, pred = 0, gold = 0;
  };
  std::vector<std::pair<std::string, Counts>> per_type_;
  Counts total_;
  Counts& slot(const std::string& type);
};

}  // namespace ntrr::tagging
