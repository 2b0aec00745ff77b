#include "ntrr/tagging.hpp"

#include <algorithm>
#include <set>

#include "ntrr/error.hpp"

namespace ntrr::tagging {
namespace {

bool is_open(TagKind k) { return k == TagKind::B || k == TagKind::M; }

}  // namespace

std::optional<Tag> parse_tag(std::string_view text, Scheme scheme) {
  if (text == "O") return Tag{};
  if (text.size() < 3 || text[1] != '-') return std::nullopt;
  Tag tag;
  tag.type = std::string(text.substr(2));
  switch (text[0]) {
    case 'B':
      tag.kind = TagKind::B;
      return tag;
    case 'I':
      if (scheme != Scheme::bio) return std::nullopt;
      tag.kind = TagKind::I;
      return tag;
    case 'M':
    case 'E':
    case 'S':
      if (scheme != Scheme::bmes) return std::nullopt;
      tag.kind = text[0] == 'M' ? TagKind::M : (text[0] == 'E' ? TagKind::E : TagKind::S);
      return tag;
    default:
      return std::nullopt;
  }
}

std::string format_tag(const Tag& tag) {
  static constexpr char kPrefix[] = {'O', 'B', 'M', 'E', 'S', 'I'};
  if (tag.kind == TagKind::O) return "O";
  return std::string(1, kPrefix[static_cast<int>(tag.kind)]) + "-" + tag.type;
}

LabelSet::LabelSet(std::vector<std::string> entity_types) : types_(std::move(entity_types)) {
  std::set<std::string> seen;
  for (const std::string& t : types_) {
    if (t.empty()) throw ConfigError("label set: empty entity type name");
    if (t.find_first_of(" \t\r\n,") != std::string::npos) throw ConfigError("label set: invalid type name '" + t + "'");
    if (!seen.insert(t).second) throw ConfigError("label set: duplicate entity type '" + t + "'");
  }
}

std::string LabelSet::name(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= size()) {
    throw IndexError("tag index " + std::to_string(index) + " outside label set of " + std::to_string(size()));
  }
  if (index == 0) return "O";
  return format_tag(Tag{kind(index), types_[static_cast<std::size_t>(type_slot(index))]});
}

std::optional<int> LabelSet::index_of(std::string_view text) const {
  const auto tag = parse_tag(text, Scheme::bmes);
  if (!tag) return std::nullopt;
  if (tag->kind == TagKind::O) return 0;
  const auto it = std::find(types_.begin(), types_.end(), tag->type);
  if (it == types_.end()) return std::nullopt;
  return index(tag->kind, static_cast<int>(it - types_.begin()));
}

int LabelSet::require_index(std::string_view tag) const {
  if (auto idx = index_of(tag)) return *idx;
  throw IndexError("tag '" + std::string(tag) + "' is not in the label set");
}

TagKind LabelSet::kind(int index) const {
  if (index == 0) return TagKind::O;
  static constexpr TagKind kOrder[] = {TagKind::B, TagKind::M, TagKind::E, TagKind::S};
  return kOrder[(index - 1) % 4];
}

int LabelSet::type_slot(int index) const { return index == 0 ? -1 : (index - 1) / 4; }

int LabelSet::index(TagKind k, int slot) const {
  switch (k) {
    case TagKind::O:
      return 0;
    case TagKind::B:
      return 1 + 4 * slot;
    case TagKind::M:
      return 2 + 4 * slot;
    case TagKind::E:
      return 3 + 4 * slot;
    case TagKind::S:
      return 4 + 4 * slot;
    case TagKind::I:
      break;
  }
  throw ContractError("I- tags are not part of the BMES label set");
}

bool LabelSet::allowed_transition(int prev, int cur) const {
  const TagKind c = kind(cur);
  if (prev < 0 || !is_open(kind(prev))) return c == TagKind::O || c == TagKind::B || c == TagKind::S;
  return (c == TagKind::M || c == TagKind::E) && type_slot(cur) == type_slot(prev);
}

bool LabelSet::allowed_end(int last) const { return !is_open(kind(last)); }

TagSequence make_tag_sequence(const LabelSet& labels, std::vector<int> tags) {
  TagSequence seq{std::move(tags), true};
  seq.valid = validate_bmes(labels, seq.tags).empty();
  return seq;
}

BmesConversion bio_to_bmes(std::span<const std::string> bio) {
  std::vector<Tag> parsed;
  parsed.reserve(bio.size());
  for (const std::string& s : bio) {
    auto tag = parse_tag(s, Scheme::bio);
    if (!tag) throw ContractError("'" + s + "' is not a BIO tag");
    parsed.push_back(std::move(*tag));
  }
  // First pass: resolve which I- tags continue a span, dropping broken runs.
  BmesConversion out;
  std::vector<Tag> cleaned(parsed.size());
  std::string open_type;
  bool open = false;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    const Tag& t = parsed[i];
    if (t.kind == TagKind::B) {
      cleaned[i] = t;
      open = true;
      open_type = t.type;
    } else if (t.kind == TagKind::I) {
      if (open && open_type == t.type) {
        cleaned[i] = t;
      } else {
        ++out.repairs;
        open = false;
      }
    } else {
      open = false;
    }
  }
  // Second pass: a span is B (I)*; its last token decides E/S.
  out.tags.resize(parsed.size());
  for (std::size_t i = 0; i < cleaned.size(); ++i) {
    const Tag& t = cleaned[i];
    const bool continues = i + 1 < cleaned.size() && cleaned[i + 1].kind == TagKind::I;
    switch (t.kind) {
      case TagKind::B:
        out.tags[i] = format_tag(Tag{continues ? TagKind::B : TagKind::S, t.type});
        break;
      case TagKind::I:
        out.tags[i] = format_tag(Tag{continues ? TagKind::M : TagKind::E, t.type});
        break;
      default:
        out.tags[i] = "O";
    }
  }
  return out;
}

std::vector<std::size_t> validate_bmes(const LabelSet& labels, std::span<const int> tags) {
  std::vector<std::size_t> bad;
  int prev = -1;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    labels.name(tags[i]);  // range check
    if (!labels.allowed_transition(prev, tags[i])) bad.push_back(i);
    prev = tags[i];
  }
  if (!tags.empty() && !labels.allowed_end(tags.back()) && (bad.empty() || bad.back() != tags.size() - 1)) {
    bad.push_back(tags.size() - 1);
  }
  return bad;
}

Extraction extract_entities(const LabelSet& labels, std::span<const int> tags) {
  Extraction out;
  bool open = false;
  std::size_t start = 0;
  int slot = -1;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const int t = tags[i];
    const TagKind k = labels.kind(t);
    const int s = labels.type_slot(t);
    switch (k) {
      case TagKind::B:
        open = true;
        start = i;
        slot = s;
        break;
      case TagKind::M:
        if (!(open && slot == s)) open = false;
        break;
      case TagKind::E:
        if (open && slot == s) {
          out.entities.push_back({start, i, labels.entity_types()[static_cast<std::size_t>(s)]});
        }
        open = false;
        break;
      case TagKind::S:
        out.entities.push_back({i, i, labels.entity_types()[static_cast<std::size_t>(s)]});
        open = false;
        break;
      default:
        open = false;
    }
  }
  out.repairs = validate_bmes(labels, tags).size();
  return out;
}

Extraction extract_entities(const TagSequence& seq, const LabelSet& labels) { return extract_entities(labels, seq.tags); }

Extraction extract_entities(std::span<const std::string> bmes_tags) {
  std::vector<std::string> types;
  std::vector<Tag> parsed;
  for (const std::string& s : bmes_tags) {
    auto tag = parse_tag(s, Scheme::bmes);
    if (!tag) throw ContractError("'" + s + "' is not a BMES tag");
    if (tag->kind != TagKind::O && std::find(types.begin(), types.end(), tag->type) == types.end()) {
      types.push_back(tag->type);
    }
    parsed.push_back(std::move(*tag));
  }
  const LabelSet labels(types);
  std::vector<int> ids;
  ids.reserve(parsed.size());
  for (const Tag& t : parsed) {
    ids.push_back(t.kind == TagKind::O
                      ? 0
                      : labels.index(t.kind, static_cast<int>(std::find(types.begin(), types.end(), t.type) -
                                                              types.begin())));
  }
  return extract_entities(labels, ids);
}

Score score_from_counts(std::size_t tp, std::size_t predicted, std::size_t gold) {
  Score s{tp, predicted, gold, 0.0, 0.0, 0.0};
  if (predicted == 0 && gold == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
  s.recall = gold == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold);
  const double denom = s.precision + s.recall;
  s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
  return s;
}

PrfReport entity_prf(std::span<const Entity> pred, std::span<const Entity> gold) {
  PrfAccumulator acc;
  acc.add(pred, gold);
  return acc.report();
}

PrfAccumulator::Counts& PrfAccumulator::slot(const std::string& type) {
  auto it = std::lower_bound(per_type_.begin(), per_type_.end(), type,
                             [](const auto& entry, const std::string& key) { return entry.first < key; });
  if (it == per_type_.end() || it->first != type) it = per_type_.insert(it, {type, Counts{}});
  return it->second;
}

void PrfAccumulator::add(std::span<const Entity> pred, std::span<const Entity> gold) {
  const std::set<Entity> pred_set(pred.begin(), pred.end());
  const std::set<Entity> gold_set(gold.begin(), gold.end());
  for (const Entity& e : pred_set) {
    ++total_.pred;
    ++slot(e.type).pred;
    if (gold_set.count(e) != 0) {
      ++total_.tp;
      ++slot(e.type).tp;
    }
  }
  for (const Entity& e : gold_set) {
    ++total_.gold;
    ++slot(e.type).gold;
  }
}

PrfReport PrfAccumulator::report() const {
  PrfReport r;
  r.overall = score_from_counts(total_.tp, total_.pred, total_.gold);
  for (const auto& [type, c] : per_type_) r.per_type.push_back({type, score_from_counts(c.tp, c.pred, c.gold)});
  return r;
}

}  // namespace ntrr::tagging
