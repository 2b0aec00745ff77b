#include <cmath>
#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ntrr/data_io.hpp"
#include "ntrr/error.hpp"

namespace ntrr::data {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; };
  while (i < line.size()) {
    while (i < line.size() && space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::vector<std::string> Corpus::entity_types() const {
  std::set<std::string> types;
  for (const Sentence& s : sentences) {
    for (const std::string& t : s.tags) {
      if (auto tag = tagging::parse_tag(t, tagging::Scheme::bmes); tag && tag->kind != tagging::TagKind::O) {
        types.insert(tag->type);
      }
    }
  }
  return {types.begin(), types.end()};
}

tagging::LabelSet Corpus::label_set() const { return tagging::LabelSet(entity_types()); }

std::size_t Corpus::token_count() const {
  return std::accumulate(sentences.begin(), sentences.end(), std::size_t{0},
                         [](std::size_t n, const Sentence& s) { return n + s.tokens.size(); });
}

Corpus parse_conll(std::string_view text, tagging::Scheme scheme, const std::string& source) {
  Corpus corpus;
  corpus.source_scheme = scheme;
  Sentence current;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (current.tokens.empty()) return;
    if (scheme == tagging::Scheme::bio) {
      auto converted = tagging::bio_to_bmes(current.tags);
      corpus.repairs += converted.repairs;
      current.tags = std::move(converted.tags);
    }
    corpus.sentences.push_back(std::move(current));
    current = Sentence{};
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) {
      flush();
      continue;
    }
    if (fields.size() < 2) throw ParseError(source, line_no, "expected 'token tag', got '" + std::string(line) + "'");
    const std::string_view tag = fields.back();
    if (!tagging::parse_tag(tag, scheme)) {
      throw ParseError(source, line_no,
                       "tag '" + std::string(tag) + "' is not a " + (scheme == tagging::Scheme::bio ? "BIO" : "BMES") +
                           " tag");
    }
    current.tokens.emplace_back(fields.front());
    current.tags.emplace_back(tag);
  }
  flush();
  if (corpus.sentences.empty()) throw ParseError(source, line_no, "no sentences found");
  return corpus;
}

Corpus read_conll(const std::string& path, tagging::Scheme scheme) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_conll(buffer.str(), scheme, path);
}

void write_conll(const Corpus& corpus, std::ostream& out) {
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const Sentence& sent = corpus.sentences[s];
    if (s != 0) out << '\n';
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) out << sent.tokens[i] << ' ' << sent.tags[i] << '\n';
  }
}

void write_conll_file(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_conll(corpus, out);
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double second_ratio, std::uint64_t seed) {
  if (!(second_ratio >= 0.0 && second_ratio < 1.0)) throw ConfigError("split ratio must lie in [0, 1)");
  const std::size_t n = corpus.sentences.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, Rng::stream_id(StreamPurpose::split));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto second_count = static_cast<std::size_t>(std::llround(second_ratio * static_cast<double>(n)));
  std::vector<std::size_t> second(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(second_count));
  std::sort(second.begin(), second.end());
  Corpus a, b;
  a.source_scheme = b.source_scheme = corpus.source_scheme;
  for (std::size_t i = 0; i < n; ++i) {
    const bool in_second = std::binary_search(second.begin(), second.end(), i);
    (in_second ? b : a).sentences.push_back(corpus.sentences[i]);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace ntrr::data
