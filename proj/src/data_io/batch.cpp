#include <algorithm>
#include <numeric>

#include "ntrr/data_io.hpp"
#include "ntrr/error.hpp"

namespace ntrr::data {

Batch Batch::duplicated() const {
  Batch out = *this;
  out.batch_size = 2 * batch_size;
  auto twice = [](auto& v) {
    const auto copy = v;
    v.insert(v.end(), copy.begin(), copy.end());
  };
  twice(out.token_ids);
  twice(out.tag_ids);
  twice(out.token_mask);
  twice(out.lengths);
  twice(out.sentence_index);
  return out;
}

std::vector<Batch> make_batches(const Corpus& corpus, const Vocab& vocab, const tagging::LabelSet& labels,
                                std::size_t batch_size, Rng* rng) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  const std::size_t n = corpus.sentences.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (rng != nullptr) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng->below(i)]);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    Batch b;
    b.batch_size = count;
    for (std::size_t r = 0; r < count; ++r) b.max_len = std::max(b.max_len, corpus.sentences[order[start + r]].tokens.size());
    b.token_ids.assign(count * b.max_len, Vocab::kPad);
    b.tag_ids.assign(count * b.max_len, 0);
    b.token_mask.assign(count * b.max_len, 0);
    for (std::size_t r = 0; r < count; ++r) {
      const std::size_t idx = order[start + r];
      const Sentence& s = corpus.sentences[idx];
      b.lengths.push_back(s.tokens.size());
      b.sentence_index.push_back(idx);
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        b.token_ids[r * b.max_len + t] = vocab.id(s.tokens[t]);
        b.tag_ids[r * b.max_len + t] = labels.require_index(s.tags[t]);
        b.token_mask[r * b.max_len + t] = 1;
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace ntrr::data
