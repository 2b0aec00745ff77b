#include <algorithm>
#include <unordered_map>

#include "ntrr/data_io.hpp"
#include "ntrr/error.hpp"

namespace ntrr::data {

Vocab::Vocab() : tokens_{std::string(kPadToken), std::string(kUnkToken)} {
  ids_.emplace(tokens_[0], kPad);
  ids_.emplace(tokens_[1], kUnk);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw ContractError("vocabulary must start with the reserved <pad> and <unk> tokens");
  }
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.ids_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
      throw ContractError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

Vocab Vocab::build(const Corpus& corpus, std::size_t min_freq) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const Sentence& s : corpus.sentences)
    for (const std::string& t : s.tokens) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto& [token, count] : counts) {
    if (count >= std::max<std::size_t>(min_freq, 1) && token != kPadToken && token != kUnkToken) {
      entries.emplace_back(token, count);
    }
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken)};
  for (auto& e : entries) tokens.push_back(std::move(e.first));
  return from_tokens(std::move(tokens));
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw IndexError("vocabulary id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(id(t));
  return out;
}

}  // namespace ntrr::data
