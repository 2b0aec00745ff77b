#include <array>
#include <string_view>

#include "ntrr/data_io.hpp"

namespace ntrr::data {
namespace {

constexpr std::array<std::string_view, 6> kSurnames = {"王", "李", "张", "刘", "陈", "赵"};
constexpr std::array<std::string_view, 8> kGiven = {"伟", "芳", "娜", "敏", "静", "磊", "强", "洋"};
constexpr std::array<std::string_view, 7> kPlaces = {"北京", "上海", "广州", "深圳", "杭州", "哈尔滨", "南京"};
constexpr std::array<std::string_view, 3> kPlaceShort = {"沪", "粤", "津"};
constexpr std::array<std::string_view, 6> kOrgs = {"微软公司", "华为", "清华大学", "人民银行", "师范大学", "新华社"};

// '{P}' person, '{L}' location (two or more characters), '{S}' one-character
// location, '{O}' organisation.
constexpr std::array<std::string_view, 10> kTemplates = {
    "{P}在{L}工作。",       "{P}访问了{O}。",         "今天{P}和{P}去{L}。", "{O}位于{L}。",
    "{P}是{O}的员工。",     "我们在{L}见到{P}。",     "{O}的总部在{S}。",    "{P}昨天从{S}回来。",
    "{L}有很多人。",        "{P}说{O}很好。",
};

void append_entity(Sentence& s, std::string_view text, std::string_view type) {
  const auto chars = utf8_characters(text);
  for (std::size_t i = 0; i < chars.size(); ++i) {
    std::string prefix;
    if (chars.size() == 1) {
      prefix = "S-";
    } else if (i == 0) {
      prefix = "B-";
    } else if (i + 1 == chars.size()) {
      prefix = "E-";
    } else {
      prefix = "M-";
    }
    s.tokens.push_back(chars[i]);
    s.tags.push_back(prefix + std::string(type));
  }
}

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& items, Rng& rng) {
  return items[rng.below(N)];
}

}  // namespace

Corpus synthetic_corpus(std::size_t sentences, std::uint64_t seed) {
  Corpus corpus;
  Rng rng(seed, Rng::stream_id(StreamPurpose::synthetic));
  for (std::size_t k = 0; k < sentences; ++k) {
    const std::string_view tmpl = kTemplates[rng.below(kTemplates.size())];
    Sentence s;
    std::size_t i = 0;
    while (i < tmpl.size()) {
      if (tmpl[i] == '{') {
        const char slot = tmpl[i + 1];
        i += 3;
        if (slot == 'P') {
          std::string name(pick(kSurnames, rng));
          name += pick(kGiven, rng);
          if (rng.below(2) == 0) name += pick(kGiven, rng);
          append_entity(s, name, "PER");
        } else if (slot == 'L') {
          append_entity(s, pick(kPlaces, rng), "LOC");
        } else if (slot == 'S') {
          append_entity(s, pick(kPlaceShort, rng), "LOC");
        } else {
          append_entity(s, pick(kOrgs, rng), "ORG");
        }
        continue;
      }
      const std::size_t next = tmpl.find('{', i);
      for (std::string& ch : utf8_characters(tmpl.substr(i, next == std::string_view::npos ? next : next - i))) {
        s.tokens.push_back(std::move(ch));
        s.tags.emplace_back("O");
      }
      i = next == std::string_view::npos ? tmpl.size() : next;
    }
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace ntrr::data
