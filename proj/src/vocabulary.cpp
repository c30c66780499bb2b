#include "advcap/vocabulary.hpp"

#include "advcap/errors.hpp"

#include <algorithm>
#include <cctype>

namespace advcap {

Vocabulary::Vocabulary() {
  add(kPad);
  add(kBos);
  add(kEos);
  add(kUnk);
  special_ = SpecialTokens{0, 1, 2, 3};
}

void Vocabulary::add(const std::string& token) {
  if (token_to_id_.contains(token)) throw ParseError("duplicate vocabulary token '" + token + "'");
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens, int min_frequency) {
  if (tokens.size() < 4 || tokens[0] != kPad || tokens[1] != kBos || tokens[2] != kEos || tokens[3] != kUnk) {
    throw ParseError("vocabulary must start with <pad> <bos> <eos> <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 4; i < tokens.size(); ++i) v.add(tokens[i]);
  v.min_frequency_ = min_frequency;
  return v;
}

int Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? special_.unk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw UsageError("token id " + std::to_string(id) + " outside vocabulary");
  return id_to_token_[id];
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      flush();
    } else if (std::ispunct(u)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  flush();
  return out;
}

Vocabulary build_vocabulary(const std::vector<std::string>& texts, int min_frequency) {
  std::map<std::string, int> freq;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) ++freq[w];
  }
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [w, n] : freq) {
    if (n >= min_frequency && w != Vocabulary::kPad && w != Vocabulary::kBos && w != Vocabulary::kEos &&
        w != Vocabulary::kUnk) {
      kept.emplace_back(w, n);
    }
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [w, n] : kept) v.add(w);
  v.min_frequency_ = min_frequency;
  return v;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence ids{vocab.special().bos};
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  ids.push_back(vocab.special().eos);
  return ids;
}

std::string detokenize(const TokenSequence& ids, const Vocabulary& vocab) {
  std::string out;
  const auto& sp = vocab.special();
  for (int id : ids) {
    if (id == sp.bos || id == sp.eos || id == sp.pad) continue;
    const std::string& w = vocab.token(id);
    const bool punct = w.size() == 1 && std::ispunct(static_cast<unsigned char>(w[0]));
    if (!out.empty() && !punct) out.push_back(' ');
    out += w;
  }
  return out;
}

TokenSequence strip_special(const TokenSequence& ids, const SpecialTokens& special) {
  TokenSequence out;
  for (int id : ids) {
    if (id != special.bos && id != special.eos && id != special.pad) out.push_back(id);
  }
  return out;
}

}  // namespace advcap
