#pragma once

#include "advcap/bleu.hpp"
#include "advcap/model_config.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace advcap {

// Word-level vocabulary. Ids 0..3 are PAD, BOS, EOS, UNK; the remaining ids
// are ordered by descending corpus frequency, then lexicographically.
class Vocabulary {
 public:
  static constexpr const char* kPad = "<pad>";
  static constexpr const char* kBos = "<bos>";
  static constexpr const char* kEos = "<eos>";
  static constexpr const char* kUnk = "<unk>";

  Vocabulary();
  // Rebuilds from an id-ordered token list whose first four entries are the
  // special tokens. Throws ParseError otherwise.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens, int min_frequency = 1);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  const SpecialTokens& special() const { return special_; }
  int min_frequency() const { return min_frequency_; }
  int id(std::string_view token) const;  // UNK when absent
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  friend Vocabulary build_vocabulary(const std::vector<std::string>& texts, int min_frequency);
  void add(const std::string& token);

  std::map<std::string, int, std::less<>> token_to_id_;
  std::vector<std::string> id_to_token_;
  SpecialTokens special_;
  int min_frequency_ = 1;
};

// Lowercases and splits on whitespace; every punctuation character becomes a
// token of its own.
std::vector<std::string> split_words(std::string_view text);

Vocabulary build_vocabulary(const std::vector<std::string>& texts, int min_frequency = 1);

// BOS, word ids (UNK for unknown words), EOS.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);

// Joins words with single spaces, attaching punctuation to the preceding
// word. Special tokens are dropped.
std::string detokenize(const TokenSequence& ids, const Vocabulary& vocab);

// Removes BOS, EOS and PAD ids.
TokenSequence strip_special(const TokenSequence& ids, const SpecialTokens& special);

}  // namespace advcap
