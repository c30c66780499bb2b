#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace advcap {

using TokenSequence = std::vector<int>;

// One candidate with one or more references, all free of BOS/PAD/EOS.
struct EvalPair {
  TokenSequence candidate;
  std::vector<TokenSequence> references;
};

inline constexpr int kBleuOrder = 4;
// Zero precisions enter the geometric mean as this value.
inline constexpr double kBleuFloor = 1e-9;

struct NgramCounts {
  std::size_t matches = 0;
  std::size_t total = 0;
};

struct BleuReport {
  double score = 0.0;
  std::array<double, kBleuOrder> precisions{};  // raw, unsmoothed
  std::array<NgramCounts, kBleuOrder> counts{};
  double brevity_penalty = 0.0;
  std::size_t candidate_len = 0;
  std::size_t effective_ref_len = 0;
  bool degenerate = false;  // empty candidate corpus
};

// Candidate n-gram counts clipped per pair by the maximum count of that n-gram
// in any single reference; summed over the corpus.
NgramCounts clipped_ngram_precision(const std::vector<EvalPair>& pairs, int n);

// 1 when candidate_len >= ref_len, exp(1 - ref_len / candidate_len) otherwise,
// and 0 for an empty candidate.
double brevity_penalty(std::size_t candidate_len, std::size_t effective_ref_len);

// Length of the reference closest to `candidate_len`; ties go to the shorter.
std::size_t closest_reference_length(std::size_t candidate_len, const std::vector<TokenSequence>& references);

// Cumulative BLEU-4 with uniform weights. Throws UsageError on an empty list.
BleuReport corpus_bleu(const std::vector<EvalPair>& pairs);

}  // namespace advcap
