#include "advcap/bleu.hpp"

#include "advcap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace advcap {

namespace {

using NgramMap = std::map<std::vector<int>, std::size_t>;

NgramMap count_ngrams(const TokenSequence& seq, int n) {
  NgramMap counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[std::vector<int>(seq.begin() + i, seq.begin() + i + n)];
  }
  return counts;
}

}  // namespace

NgramCounts clipped_ngram_precision(const std::vector<EvalPair>& pairs, int n) {
  if (n < 1) throw UsageError("n-gram order must be at least 1");
  NgramCounts out;
  for (const auto& pair : pairs) {
    const NgramMap cand = count_ngrams(pair.candidate, n);
    if (cand.empty()) continue;
    NgramMap max_ref;
    for (const auto& ref : pair.references) {
      for (const auto& [gram, count] : count_ngrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    for (const auto& [gram, count] : cand) {
      out.total += count;
      const auto it = max_ref.find(gram);
      if (it != max_ref.end()) out.matches += std::min(count, it->second);
    }
  }
  return out;
}

double brevity_penalty(std::size_t candidate_len, std::size_t effective_ref_len) {
  if (candidate_len == 0) return 0.0;
  if (candidate_len >= effective_ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(effective_ref_len) / static_cast<double>(candidate_len));
}

std::size_t closest_reference_length(std::size_t candidate_len, const std::vector<TokenSequence>& references) {
  std::size_t best = 0;
  std::size_t best_gap = 0;
  bool first = true;
  for (const auto& ref : references) {
    const std::size_t len = ref.size();
    const std::size_t gap = len > candidate_len ? len - candidate_len : candidate_len - len;
    if (first || gap < best_gap || (gap == best_gap && len < best)) {
      best = len;
      best_gap = gap;
      first = false;
    }
  }
  return best;
}

BleuReport corpus_bleu(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw UsageError("corpus_bleu needs at least one pair");
  BleuReport report;
  for (const auto& pair : pairs) {
    if (pair.references.empty()) throw UsageError("every evaluation pair needs a reference");
    report.candidate_len += pair.candidate.size();
    report.effective_ref_len += closest_reference_length(pair.candidate.size(), pair.references);
  }
  double log_sum = 0.0;
  for (int n = 1; n <= kBleuOrder; ++n) {
    const NgramCounts counts = clipped_ngram_precision(pairs, n);
    report.counts[n - 1] = counts;
    const double p = counts.total == 0 ? 0.0 : static_cast<double>(counts.matches) / counts.total;
    report.precisions[n - 1] = p;
    log_sum += std::log(counts.matches == 0 ? kBleuFloor : p);
  }
  report.brevity_penalty = brevity_penalty(report.candidate_len, report.effective_ref_len);
  report.degenerate = report.candidate_len == 0;
  report.score = report.brevity_penalty * std::exp(log_sum / kBleuOrder);
  return report;
}

}  // namespace advcap
