#pragma once

#include "advcap/model.hpp"

#include <random>
#include <vector>

namespace advcap::testing {

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.channels = 3;
  c.embed_dim = 8;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.attention_heads = 2;
  c.ffn_dim = 16;
  c.vocab_size = 10;
  c.max_caption_len = 8;
  c.dropout = 0.0;
  return c;
}

// Re-draws every parameter with a larger scale so that gradients are not
// dominated by near-zero initial weights.
inline void scramble(CaptionModel& model, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (auto& t : model.parameters()) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += dist(rng);
  }
}

inline ImageBatch random_images(const ModelConfig& c, int batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  ImageBatch images(batch, c.channels, c.image_size);
  for (double& v : images.pixels()) v = dist(rng);
  return images;
}

// BOS, 1..max_body random content tokens, EOS.
inline CaptionBatch random_captions(const ModelConfig& c, const SpecialTokens& sp, int batch, std::uint64_t seed,
                                    int max_body = -1) {
  std::mt19937_64 rng(seed);
  if (max_body < 0) max_body = c.max_caption_len - 2;
  std::uniform_int_distribution<int> len_dist(1, max_body);
  std::uniform_int_distribution<int> tok_dist(4, c.vocab_size - 1);
  std::vector<std::vector<int>> seqs;
  for (int b = 0; b < batch; ++b) {
    std::vector<int> s{sp.bos};
    const int n = len_dist(rng);
    for (int i = 0; i < n; ++i) s.push_back(tok_dist(rng));
    s.push_back(sp.eos);
    seqs.push_back(std::move(s));
  }
  return CaptionBatch::from_sequences(seqs, sp.pad);
}

}  // namespace advcap::testing
