#pragma once

#include <json.hpp>

namespace advcap {

struct SpecialTokens {
  int pad = 0;
  int bos = 1;
  int eos = 2;
  int unk = 3;

  bool operator==(const SpecialTokens&) const = default;
};

struct ModelConfig {
  int image_size = 32;
  int patch_size = 8;
  int channels = 3;
  int embed_dim = 32;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int attention_heads = 4;
  int ffn_dim = 64;
  int vocab_size = 32;
  int max_caption_len = 16;
  double dropout = 0.0;

  // Throws ConfigError on any violated invariant.
  void validate() const;

  int patches_per_side() const { return image_size / patch_size; }
  int num_patches() const { return patches_per_side() * patches_per_side(); }
  int patch_dim() const { return channels * patch_size * patch_size; }
  int head_dim() const { return embed_dim / attention_heads; }

  // 224px images, 16px patches, 768-wide, 12+12 layers.
  static ModelConfig full_scale(int vocab_size);

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const SpecialTokens& s);
void from_json(const nlohmann::json& j, SpecialTokens& s);

}  // namespace advcap
