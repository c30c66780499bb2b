#include "advcap/model_config.hpp"

#include "advcap/errors.hpp"

#include <string>

namespace advcap {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("invalid model config: " + msg);
}

}  // namespace

void ModelConfig::validate() const {
  require(image_size > 0 && patch_size > 0 && channels > 0, "sizes must be positive");
  require(image_size % patch_size == 0, "image_size must be a multiple of patch_size");
  require(embed_dim > 0 && attention_heads > 0, "embed_dim and attention_heads must be positive");
  require(embed_dim % attention_heads == 0, "embed_dim must be a multiple of attention_heads");
  require(encoder_layers >= 0 && decoder_layers >= 0, "layer counts must be non-negative");
  require(ffn_dim > 0, "ffn_dim must be positive");
  require(vocab_size >= 4, "vocab_size must hold BOS, EOS, PAD and UNK");
  require(max_caption_len >= 2, "max_caption_len must fit BOS and EOS");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
}

ModelConfig ModelConfig::full_scale(int vocab_size) {
  ModelConfig c;
  c.image_size = 224;
  c.patch_size = 16;
  c.channels = 3;
  c.embed_dim = 768;
  c.encoder_layers = 12;
  c.decoder_layers = 12;
  c.attention_heads = 12;
  c.ffn_dim = 3072;
  c.vocab_size = vocab_size;
  c.max_caption_len = 64;
  c.dropout = 0.1;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"image_size", c.image_size},         {"patch_size", c.patch_size},
                     {"channels", c.channels},             {"embed_dim", c.embed_dim},
                     {"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers},
                     {"attention_heads", c.attention_heads}, {"ffn_dim", c.ffn_dim},
                     {"vocab_size", c.vocab_size},         {"max_caption_len", c.max_caption_len},
                     {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.patch_size = j.value("patch_size", d.patch_size);
  c.channels = j.value("channels", d.channels);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.encoder_layers = j.value("encoder_layers", d.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", d.decoder_layers);
  c.attention_heads = j.value("attention_heads", d.attention_heads);
  c.ffn_dim = j.value("ffn_dim", d.ffn_dim);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.max_caption_len = j.value("max_caption_len", d.max_caption_len);
  c.dropout = j.value("dropout", d.dropout);
}

void to_json(nlohmann::json& j, const SpecialTokens& s) {
  j = nlohmann::json{{"pad", s.pad}, {"bos", s.bos}, {"eos", s.eos}, {"unk", s.unk}};
}

void from_json(const nlohmann::json& j, SpecialTokens& s) {
  s.pad = j.at("pad").get<int>();
  s.bos = j.at("bos").get<int>();
  s.eos = j.at("eos").get<int>();
  s.unk = j.at("unk").get<int>();
}

}  // namespace advcap
