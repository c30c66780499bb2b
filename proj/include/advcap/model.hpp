#pragma once

#include "advcap/model_config.hpp"
#include "advcap/parameters.hpp"
#include "advcap/tensor.hpp"

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace advcap {

struct ParameterGroup {
  ParamGroup name = ParamGroup::encoder;
  std::vector<std::string> parameters;
  bool trainable = true;
};

// Patch encoder whose CLS state conditions a causal decoder through one learned
// prefix embedding. Parameters are partitioned into an encoder and a decoder
// group; the CLS-to-prefix projection belongs to the decoder.
//
// Inference and attack generation only read the model, so a const model may be
// shared across threads. Training mutates it and needs exclusive access.
class CaptionModel {
 public:
  struct LinearRef {
    std::size_t weight = 0;  // (in, out)
    std::size_t bias = 0;    // (1, out)
  };
  struct NormRef {
    std::size_t gamma = 0;
    std::size_t beta = 0;
  };
  struct BlockRef {
    NormRef ln1;
    LinearRef qkv;
    LinearRef proj;
    NormRef ln2;
    LinearRef fc;
    LinearRef out;
  };
  struct EncoderRef {
    LinearRef patch;
    std::size_t cls = 0;  // (1, D)
    std::size_t pos = 0;  // (num_patches + 1, D)
    std::vector<BlockRef> blocks;
    NormRef ln_final;
  };
  struct DecoderRef {
    LinearRef prefix;
    std::size_t token_embedding = 0;  // (V, D)
    std::size_t pos = 0;              // (max_caption_len + 1, D)
    std::vector<BlockRef> blocks;
    NormRef ln_final;
    LinearRef head;
  };

  // Random initialization: truncated normal (std 0.02, cut at 2 std) for
  // weights and embeddings, zero biases, unit LayerNorm gains.
  CaptionModel(const ModelConfig& config, const SpecialTokens& special, std::uint64_t seed);
  // Adopts `params`; throws CompatibilityError if names, groups or shapes do
  // not match the layout implied by `config`.
  CaptionModel(const ModelConfig& config, const SpecialTokens& special, ParameterSet params);

  const ModelConfig& config() const { return config_; }
  const SpecialTokens& special_tokens() const { return special_; }
  const ParameterSet& parameters() const { return params_; }
  ParameterSet& parameters() { return params_; }
  const EncoderRef& encoder() const { return encoder_; }
  const DecoderRef& decoder() const { return decoder_; }

  bool trainable(ParamGroup group) const { return trainable_[static_cast<int>(group)]; }
  void set_group_trainable(ParamGroup group, bool trainable);
  // Throws ConfigError for an unknown group name.
  void set_group_trainable(std::string_view group, bool trainable);
  std::vector<ParameterGroup> groups() const;

  const Matrix& param(std::size_t i) const { return params_[i].value; }

 private:
  void build_layout(std::mt19937_64* rng);

  ModelConfig config_;
  SpecialTokens special_;
  ParameterSet params_;
  EncoderRef encoder_;
  DecoderRef decoder_;
  bool trainable_[2] = {true, true};
};

// (batch, num_patches + 1, embed_dim): CLS at position 0, positional
// embeddings added everywhere. Throws DimensionError on a shape mismatch.
SequenceTensor embed_patches(const CaptionModel& model, const ImageBatch& images);

// Final-layer hidden state at the CLS position, (batch, embed_dim).
Matrix encode_image(const CaptionModel& model, const ImageBatch& images);

// (batch, length, vocab). Logits at position t see the prefix and tokens
// 0..t, and predict token t + 1. Throws LengthError when the caption is longer
// than max_caption_len.
SequenceTensor decode_logits(const CaptionModel& model, const Matrix& cls_features,
                             const CaptionBatch& captions);

// Mean cross-entropy of logits[t] against token t + 1 over real targets.
// Throws DegenerateBatchError when no target is real.
double caption_cross_entropy(const SequenceTensor& logits, const CaptionBatch& captions);

// Evaluation-mode captioning loss (dropout off).
double forward_loss(const CaptionModel& model, const ImageBatch& images, const CaptionBatch& captions);

struct BackwardOptions {
  bool parameter_gradients = true;
  bool input_gradients = false;
  // Enables dropout; requires rng when config().dropout > 0.
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

struct LossAndGradients {
  double loss = 0.0;
  GradientSet parameters;      // empty unless requested
  std::vector<double> pixels;  // same layout as ImageBatch::pixels(); empty unless requested
};

LossAndGradients loss_and_gradients(const CaptionModel& model, const ImageBatch& images,
                                    const CaptionBatch& captions, const BackwardOptions& options);

struct GeneratedCaption {
  std::vector<int> tokens;  // without BOS / EOS
  bool truncated = false;   // hit max_len before EOS
};

// Greedy decoding from BOS. max_len is capped at max_caption_len - 1.
std::vector<GeneratedCaption> generate_captions(const CaptionModel& model, const ImageBatch& images,
                                                int max_len);

}  // namespace advcap
