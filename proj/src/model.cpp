#include "advcap/model.hpp"

#include "advcap/errors.hpp"
#include "nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace advcap {

namespace {

constexpr double kInitStd = 0.02;

Matrix truncated_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double z = dist(rng);
    while (std::abs(z) > 2.0) z = dist(rng);
    m.data()[i] = z * kInitStd;
  }
  return m;
}

// Registers tensors in a fixed order. With a null rng every tensor is created
// zero-filled so that an externally supplied set can be checked against it.
class LayoutBuilder {
 public:
  LayoutBuilder(ParameterSet& params, std::mt19937_64* rng) : params_(params), rng_(rng) {}

  std::size_t normal(const std::string& name, ParamGroup g, Eigen::Index r, Eigen::Index c) {
    return params_.add(name, g, rng_ ? truncated_normal(r, c, *rng_) : Matrix::Zero(r, c));
  }
  std::size_t constant(const std::string& name, ParamGroup g, Eigen::Index r, Eigen::Index c, double v) {
    return params_.add(name, g, Matrix::Constant(r, c, v));
  }
  CaptionModel::LinearRef linear(const std::string& name, ParamGroup g, int in, int out) {
    return {normal(name + ".weight", g, in, out), constant(name + ".bias", g, 1, out, 0.0)};
  }
  CaptionModel::NormRef norm(const std::string& name, ParamGroup g, int d) {
    return {constant(name + ".gamma", g, 1, d, 1.0), constant(name + ".beta", g, 1, d, 0.0)};
  }
  CaptionModel::BlockRef block(const std::string& name, ParamGroup g, const ModelConfig& c) {
    CaptionModel::BlockRef b;
    b.ln1 = norm(name + ".ln1", g, c.embed_dim);
    b.qkv = linear(name + ".attn.qkv", g, c.embed_dim, 3 * c.embed_dim);
    b.proj = linear(name + ".attn.proj", g, c.embed_dim, c.embed_dim);
    b.ln2 = norm(name + ".ln2", g, c.embed_dim);
    b.fc = linear(name + ".mlp.fc", g, c.embed_dim, c.ffn_dim);
    b.out = linear(name + ".mlp.out", g, c.ffn_dim, c.embed_dim);
    return b;
  }

 private:
  ParameterSet& params_;
  std::mt19937_64* rng_;
};

// ---------------------------------------------------------------------------
// Transformer block

struct BlockCache {
  Matrix x_in;
  nn::LayerNormCache ln1;
  Matrix ln1_out;
  Matrix qkv;
  nn::AttentionCache attn;
  Matrix attn_out;
  Matrix drop1;
  Matrix x_mid;
  nn::LayerNormCache ln2;
  Matrix ln2_out;
  Matrix fc_pre;
  Matrix fc_act;
  Matrix drop2;
};

struct PassContext {
  const CaptionModel& model;
  bool training = false;
  std::mt19937_64* rng = nullptr;

  const Matrix& p(std::size_t i) const { return model.param(i); }
  double dropout() const { return training ? model.config().dropout : 0.0; }
};

struct GradSink {
  GradientSet* grads = nullptr;
  Matrix* at(std::size_t i) const { return grads ? &(*grads)[i] : nullptr; }
};

Matrix block_forward(const PassContext& ctx, const CaptionModel::BlockRef& ref, const Matrix& x, int batch,
                     int length, bool causal, BlockCache& cache) {
  const int heads = ctx.model.config().attention_heads;
  cache.x_in = x;
  cache.ln1_out = nn::layernorm_forward(x, ctx.p(ref.ln1.gamma), ctx.p(ref.ln1.beta), cache.ln1);
  cache.qkv = nn::linear_forward(cache.ln1_out, ctx.p(ref.qkv.weight), ctx.p(ref.qkv.bias));
  cache.attn_out = nn::attention_forward(cache.qkv, batch, length, heads, causal, cache.attn);
  Matrix branch = nn::linear_forward(cache.attn_out, ctx.p(ref.proj.weight), ctx.p(ref.proj.bias));
  const double drop = ctx.dropout();
  if (drop > 0.0) {
    cache.drop1 = nn::dropout_mask(branch.rows(), branch.cols(), drop, *ctx.rng);
    branch.array() *= cache.drop1.array();
  }
  cache.x_mid = x + branch;
  cache.ln2_out = nn::layernorm_forward(cache.x_mid, ctx.p(ref.ln2.gamma), ctx.p(ref.ln2.beta), cache.ln2);
  cache.fc_pre = nn::linear_forward(cache.ln2_out, ctx.p(ref.fc.weight), ctx.p(ref.fc.bias));
  cache.fc_act = nn::gelu_forward(cache.fc_pre);
  Matrix mlp = nn::linear_forward(cache.fc_act, ctx.p(ref.out.weight), ctx.p(ref.out.bias));
  if (drop > 0.0) {
    cache.drop2 = nn::dropout_mask(mlp.rows(), mlp.cols(), drop, *ctx.rng);
    mlp.array() *= cache.drop2.array();
  }
  return cache.x_mid + mlp;
}

Matrix block_backward(const PassContext& ctx, const CaptionModel::BlockRef& ref, const Matrix& dy, int batch,
                      int length, const BlockCache& cache, const GradSink& sink) {
  const int heads = ctx.model.config().attention_heads;
  Matrix dmlp = dy;
  if (cache.drop2.size() > 0) dmlp.array() *= cache.drop2.array();
  Matrix dact = nn::linear_backward(cache.fc_act, dmlp, ctx.p(ref.out.weight), sink.at(ref.out.weight),
                                    sink.at(ref.out.bias));
  Matrix dfc = nn::gelu_backward(cache.fc_pre, dact);
  Matrix dln2 = nn::linear_backward(cache.ln2_out, dfc, ctx.p(ref.fc.weight), sink.at(ref.fc.weight),
                                    sink.at(ref.fc.bias));
  Matrix dmid = dy + nn::layernorm_backward(dln2, cache.ln2, ctx.p(ref.ln2.gamma), sink.at(ref.ln2.gamma),
                                            sink.at(ref.ln2.beta));
  Matrix dbranch = dmid;
  if (cache.drop1.size() > 0) dbranch.array() *= cache.drop1.array();
  Matrix dattn = nn::linear_backward(cache.attn_out, dbranch, ctx.p(ref.proj.weight), sink.at(ref.proj.weight),
                                     sink.at(ref.proj.bias));
  Matrix dqkv = nn::attention_backward(cache.qkv, dattn, batch, length, heads, cache.attn);
  Matrix dln1 = nn::linear_backward(cache.ln1_out, dqkv, ctx.p(ref.qkv.weight), sink.at(ref.qkv.weight),
                                    sink.at(ref.qkv.bias));
  return dmid + nn::layernorm_backward(dln1, cache.ln1, ctx.p(ref.ln1.gamma), sink.at(ref.ln1.gamma),
                                       sink.at(ref.ln1.beta));
}

// ---------------------------------------------------------------------------
// Encoder

void check_images(const ModelConfig& c, const ImageBatch& images) {
  if (images.batch() <= 0) throw DimensionError("image batch is empty");
  if (images.height() != c.image_size || images.width() != c.image_size) {
    throw DimensionError("image size " + std::to_string(images.height()) + " does not match configured " +
                         std::to_string(c.image_size));
  }
  if (images.channels() != c.channels) {
    throw DimensionError("image has " + std::to_string(images.channels()) + " channels, model expects " +
                         std::to_string(c.channels));
  }
}

// (B * num_patches, patch_dim); each row is one patch flattened as (c, dy, dx).
Matrix extract_patches(const ModelConfig& c, const ImageBatch& images) {
  const int per_side = c.patches_per_side();
  const int n = c.num_patches();
  const int ps = c.patch_size;
  Matrix out(static_cast<Eigen::Index>(images.batch()) * n, c.patch_dim());
  for (int b = 0; b < images.batch(); ++b) {
    auto img = images.image(b);
    for (int py = 0; py < per_side; ++py) {
      for (int px = 0; px < per_side; ++px) {
        const Eigen::Index row = static_cast<Eigen::Index>(b) * n + py * per_side + px;
        int col = 0;
        for (int ch = 0; ch < c.channels; ++ch) {
          for (int dy = 0; dy < ps; ++dy) {
            const std::size_t base = (static_cast<std::size_t>(ch) * c.image_size + py * ps + dy) * c.image_size +
                                     static_cast<std::size_t>(px) * ps;
            for (int dx = 0; dx < ps; ++dx) out(row, col++) = img[base + dx];
          }
        }
      }
    }
  }
  return out;
}

std::vector<double> scatter_patches(const ModelConfig& c, const Matrix& dpatches, int batch) {
  const int per_side = c.patches_per_side();
  const int n = c.num_patches();
  const int ps = c.patch_size;
  const std::size_t stride = static_cast<std::size_t>(c.channels) * c.image_size * c.image_size;
  std::vector<double> out(stride * batch, 0.0);
  for (int b = 0; b < batch; ++b) {
    double* img = out.data() + stride * b;
    for (int py = 0; py < per_side; ++py) {
      for (int px = 0; px < per_side; ++px) {
        const Eigen::Index row = static_cast<Eigen::Index>(b) * n + py * per_side + px;
        int col = 0;
        for (int ch = 0; ch < c.channels; ++ch) {
          for (int dy = 0; dy < ps; ++dy) {
            const std::size_t base = (static_cast<std::size_t>(ch) * c.image_size + py * ps + dy) * c.image_size +
                                     static_cast<std::size_t>(px) * ps;
            for (int dx = 0; dx < ps; ++dx) img[base + dx] = dpatches(row, col++);
          }
        }
      }
    }
  }
  return out;
}

struct EncoderCache {
  int batch = 0;
  int length = 0;
  Matrix patches;
  std::vector<BlockCache> blocks;
  nn::LayerNormCache ln_final;
  Matrix cls;
};

Matrix encoder_embed(const PassContext& ctx, const ImageBatch& images, Matrix& patches) {
  const auto& c = ctx.model.config();
  const auto& ref = ctx.model.encoder();
  check_images(c, images);
  patches = extract_patches(c, images);
  const Matrix proj = nn::linear_forward(patches, ctx.p(ref.patch.weight), ctx.p(ref.patch.bias));
  const int n = c.num_patches();
  const int len = n + 1;
  const Matrix& pos = ctx.p(ref.pos);
  Matrix x(static_cast<Eigen::Index>(images.batch()) * len, c.embed_dim);
  for (int b = 0; b < images.batch(); ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * len;
    x.row(r0) = ctx.p(ref.cls).row(0) + pos.row(0);
    x.block(r0 + 1, 0, n, c.embed_dim) = proj.block(static_cast<Eigen::Index>(b) * n, 0, n, c.embed_dim) +
                                         pos.block(1, 0, n, c.embed_dim);
  }
  return x;
}

Matrix encoder_forward(const PassContext& ctx, const ImageBatch& images, EncoderCache& cache) {
  const auto& c = ctx.model.config();
  const auto& ref = ctx.model.encoder();
  cache.batch = images.batch();
  cache.length = c.num_patches() + 1;
  Matrix x = encoder_embed(ctx, images, cache.patches);
  cache.blocks.resize(ref.blocks.size());
  for (std::size_t l = 0; l < ref.blocks.size(); ++l) {
    x = block_forward(ctx, ref.blocks[l], x, cache.batch, cache.length, false, cache.blocks[l]);
  }
  // Only the CLS rows are consumed downstream.
  Matrix cls_rows(cache.batch, c.embed_dim);
  for (int b = 0; b < cache.batch; ++b) cls_rows.row(b) = x.row(static_cast<Eigen::Index>(b) * cache.length);
  cache.cls = nn::layernorm_forward(cls_rows, ctx.p(ref.ln_final.gamma), ctx.p(ref.ln_final.beta),
                                    cache.ln_final);
  return cache.cls;
}

// Returns the pixel gradient when requested, otherwise an empty vector.
std::vector<double> encoder_backward(const PassContext& ctx, const Matrix& dcls, const EncoderCache& cache,
                                     const GradSink& sink, bool want_pixels) {
  const auto& c = ctx.model.config();
  const auto& ref = ctx.model.encoder();
  const Matrix dcls_rows = nn::layernorm_backward(dcls, cache.ln_final, ctx.p(ref.ln_final.gamma),
                                                  sink.at(ref.ln_final.gamma), sink.at(ref.ln_final.beta));
  Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(cache.batch) * cache.length, c.embed_dim);
  for (int b = 0; b < cache.batch; ++b) dx.row(static_cast<Eigen::Index>(b) * cache.length) = dcls_rows.row(b);
  for (std::size_t l = ref.blocks.size(); l-- > 0;) {
    dx = block_backward(ctx, ref.blocks[l], dx, cache.batch, cache.length, cache.blocks[l], sink);
  }
  const int n = c.num_patches();
  Matrix dproj(static_cast<Eigen::Index>(cache.batch) * n, c.embed_dim);
  for (int b = 0; b < cache.batch; ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * cache.length;
    if (Matrix* g = sink.at(ref.cls)) *g += dx.row(r0);
    if (Matrix* g = sink.at(ref.pos)) *g += dx.block(r0, 0, cache.length, c.embed_dim);
    dproj.block(static_cast<Eigen::Index>(b) * n, 0, n, c.embed_dim) = dx.block(r0 + 1, 0, n, c.embed_dim);
  }
  const Matrix dpatches = nn::linear_backward(cache.patches, dproj, ctx.p(ref.patch.weight),
                                              sink.at(ref.patch.weight), sink.at(ref.patch.bias));
  if (!want_pixels) return {};
  return scatter_patches(c, dpatches, cache.batch);
}

// ---------------------------------------------------------------------------
// Decoder

struct DecoderCache {
  int batch = 0;
  int length = 0;  // caption length T; the decoder sequence is T + 1 long
  Matrix cls;
  std::vector<BlockCache> blocks;
  nn::LayerNormCache ln_final;
  Matrix hidden;  // (B*T, D) final-normed states at caption positions
};

void check_caption_length(const ModelConfig& c, int length) {
  if (length > c.max_caption_len) {
    throw LengthError("caption length " + std::to_string(length) + " exceeds max_caption_len " +
                      std::to_string(c.max_caption_len));
  }
  if (length <= 0) throw LengthError("caption batch is empty");
}

Matrix decoder_forward(const PassContext& ctx, const Matrix& cls, const CaptionBatch& captions,
                       DecoderCache& cache) {
  const auto& c = ctx.model.config();
  const auto& ref = ctx.model.decoder();
  check_caption_length(c, captions.length());
  if (cls.rows() != captions.batch() || cls.cols() != c.embed_dim) {
    throw DimensionError("CLS features do not match caption batch");
  }
  const int batch = captions.batch();
  const int len = captions.length() + 1;
  cache.batch = batch;
  cache.length = captions.length();
  cache.cls = cls;
  const Matrix prefix = nn::linear_forward(cls, ctx.p(ref.prefix.weight), ctx.p(ref.prefix.bias));
  const Matrix& tok = ctx.p(ref.token_embedding);
  const Matrix& pos = ctx.p(ref.pos);
  Matrix x(static_cast<Eigen::Index>(batch) * len, c.embed_dim);
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * len;
    x.row(r0) = prefix.row(b) + pos.row(0);
    for (int t = 0; t < captions.length(); ++t) {
      const int id = captions.token(b, t);
      if (id < 0 || id >= c.vocab_size) throw DimensionError("token id outside vocabulary");
      x.row(r0 + 1 + t) = tok.row(id) + pos.row(1 + t);
    }
  }
  cache.blocks.resize(ref.blocks.size());
  for (std::size_t l = 0; l < ref.blocks.size(); ++l) {
    x = block_forward(ctx, ref.blocks[l], x, batch, len, true, cache.blocks[l]);
  }
  Matrix selected(static_cast<Eigen::Index>(batch) * cache.length, c.embed_dim);
  for (int b = 0; b < batch; ++b) {
    selected.block(static_cast<Eigen::Index>(b) * cache.length, 0, cache.length, c.embed_dim) =
        x.block(static_cast<Eigen::Index>(b) * len + 1, 0, cache.length, c.embed_dim);
  }
  cache.hidden = nn::layernorm_forward(selected, ctx.p(ref.ln_final.gamma), ctx.p(ref.ln_final.beta),
                                       cache.ln_final);
  return nn::linear_forward(cache.hidden, ctx.p(ref.head.weight), ctx.p(ref.head.bias));
}

// Returns dL/dcls.
Matrix decoder_backward(const PassContext& ctx, const Matrix& dlogits, const CaptionBatch& captions,
                        const DecoderCache& cache, const GradSink& sink) {
  const auto& c = ctx.model.config();
  const auto& ref = ctx.model.decoder();
  const int batch = cache.batch;
  const int len = cache.length + 1;
  const Matrix dhidden = nn::linear_backward(cache.hidden, dlogits, ctx.p(ref.head.weight),
                                             sink.at(ref.head.weight), sink.at(ref.head.bias));
  const Matrix dselected = nn::layernorm_backward(dhidden, cache.ln_final, ctx.p(ref.ln_final.gamma),
                                                  sink.at(ref.ln_final.gamma), sink.at(ref.ln_final.beta));
  Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(batch) * len, c.embed_dim);
  for (int b = 0; b < batch; ++b) {
    dx.block(static_cast<Eigen::Index>(b) * len + 1, 0, cache.length, c.embed_dim) =
        dselected.block(static_cast<Eigen::Index>(b) * cache.length, 0, cache.length, c.embed_dim);
  }
  for (std::size_t l = ref.blocks.size(); l-- > 0;) {
    dx = block_backward(ctx, ref.blocks[l], dx, batch, len, cache.blocks[l], sink);
  }
  Matrix dprefix(batch, c.embed_dim);
  Matrix* dtok = sink.at(ref.token_embedding);
  Matrix* dpos = sink.at(ref.pos);
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * len;
    dprefix.row(b) = dx.row(r0);
    if (dpos != nullptr) dpos->topRows(len) += dx.block(r0, 0, len, c.embed_dim);
    if (dtok != nullptr) {
      for (int t = 0; t < cache.length; ++t) dtok->row(captions.token(b, t)) += dx.row(r0 + 1 + t);
    }
  }
  return nn::linear_backward(cache.cls, dprefix, ctx.p(ref.prefix.weight), sink.at(ref.prefix.weight),
                             sink.at(ref.prefix.bias));
}

// Cross-entropy over real targets; fills dlogits (already divided by the
// target count) when non-null.
double cross_entropy_impl(const Matrix& logits, const CaptionBatch& captions, Matrix* dlogits) {
  const int length = captions.length();
  std::size_t count = 0;
  for (int b = 0; b < captions.batch(); ++b) {
    for (int t = 0; t + 1 < length; ++t) count += captions.real(b, t + 1) ? 1 : 0;
  }
  if (count == 0) throw DegenerateBatchError("caption batch has no real target tokens");
  if (dlogits != nullptr) dlogits->setZero(logits.rows(), logits.cols());
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  for (int b = 0; b < captions.batch(); ++b) {
    for (int t = 0; t + 1 < length; ++t) {
      if (!captions.real(b, t + 1)) continue;
      const Eigen::Index row = static_cast<Eigen::Index>(b) * length + t;
      const int target = captions.token(b, t + 1);
      const double mx = logits.row(row).maxCoeff();
      const Eigen::ArrayXd ex = (logits.row(row).array() - mx).exp().transpose();
      const double sum = ex.sum();
      total += std::log(sum) + mx - logits(row, target);
      if (dlogits != nullptr) {
        dlogits->row(row) = (ex / sum * inv).transpose().matrix();
        (*dlogits)(row, target) -= inv;
      }
    }
  }
  return total * inv;
}

}  // namespace

// ---------------------------------------------------------------------------
// CaptionModel

CaptionModel::CaptionModel(const ModelConfig& config, const SpecialTokens& special, std::uint64_t seed)
    : config_(config), special_(special) {
  config_.validate();
  std::mt19937_64 rng(seed);
  build_layout(&rng);
}

CaptionModel::CaptionModel(const ModelConfig& config, const SpecialTokens& special, ParameterSet params)
    : config_(config), special_(special) {
  config_.validate();
  build_layout(nullptr);
  if (params.size() != params_.size()) {
    throw CompatibilityError("parameter count " + std::to_string(params.size()) + " does not match layout " +
                             std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& want = params_[i];
    const auto& got = params[i];
    if (want.name != got.name || want.group != got.group || want.value.rows() != got.value.rows() ||
        want.value.cols() != got.value.cols()) {
      throw CompatibilityError("parameter '" + got.name + "' does not match expected '" + want.name + "'");
    }
  }
  params_ = std::move(params);
}

void CaptionModel::build_layout(std::mt19937_64* rng) {
  const auto& c = config_;
  LayoutBuilder lb(params_, rng);
  const auto enc = ParamGroup::encoder;
  const auto dec = ParamGroup::decoder;

  encoder_.patch = lb.linear("encoder.patch", enc, c.patch_dim(), c.embed_dim);
  encoder_.cls = lb.normal("encoder.cls", enc, 1, c.embed_dim);
  encoder_.pos = lb.normal("encoder.pos", enc, c.num_patches() + 1, c.embed_dim);
  for (int l = 0; l < c.encoder_layers; ++l) {
    encoder_.blocks.push_back(lb.block("encoder.block" + std::to_string(l), enc, c));
  }
  encoder_.ln_final = lb.norm("encoder.ln_final", enc, c.embed_dim);

  decoder_.prefix = lb.linear("decoder.prefix", dec, c.embed_dim, c.embed_dim);
  decoder_.token_embedding = lb.normal("decoder.token_embedding", dec, c.vocab_size, c.embed_dim);
  decoder_.pos = lb.normal("decoder.pos", dec, c.max_caption_len + 1, c.embed_dim);
  for (int l = 0; l < c.decoder_layers; ++l) {
    decoder_.blocks.push_back(lb.block("decoder.block" + std::to_string(l), dec, c));
  }
  decoder_.ln_final = lb.norm("decoder.ln_final", dec, c.embed_dim);
  decoder_.head = lb.linear("decoder.head", dec, c.embed_dim, c.vocab_size);
}

void CaptionModel::set_group_trainable(ParamGroup group, bool trainable) {
  trainable_[static_cast<int>(group)] = trainable;
}

void CaptionModel::set_group_trainable(std::string_view group, bool trainable) {
  set_group_trainable(parse_group(group), trainable);
}

std::vector<ParameterGroup> CaptionModel::groups() const {
  std::vector<ParameterGroup> out(2);
  out[0].name = ParamGroup::encoder;
  out[1].name = ParamGroup::decoder;
  for (const auto& t : params_) out[static_cast<int>(t.group)].parameters.push_back(t.name);
  out[0].trainable = trainable_[0];
  out[1].trainable = trainable_[1];
  return out;
}

// ---------------------------------------------------------------------------
// Public passes

SequenceTensor embed_patches(const CaptionModel& model, const ImageBatch& images) {
  PassContext ctx{model};
  Matrix patches;
  SequenceTensor out;
  out.values = encoder_embed(ctx, images, patches);
  out.batch = images.batch();
  out.length = model.config().num_patches() + 1;
  out.width = model.config().embed_dim;
  return out;
}

Matrix encode_image(const CaptionModel& model, const ImageBatch& images) {
  PassContext ctx{model};
  EncoderCache cache;
  return encoder_forward(ctx, images, cache);
}

SequenceTensor decode_logits(const CaptionModel& model, const Matrix& cls_features, const CaptionBatch& captions) {
  PassContext ctx{model};
  DecoderCache cache;
  SequenceTensor out;
  out.values = decoder_forward(ctx, cls_features, captions, cache);
  out.batch = captions.batch();
  out.length = captions.length();
  out.width = model.config().vocab_size;
  return out;
}

double caption_cross_entropy(const SequenceTensor& logits, const CaptionBatch& captions) {
  if (logits.batch != captions.batch() || logits.length != captions.length()) {
    throw DimensionError("logits do not match caption batch");
  }
  return cross_entropy_impl(logits.values, captions, nullptr);
}

double forward_loss(const CaptionModel& model, const ImageBatch& images, const CaptionBatch& captions) {
  if (images.batch() != captions.batch()) throw DimensionError("image and caption batch sizes differ");
  PassContext ctx{model};
  EncoderCache enc;
  DecoderCache dec;
  const Matrix cls = encoder_forward(ctx, images, enc);
  const Matrix logits = decoder_forward(ctx, cls, captions, dec);
  return cross_entropy_impl(logits, captions, nullptr);
}

LossAndGradients loss_and_gradients(const CaptionModel& model, const ImageBatch& images,
                                    const CaptionBatch& captions, const BackwardOptions& options) {
  if (images.batch() != captions.batch()) throw DimensionError("image and caption batch sizes differ");
  if (options.training && model.config().dropout > 0.0 && options.rng == nullptr) {
    throw UsageError("training with dropout needs an rng");
  }
  PassContext ctx{model, options.training, options.rng};
  LossAndGradients out;
  GradSink sink;
  if (options.parameter_gradients) {
    out.parameters = GradientSet::zeros_like(model.parameters());
    sink.grads = &out.parameters;
  }
  EncoderCache enc;
  DecoderCache dec;
  const Matrix cls = encoder_forward(ctx, images, enc);
  const Matrix logits = decoder_forward(ctx, cls, captions, dec);
  Matrix dlogits;
  out.loss = cross_entropy_impl(logits, captions, &dlogits);
  const Matrix dcls = decoder_backward(ctx, dlogits, captions, dec, sink);
  out.pixels = encoder_backward(ctx, dcls, enc, sink, options.input_gradients);
  return out;
}

std::vector<GeneratedCaption> generate_captions(const CaptionModel& model, const ImageBatch& images, int max_len) {
  const auto& c = model.config();
  const auto& sp = model.special_tokens();
  max_len = std::clamp(max_len, 0, c.max_caption_len - 1);
  PassContext ctx{model};
  EncoderCache enc;
  const Matrix cls = encoder_forward(ctx, images, enc);
  const int batch = images.batch();
  std::vector<GeneratedCaption> out(static_cast<std::size_t>(batch));
  std::vector<std::vector<int>> seqs(static_cast<std::size_t>(batch), std::vector<int>{sp.bos});
  std::vector<bool> done(static_cast<std::size_t>(batch), false);
  int remaining = batch;
  for (int step = 0; step < max_len && remaining > 0; ++step) {
    const CaptionBatch prefix = CaptionBatch::from_sequences(seqs, sp.pad);
    DecoderCache dec;
    const Matrix logits = decoder_forward(ctx, cls, prefix, dec);
    for (int b = 0; b < batch; ++b) {
      if (done[b]) {
        seqs[b].push_back(sp.pad);
        continue;
      }
      Eigen::Index best = 0;
      logits.row(static_cast<Eigen::Index>(b) * prefix.length() + step).maxCoeff(&best);
      const int id = static_cast<int>(best);
      seqs[b].push_back(id);
      if (id == sp.eos) {
        done[b] = true;
        --remaining;
      } else {
        out[b].tokens.push_back(id);
      }
    }
  }
  for (int b = 0; b < batch; ++b) out[b].truncated = !done[b];
  return out;
}

}  // namespace advcap
