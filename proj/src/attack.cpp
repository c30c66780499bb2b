#include "advcap/attack.hpp"

#include "advcap/errors.hpp"

#include <algorithm>

namespace advcap {

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack epsilon must be non-negative");
  if (!(clamp_min < clamp_max)) throw ConfigError("attack clamp_min must be below clamp_max");
}

void to_json(nlohmann::json& j, const AttackConfig& c) {
  j = nlohmann::json{{"epsilon", c.epsilon}, {"clamp_min", c.clamp_min}, {"clamp_max", c.clamp_max}};
}

void from_json(const nlohmann::json& j, AttackConfig& c) {
  const AttackConfig d;
  c.epsilon = j.value("epsilon", d.epsilon);
  c.clamp_min = j.value("clamp_min", d.clamp_min);
  c.clamp_max = j.value("clamp_max", d.clamp_max);
}

std::vector<double> input_gradient(const CaptionModel& model, const ImageBatch& images,
                                   const CaptionBatch& captions) {
  BackwardOptions opts;
  opts.parameter_gradients = false;
  opts.input_gradients = true;
  opts.training = false;
  auto result = loss_and_gradients(model, images, captions, opts);
  if (result.pixels.size() != images.pixels().size()) {
    throw Error("internal error: input gradient has the wrong size");
  }
  return std::move(result.pixels);
}

std::vector<double> fgsm_step(std::span<const double> pixels, std::span<const double> gradient,
                              const AttackConfig& cfg) {
  cfg.validate();
  if (pixels.size() != gradient.size()) throw DimensionError("gradient does not match pixels");
  std::vector<double> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double g = gradient[i];
    const double s = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
    out[i] = s == 0.0 ? pixels[i] : std::clamp(pixels[i] + cfg.epsilon * s, cfg.clamp_min, cfg.clamp_max);
  }
  return out;
}

AdversarialBatch fgsm(const CaptionModel& model, const ImageBatch& images, const CaptionBatch& captions,
                      const AttackConfig& cfg) {
  cfg.validate();
  const auto grad = input_gradient(model, images, captions);
  AdversarialBatch out;
  out.perturbed = images;
  out.perturbed.pixels() = fgsm_step(images.pixels(), grad, cfg);
  out.source_ids = images.ids();
  out.perturbation.resize(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    out.perturbation[i] = out.perturbed.pixels()[i] - images.pixels()[i];
  }
  return out;
}

ImageBatch difference_image(const ImageBatch& original, const AdversarialBatch& adversarial) {
  const ImageBatch& pert = adversarial.perturbed;
  if (original.ids() != adversarial.source_ids) throw PairingError("adversarial ids do not match originals");
  if (original.batch() != pert.batch() || original.channels() != pert.channels() ||
      original.height() != pert.height()) {
    throw PairingError("adversarial batch shape does not match originals");
  }
  ImageBatch out = original;
  for (int b = 0; b < original.batch(); ++b) {
    auto src = original.image(b);
    auto adv = pert.image(b);
    auto dst = out.image(b);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::abs(adv[i] - src[i]);
    const auto [lo, hi] = std::minmax_element(dst.begin(), dst.end());
    const double min = *lo;
    const double max = *hi;
    if (max - min > 0.0) {
      for (double& v : dst) v = (v - min) / (max - min);
    } else {
      std::fill(dst.begin(), dst.end(), max > 0.0 ? 1.0 : 0.0);
    }
  }
  return out;
}

Image compose_triptych(const Image& original, const Image& perturbed, const Image& difference, int scale) {
  if (original.channels != perturbed.channels || original.channels != difference.channels ||
      original.height != perturbed.height || original.height != difference.height ||
      original.width != perturbed.width || original.width != difference.width) {
    throw PairingError("triptych panels must share one shape");
  }
  scale = std::max(scale, 1);
  const int h = original.height * scale;
  const int w = original.width * scale;
  Image out(original.channels, h, 3 * w);
  const Image* panels[3] = {&original, &perturbed, &difference};
  for (int p = 0; p < 3; ++p) {
    for (int c = 0; c < out.channels; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) out.at(c, y, p * w + x) = panels[p]->at(c, y / scale, x / scale);
      }
    }
  }
  return out;
}

}  // namespace advcap
