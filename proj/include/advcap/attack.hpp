#pragma once

#include "advcap/model.hpp"
#include "advcap/tensor.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace advcap {

struct AttackConfig {
  double epsilon = 0.1;
  double clamp_min = 0.0;
  double clamp_max = 1.0;

  // Throws ConfigError unless epsilon >= 0 and clamp_min < clamp_max.
  void validate() const;
  bool operator==(const AttackConfig&) const = default;
};

void to_json(nlohmann::json& j, const AttackConfig& c);
void from_json(const nlohmann::json& j, AttackConfig& c);

struct AdversarialBatch {
  ImageBatch perturbed;
  std::vector<std::string> source_ids;
  std::vector<double> perturbation;  // perturbed - original, ImageBatch layout
};

// Gradient of the evaluation-mode captioning loss with respect to every pixel.
// The model is only read.
std::vector<double> input_gradient(const CaptionModel& model, const ImageBatch& images,
                                   const CaptionBatch& captions);

// x' = clamp(x + epsilon * sign(g)) elementwise, with sign(0) = 0.
std::vector<double> fgsm_step(std::span<const double> pixels, std::span<const double> gradient,
                              const AttackConfig& cfg);

// One FGSM example per image against the given captions.
AdversarialBatch fgsm(const CaptionModel& model, const ImageBatch& images, const CaptionBatch& captions,
                      const AttackConfig& cfg);

// |x' - x| per value, min-max rescaled to [0, 1] per image. A difference with
// no spread maps to all zeros when it is zero and all ones otherwise.
// Throws PairingError when ids or shapes disagree.
ImageBatch difference_image(const ImageBatch& original, const AdversarialBatch& adversarial);

// Three panels side by side (original | perturbed | difference), each
// upscaled by `scale` with nearest-neighbour replication.
Image compose_triptych(const Image& original, const Image& perturbed, const Image& difference, int scale = 1);

}  // namespace advcap
