#pragma once

#include "advcap/attack.hpp"
#include "advcap/dataset.hpp"
#include "advcap/model.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace advcap {

enum class Phase { baseline, adv_only, adv_mixed, freeze_encoder, freeze_decoder };

inline constexpr std::array<Phase, 5> kAllPhases = {Phase::baseline, Phase::adv_only, Phase::adv_mixed,
                                                    Phase::freeze_encoder, Phase::freeze_decoder};

std::string_view to_string(Phase phase);
// Throws ConfigError for an unknown name.
Phase parse_phase(std::string_view name);

// Starting point of the adversarial phases: a fresh model seeded by the phase
// seed, or the weights handed to train_phase.
enum class PhaseInit { scratch, baseline };

std::string_view to_string(PhaseInit init);
PhaseInit parse_phase_init(std::string_view name);

struct TrainConfig {
  Phase phase = Phase::baseline;
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global norm over trainable tensors; <= 0 disables
  std::uint64_t seed = 0;
  AttackConfig attack;
  int trials = 1;
  PhaseInit init = PhaseInit::scratch;

  // Defaults for `phase`: three trials for the two freeze phases.
  static TrainConfig for_phase(Phase phase);
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Marks the groups a phase keeps fixed as non-trainable.
void apply_phase_freezing(CaptionModel& model, Phase phase);

// Adaptive moment estimation without weight decay. Only tensors of trainable
// groups are touched.
class AdamOptimizer {
 public:
  AdamOptimizer(const ParameterSet& params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  // Clips the trainable gradients to `clip` global norm (when > 0), then
  // updates. Returns the pre-clip norm.
  double step(CaptionModel& model, GradientSet& grads, double clip);
  long steps() const { return steps_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

struct TrainedArtifact {
  CaptionModel model;
  Phase phase = Phase::baseline;
  // Entry 0 is the mean loss before any update; entry e the mean batch loss
  // of epoch e.
  std::vector<double> history;
  std::uint64_t seed = 0;
  long examples_seen = 0;

  std::uint64_t checksum() const { return model.parameters().checksum(); }
};

using EpochLogger = std::function<void(int epoch, double loss)>;

// Trains a freshly initialized model (seeded by cfg.seed) on clean pairs.
// Throws TrainingError carrying the epoch on a non-finite loss.
TrainedArtifact train_baseline(const ModelConfig& config, const SpecialTokens& special, const Dataset& train,
                               const TrainConfig& cfg, const EpochLogger& log = {});

// Starts from `init` (or from a fresh model with its layout when cfg.init is
// scratch). adv_only trains on `adv` alone; adv_mixed and the
// freeze phases on clean + adv. Throws ConfigError without `adv`.
TrainedArtifact train_phase(const CaptionModel& init, const Dataset& clean, const Dataset* adv,
                            const TrainConfig& cfg, const EpochLogger& log = {});

// One FGSM example per image, attacked through its first reference caption.
// Ids and captions are carried over.
Dataset build_adversarial_dataset(const CaptionModel& model, const Dataset& data, const AttackConfig& attack,
                                  int batch_size = 32);

// <dir>/images/<id>.advimg (lossless float64) and <id>.png preview, plus
// <dir>/manifest.jsonl records {source_id, adversarial_path, preview_path,
// caption_refs}.
void write_adversarial_dataset(const Dataset& adv, const std::filesystem::path& dir);
Dataset read_adversarial_dataset(const std::filesystem::path& dir);

struct TrialStatistic {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single trial
};

TrialStatistic summarize(std::vector<double> values);

struct TrialsResult {
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> checksums;
  std::map<std::string, TrialStatistic> metrics;
};

using TrialEvaluator = std::function<std::map<std::string, double>(int trial, const TrainedArtifact&)>;

enum class TrialSeeds { increment, fixed };
using TrialLoggers = std::function<EpochLogger(int trial)>;

// Runs train_phase cfg.trials times with seeds seed, seed+1, ... (or seed
// every time) and aggregates whatever the evaluator reports. Throws
// TrialError carrying the failing trial index.
TrialsResult run_trials(const CaptionModel& init, const Dataset& clean, const Dataset* adv, const TrainConfig& cfg,
                        const TrialEvaluator& evaluate, TrialSeeds seeds = TrialSeeds::increment,
                        const TrialLoggers& loggers = {});

}  // namespace advcap
