#pragma once

#include "advcap/bleu.hpp"
#include "advcap/checkpoint.hpp"
#include "advcap/dataset.hpp"
#include "advcap/training.hpp"
#include "advcap/vocabulary.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace advcap {

inline constexpr std::array<Phase, 4> kAdversarialPhases = {Phase::adv_only, Phase::adv_mixed, Phase::freeze_encoder,
                                                            Phase::freeze_decoder};

// Row label used in rendered tables.
std::string_view phase_label(Phase phase);

struct CorpusSpec {
  std::string kind = "toy";  // toy | flickr8k | coco | manifest
  std::string root;          // flickr8k root or a directory written by write_corpus
  std::string annotations;   // coco annotation file
  std::string image_root;    // coco image directory
  int num_images = 64;       // toy only
  int captions_per_image = 1;
  double test_fraction = 0.2;
  int min_frequency = 1;

  bool operator==(const CorpusSpec&) const = default;
};

void to_json(nlohmann::json& j, const CorpusSpec& c);
void from_json(const nlohmann::json& j, CorpusSpec& c);

struct ExperimentConfig {
  CorpusSpec corpus;
  ModelConfig model;  // vocab_size is replaced by the built vocabulary's size
  TrainConfig baseline = TrainConfig::for_phase(Phase::baseline);
  std::array<TrainConfig, 4> phases = {TrainConfig::for_phase(Phase::adv_only), TrainConfig::for_phase(Phase::adv_mixed),
                                       TrainConfig::for_phase(Phase::freeze_encoder),
                                       TrainConfig::for_phase(Phase::freeze_decoder)};
  AttackConfig attack;  // shared by every phase without its own "attack" entry
  std::string output_dir = "runs/experiment";
  std::uint64_t seed = 0;
  bool evaluate_both = false;  // also score every phase under the other condition
  int eval_batch = 32;

  // Desk-scale preset for the procedural corpus.
  static ExperimentConfig toy_default();

  void validate() const;
  // Training config of `phase` with its derived seed.
  TrainConfig phase_config(Phase phase) const;
  // FNV-1a of the canonical JSON, excluding output_dir.
  std::string hash() const;

  bool operator==(const ExperimentConfig&) const = default;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

struct ExperimentData {
  CorpusSplits splits;
  Vocabulary vocab;
  ModelConfig model;  // vocab_size resolved
  Dataset train;
  Dataset test;
};

ExperimentData prepare_data(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation

// Greedy captions for every example, corpus BLEU against all references.
BleuReport evaluate_model(const CaptionModel& model, const Dataset& data, int batch_size = 32);

// Throws CompatibilityError when the checkpoint's stored vocabulary differs
// from `vocab`.
BleuReport evaluate_checkpoint(const LoadedCheckpoint& checkpoint, const Vocabulary& vocab, const Dataset& data,
                               int batch_size = 32);

nlohmann::json bleu_to_json(const BleuReport& report);

enum class Condition { clean, adversarial };
std::string_view to_string(Condition condition);

struct MetricsRecord {
  std::string phase;
  int trial = 0;
  SplitTag split = SplitTag::train;
  Condition condition = Condition::clean;
  BleuReport bleu;
  std::string checkpoint;  // path relative to the output directory
  std::string config_hash;
};

nlohmann::json to_json(const MetricsRecord& record);

// Line-delimited append-only log; appends are serialized.
class MetricsLog {
 public:
  explicit MetricsLog(std::filesystem::path path);
  void append(const MetricsRecord& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Experiment

struct PhaseRow {
  Phase phase = Phase::baseline;
  Condition condition = Condition::clean;
  TrialStatistic train;
  TrialStatistic test;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> checkpoints;
  // Scores under the other condition when evaluate_both is set.
  std::optional<TrialStatistic> other_train;
  std::optional<TrialStatistic> other_test;
};

nlohmann::json to_json(const PhaseRow& row);
PhaseRow phase_row_from_json(const nlohmann::json& j);

struct ExperimentReport {
  std::vector<PhaseRow> rows;  // in phase order; missing phases are absent
  bool complete = false;
  std::vector<std::pair<std::string, std::string>> failures;  // (phase, message)
  std::string config_hash;
  std::string corpus;
  std::uint64_t seed = 0;
  std::string phase_init;
  // Baseline scored on the adversarial splits.
  std::optional<double> baseline_attack_train;
  std::optional<double> baseline_attack_test;
  std::string started;  // timestamps are kept out of the payload
  std::string finished;

  const PhaseRow* row(Phase phase) const;
};

// Everything except timestamps; identical configs give identical payloads.
nlohmann::json report_payload(const ExperimentReport& report);
nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

struct RunOptions {
  bool force = false;
  bool verbose = false;
};

// Output layout under cfg.output_dir:
//   config.json, vocab.json, metrics.jsonl, report.json, report.txt
//   checkpoints/<phase>[.trial<t>].ckpt   logs/<phase>[.trial<t>].loss.jsonl
//   adversarial/{train,test}/             stages/<stage>.json (resume markers)
// Completed stages whose marker carries the same config hash are reused
// unless options.force is set.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Rendering

enum class TableFormat { plain, delimited, markup };
TableFormat parse_table_format(std::string_view name);

std::string render_table(const ExperimentReport& report, TableFormat format);

struct TableLine {
  std::string label;
  double train = 0.0;
  double test = 0.0;
  std::optional<double> train_std;
  std::optional<double> test_std;
};

// Reads back the delimited rendering.
std::vector<TableLine> parse_delimited_table(const std::string& text);

// ---------------------------------------------------------------------------
// Gallery

struct GalleryResult {
  std::vector<std::filesystem::path> panels;
  std::filesystem::path sidecar;
};

// Writes <dir>/<id>.png triptychs (original | perturbed | difference) for the
// first n examples and <dir>/captions.json with clean and perturbed greedy
// captions. n is clipped to the split size with a warning.
GalleryResult emit_gallery(const std::filesystem::path& dir, const CaptionModel& model, const Vocabulary& vocab,
                           const Dataset& clean, const Dataset& adversarial, int n_samples, int scale = 4);

}  // namespace advcap
