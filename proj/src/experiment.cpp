#include "advcap/experiment.hpp"

#include "advcap/errors.hpp"
#include "advcap/image_io.hpp"
#include "advcap/io_util.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

namespace advcap {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view phase_label(Phase phase) {
  switch (phase) {
    case Phase::baseline: return "Baseline BLEU Score";
    case Phase::adv_only: return "Adversarial Example";
    case Phase::adv_mixed: return "Adversarial Training";
    case Phase::freeze_encoder: return "Adversarial Training by freezing ViT";
    case Phase::freeze_decoder: return "Adversarial Training by freezing GPT";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Configuration

void to_json(json& j, const CorpusSpec& c) {
  j = json{{"kind", c.kind},
           {"root", c.root},
           {"annotations", c.annotations},
           {"image_root", c.image_root},
           {"num_images", c.num_images},
           {"captions_per_image", c.captions_per_image},
           {"test_fraction", c.test_fraction},
           {"min_frequency", c.min_frequency}};
}

void from_json(const json& j, CorpusSpec& c) {
  const CorpusSpec d;
  c.kind = j.value("kind", d.kind);
  c.root = j.value("root", d.root);
  c.annotations = j.value("annotations", d.annotations);
  c.image_root = j.value("image_root", d.image_root);
  c.num_images = j.value("num_images", d.num_images);
  c.captions_per_image = j.value("captions_per_image", d.captions_per_image);
  c.test_fraction = j.value("test_fraction", d.test_fraction);
  c.min_frequency = j.value("min_frequency", d.min_frequency);
}

ExperimentConfig ExperimentConfig::toy_default() {
  ExperimentConfig c;
  c.output_dir = "runs/toy";
  c.baseline.epochs = 300;
  c.baseline.learning_rate = 1e-3;
  for (auto& p : c.phases) {
    p.epochs = 150;
    p.learning_rate = 1e-3;
  }
  return c;
}

void ExperimentConfig::validate() const {
  model.validate();
  attack.validate();
  baseline.validate();
  if (baseline.phase != Phase::baseline) throw ConfigError("baseline config carries the wrong phase");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    phases[i].validate();
    if (phases[i].phase != kAdversarialPhases[i]) throw ConfigError("phase configs are out of order");
  }
  static const std::vector<std::string> kinds = {"toy", "flickr8k", "coco", "manifest"};
  if (std::find(kinds.begin(), kinds.end(), corpus.kind) == kinds.end()) {
    throw ConfigError("unknown corpus kind '" + corpus.kind + "'");
  }
  if (corpus.kind == "toy" && corpus.num_images < 2) throw ConfigError("toy corpus needs at least two images");
  if (corpus.min_frequency < 1) throw ConfigError("min_frequency must be at least 1");
  if (eval_batch < 1) throw ConfigError("eval_batch must be positive");
}

TrainConfig ExperimentConfig::phase_config(Phase phase) const {
  if (phase == Phase::baseline) {
    TrainConfig c = baseline;
    c.seed = seed;
    c.attack = attack;
    return c;
  }
  for (std::size_t i = 0; i < phases.size(); ++i) {
    if (kAdversarialPhases[i] == phase) {
      TrainConfig c = phases[i];
      c.seed = seed + 1000 * (i + 1);
      return c;
    }
  }
  throw ConfigError("unknown phase");
}

namespace {

json train_entry(const TrainConfig& t, const AttackConfig& shared) {
  json j = t;
  j.erase("seed");
  j.erase("phase");
  if (t.attack == shared) j.erase("attack");
  return j;
}

TrainConfig parse_train_entry(json j, Phase phase, const AttackConfig& shared) {
  j["phase"] = std::string(to_string(phase));
  TrainConfig t = j.get<TrainConfig>();
  if (!j.contains("attack")) t.attack = shared;
  t.seed = 0;
  return t;
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  json phases = json::object();
  for (std::size_t i = 0; i < c.phases.size(); ++i) {
    phases[std::string(to_string(kAdversarialPhases[i]))] = train_entry(c.phases[i], c.attack);
  }
  j = json{{"corpus", c.corpus},
           {"model", c.model},
           {"attack", c.attack},
           {"baseline", train_entry(c.baseline, c.attack)},
           {"phases", phases},
           {"output_dir", c.output_dir},
           {"seed", c.seed},
           {"evaluate_both", c.evaluate_both},
           {"eval_batch", c.eval_batch}};
}

void from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("experiment config must be an object");
  // Missing entries fall back to the toy preset.
  json merged = ExperimentConfig::toy_default();
  merged.merge_patch(j);
  try {
    c.corpus = merged.at("corpus").get<CorpusSpec>();
    c.model = merged.at("model").get<ModelConfig>();
    c.attack = merged.at("attack").get<AttackConfig>();
    c.baseline = parse_train_entry(merged.at("baseline"), Phase::baseline, c.attack);
    for (std::size_t i = 0; i < c.phases.size(); ++i) {
      const std::string name(to_string(kAdversarialPhases[i]));
      c.phases[i] = parse_train_entry(merged.at("phases").at(name), kAdversarialPhases[i], c.attack);
    }
    c.output_dir = merged.at("output_dir").get<std::string>();
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.evaluate_both = merged.at("evaluate_both").get<bool>();
    c.eval_batch = merged.at("eval_batch").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

std::string ExperimentConfig::hash() const {
  json j = *this;
  j.erase("output_dir");
  return to_hex(fnv1a64(j.dump()));
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

void save_experiment_config(const fs::path& path, const ExperimentConfig& cfg) {
  write_file_atomic(path, json(cfg).dump(2) + "\n");
}

ExperimentData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentData d;
  const CorpusSpec& cs = cfg.corpus;
  if (cs.kind == "toy") {
    ToyCorpusOptions opts;
    opts.captions_per_image = cs.captions_per_image;
    opts.test_fraction = cs.test_fraction;
    d.splits = make_toy_corpus(cfg.seed, cs.num_images, cfg.model.image_size, opts);
  } else if (cs.kind == "flickr8k") {
    d.splits = load_flickr8k(cs.root, cfg.seed);
  } else if (cs.kind == "coco") {
    d.splits = split_corpus(load_coco_captions(cs.annotations, cs.image_root), cfg.seed, cs.test_fraction);
  } else {
    d.splits = read_corpus(cs.root);
  }
  d.vocab = build_vocabulary(d.splits.train.all_captions(), cs.min_frequency);
  d.model = cfg.model;
  d.model.vocab_size = d.vocab.size();
  d.model.validate();
  d.train = make_dataset(d.splits.train, d.vocab, d.model.image_size, d.model.max_caption_len);
  d.test = make_dataset(d.splits.test, d.vocab, d.model.image_size, d.model.max_caption_len);
  return d;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::size_t> range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return idx;
}

}  // namespace

BleuReport evaluate_model(const CaptionModel& model, const Dataset& data, int batch_size) {
  if (batch_size < 1) throw UsageError("batch_size must be positive");
  std::vector<EvalPair> pairs;
  pairs.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const auto idx = range(start, std::min(data.size(), start + static_cast<std::size_t>(batch_size)));
    const auto generated = generate_captions(model, gather_images(data, idx), model.config().max_caption_len);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      EvalPair p;
      p.candidate = generated[k].tokens;
      for (const auto& ref : data.examples[idx[k]].captions) {
        p.references.push_back(strip_special(ref, model.special_tokens()));
      }
      pairs.push_back(std::move(p));
    }
  }
  return corpus_bleu(pairs);
}

BleuReport evaluate_checkpoint(const LoadedCheckpoint& checkpoint, const Vocabulary& vocab, const Dataset& data,
                               int batch_size) {
  if (checkpoint.model.config().vocab_size != vocab.size()) {
    throw CompatibilityError("checkpoint vocabulary size " + std::to_string(checkpoint.model.config().vocab_size) +
                             " differs from corpus vocabulary size " + std::to_string(vocab.size()));
  }
  if (checkpoint.metadata.contains("vocabulary") &&
      checkpoint.metadata["vocabulary"].get<std::vector<std::string>>() != vocab.tokens()) {
    throw CompatibilityError("checkpoint vocabulary differs from the corpus vocabulary");
  }
  return evaluate_model(checkpoint.model, data, batch_size);
}

json bleu_to_json(const BleuReport& r) {
  json counts = json::array();
  for (const auto& c : r.counts) counts.push_back({c.matches, c.total});
  return json{{"score", r.score},
              {"precisions", r.precisions},
              {"counts", counts},
              {"brevity_penalty", r.brevity_penalty},
              {"candidate_len", r.candidate_len},
              {"effective_ref_len", r.effective_ref_len},
              {"degenerate", r.degenerate}};
}

std::string_view to_string(Condition condition) {
  return condition == Condition::clean ? "clean" : "adversarial";
}

json to_json(const MetricsRecord& r) {
  return json{{"config_hash", r.config_hash},
              {"phase", r.phase},
              {"trial", r.trial},
              {"split", to_string(r.split)},
              {"condition", to_string(r.condition)},
              {"bleu", bleu_to_json(r.bleu)},
              {"checkpoint", r.checkpoint},
              {"timestamp", utc_now()}};
}

MetricsLog::MetricsLog(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
}

void MetricsLog::append(const MetricsRecord& record) {
  const std::string line = to_json(record).dump() + "\n";
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to " + path_.string());
  out << line;
}

// ---------------------------------------------------------------------------
// Report serialization

namespace {

json stat_to_json(const TrialStatistic& s) { return json{{"mean", s.mean}, {"std", s.stddev}, {"values", s.values}}; }

TrialStatistic stat_from_json(const json& j) {
  TrialStatistic s;
  s.values = j.at("values").get<std::vector<double>>();
  s.mean = j.at("mean").get<double>();
  s.stddev = j.at("std").get<double>();
  return s;
}

Condition parse_condition(const std::string& s) {
  if (s == "clean") return Condition::clean;
  if (s == "adversarial") return Condition::adversarial;
  throw ParseError("unknown condition '" + s + "'");
}

}  // namespace

json to_json(const PhaseRow& row) {
  json j{{"phase", to_string(row.phase)},
         {"label", phase_label(row.phase)},
         {"condition", to_string(row.condition)},
         {"train", stat_to_json(row.train)},
         {"test", stat_to_json(row.test)},
         {"seeds", row.seeds},
         {"checkpoints", row.checkpoints}};
  if (row.other_train) j["other_train"] = stat_to_json(*row.other_train);
  if (row.other_test) j["other_test"] = stat_to_json(*row.other_test);
  return j;
}

PhaseRow phase_row_from_json(const json& j) {
  PhaseRow row;
  row.phase = parse_phase(j.at("phase").get<std::string>());
  row.condition = parse_condition(j.at("condition").get<std::string>());
  row.train = stat_from_json(j.at("train"));
  row.test = stat_from_json(j.at("test"));
  row.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  row.checkpoints = j.at("checkpoints").get<std::vector<std::string>>();
  if (j.contains("other_train")) row.other_train = stat_from_json(j["other_train"]);
  if (j.contains("other_test")) row.other_test = stat_from_json(j["other_test"]);
  return row;
}

const PhaseRow* ExperimentReport::row(Phase phase) const {
  for (const auto& r : rows) {
    if (r.phase == phase) return &r;
  }
  return nullptr;
}

json report_payload(const ExperimentReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(to_json(r));
  json failures = json::array();
  for (const auto& [phase, message] : report.failures) failures.push_back({{"phase", phase}, {"message", message}});
  json j{{"config_hash", report.config_hash},
         {"corpus", report.corpus},
         {"seed", report.seed},
         {"phase_init", report.phase_init},
         {"complete", report.complete},
         {"failures", failures},
         {"rows", rows},
         {"evaluation", {{"baseline", "clean"}, {"adversarial_phases", "adversarial"}}}};
  if (report.baseline_attack_train) j["baseline_under_attack"]["train"] = *report.baseline_attack_train;
  if (report.baseline_attack_test) j["baseline_under_attack"]["test"] = *report.baseline_attack_test;
  return j;
}

json report_to_json(const ExperimentReport& report) {
  return json{{"payload", report_payload(report)},
              {"timestamps", {{"started", report.started}, {"finished", report.finished}}}};
}

ExperimentReport report_from_json(const json& j) {
  try {
    const json& p = j.at("payload");
    ExperimentReport r;
    r.config_hash = p.at("config_hash").get<std::string>();
    r.corpus = p.at("corpus").get<std::string>();
    r.seed = p.at("seed").get<std::uint64_t>();
    r.phase_init = p.value("phase_init", std::string());
    r.complete = p.at("complete").get<bool>();
    for (const auto& f : p.at("failures")) {
      r.failures.emplace_back(f.at("phase").get<std::string>(), f.at("message").get<std::string>());
    }
    for (const auto& row : p.at("rows")) r.rows.push_back(phase_row_from_json(row));
    if (p.contains("baseline_under_attack")) {
      const json& b = p["baseline_under_attack"];
      if (b.contains("train")) r.baseline_attack_train = b["train"].get<double>();
      if (b.contains("test")) r.baseline_attack_test = b["test"].get<double>();
    }
    if (j.contains("timestamps")) {
      r.started = j["timestamps"].value("started", std::string());
      r.finished = j["timestamps"].value("finished", std::string());
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Experiment driver

namespace {

class Run {
 public:
  Run(const ExperimentConfig& cfg, const RunOptions& opt)
      : cfg_(cfg), opt_(opt), out_(cfg.output_dir), hash_(cfg.hash()), metrics_(out_ / "metrics.jsonl") {}

  ExperimentReport execute();

 private:
  std::optional<json> reusable(const std::string& stage) const;
  void mark(const std::string& stage, json body) const;
  EpochLogger loss_logger(const std::string& name, Phase phase, int trial) const;
  double score(const CaptionModel& model, const std::string& phase, int trial, SplitTag split, Condition cond,
               const Dataset& data, const std::string& checkpoint);
  void save(const std::string& rel, const TrainedArtifact& art, int trial) const;
  void note(const std::string& msg) const {
    if (opt_.verbose) std::fprintf(stderr, "[%s] %s\n", cfg_.output_dir.c_str(), msg.c_str());
  }
  void finish(ExperimentReport& report) const;

  const ExperimentConfig& cfg_;
  RunOptions opt_;
  fs::path out_;
  std::string hash_;
  MetricsLog metrics_;
  std::optional<ExperimentData> data_;
  bool upstream_reused_ = true;
};

std::optional<json> Run::reusable(const std::string& stage) const {
  const fs::path p = out_ / "stages" / (stage + ".json");
  if (opt_.force || !upstream_reused_ || !fs::exists(p)) return std::nullopt;
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
  if (j.value("config_hash", std::string()) != hash_) return std::nullopt;
  for (const auto& ckpt : j.value("checkpoints", std::vector<std::string>{})) {
    if (!fs::exists(out_ / ckpt)) return std::nullopt;
  }
  return j;
}

void Run::mark(const std::string& stage, json body) const {
  body["config_hash"] = hash_;
  write_file_atomic(out_ / "stages" / (stage + ".json"), body.dump(2) + "\n");
}

EpochLogger Run::loss_logger(const std::string& name, Phase phase, int trial) const {
  const fs::path path = out_ / "logs" / (name + ".loss.jsonl");
  fs::create_directories(path.parent_path());
  auto stream = std::make_shared<std::ofstream>(path, std::ios::trunc);
  if (!*stream) throw IoError("cannot write " + path.string());
  return [stream, phase, trial](int epoch, double loss) {
    *stream << json{{"phase", to_string(phase)}, {"trial", trial}, {"epoch", epoch}, {"loss", loss}}.dump() << "\n";
    stream->flush();
  };
}

double Run::score(const CaptionModel& model, const std::string& phase, int trial, SplitTag split, Condition cond,
                  const Dataset& data, const std::string& checkpoint) {
  MetricsRecord rec;
  rec.phase = phase;
  rec.trial = trial;
  rec.split = split;
  rec.condition = cond;
  rec.bleu = evaluate_model(model, data, cfg_.eval_batch);
  rec.checkpoint = checkpoint;
  rec.config_hash = hash_;
  metrics_.append(rec);
  return rec.bleu.score;
}

void Run::save(const std::string& rel, const TrainedArtifact& art, int trial) const {
  json extra{{"vocabulary", data_->vocab.tokens()},
             {"phase", to_string(art.phase)},
             {"seed", art.seed},
             {"trial", trial},
             {"history", art.history},
             {"config_hash", hash_}};
  save_checkpoint(out_ / rel, art.model, extra);
}

void Run::finish(ExperimentReport& report) const {
  report.complete = report.failures.empty() && report.rows.size() == kAllPhases.size();
  report.finished = utc_now();
  write_file_atomic(out_ / "report.json", report_to_json(report).dump(2) + "\n");
  write_file_atomic(out_ / "report.txt", render_table(report, TableFormat::plain));
}

TrialStatistic single(double v) { return summarize({v}); }

ExperimentReport Run::execute() {
  ExperimentReport report;
  report.started = utc_now();
  report.config_hash = hash_;
  report.seed = cfg_.seed;
  report.phase_init = std::string(to_string(cfg_.phases[0].init));
  for (const auto& p : cfg_.phases) {
    if (p.init != cfg_.phases[0].init) report.phase_init = "mixed";
  }

  fs::create_directories(out_);
  save_experiment_config(out_ / "config.json", cfg_);
  data_ = prepare_data(cfg_);
  const ExperimentData& data = *data_;
  report.corpus = data.splits.train.name;
  write_file_atomic(out_ / "vocab.json",
                    json{{"tokens", data.vocab.tokens()}, {"min_frequency", data.vocab.min_frequency()}}.dump(2));

  // Baseline on clean splits.
  std::optional<CaptionModel> baseline;
  const std::string base_ckpt = "checkpoints/baseline.ckpt";
  try {
    if (auto m = reusable("baseline")) {
      note("baseline: reusing");
      report.rows.push_back(phase_row_from_json(m->at("row")));
      baseline = load_checkpoint(out_ / base_ckpt).model;
    } else {
      upstream_reused_ = false;
      note("baseline: training");
      const TrainConfig tc = cfg_.phase_config(Phase::baseline);
      TrainedArtifact art =
          train_baseline(data.model, data.vocab.special(), data.train, tc, loss_logger("baseline", Phase::baseline, 0));
      save(base_ckpt, art, 0);
      PhaseRow row;
      row.phase = Phase::baseline;
      row.condition = Condition::clean;
      row.train = single(score(art.model, "baseline", 0, SplitTag::train, Condition::clean, data.train, base_ckpt));
      row.test = single(score(art.model, "baseline", 0, SplitTag::test, Condition::clean, data.test, base_ckpt));
      row.seeds = {tc.seed};
      row.checkpoints = {base_ckpt};
      mark("baseline", {{"row", to_json(row)}, {"checkpoints", row.checkpoints}});
      report.rows.push_back(row);
      baseline = std::move(art.model);
    }
  } catch (const Error& e) {
    report.failures.emplace_back("baseline", e.what());
    finish(report);
    return report;
  }

  // Static adversarial splits built once against the baseline.
  Dataset adv_train;
  Dataset adv_test;
  try {
    const fs::path adv_dir = out_ / "adversarial";
    if (reusable("adversarial") && fs::exists(adv_dir / "train" / "manifest.jsonl") &&
        fs::exists(adv_dir / "test" / "manifest.jsonl")) {
      note("adversarial splits: reusing");
      adv_train = read_adversarial_dataset(adv_dir / "train");
      adv_test = read_adversarial_dataset(adv_dir / "test");
    } else {
      upstream_reused_ = false;
      note("adversarial splits: building");
      adv_train = build_adversarial_dataset(*baseline, data.train, cfg_.attack, cfg_.eval_batch);
      adv_test = build_adversarial_dataset(*baseline, data.test, cfg_.attack, cfg_.eval_batch);
      fs::remove_all(adv_dir);
      write_adversarial_dataset(adv_train, adv_dir / "train");
      write_adversarial_dataset(adv_test, adv_dir / "test");
      mark("adversarial", {{"train", adv_train.size()}, {"test", adv_test.size()}, {"attack", cfg_.attack}});
    }

    if (auto m = reusable("baseline_attack")) {
      report.baseline_attack_train = m->at("train").get<double>();
      report.baseline_attack_test = m->at("test").get<double>();
    } else {
      report.baseline_attack_train =
          score(*baseline, "baseline", 0, SplitTag::train, Condition::adversarial, adv_train, base_ckpt);
      report.baseline_attack_test =
          score(*baseline, "baseline", 0, SplitTag::test, Condition::adversarial, adv_test, base_ckpt);
      mark("baseline_attack", {{"train", *report.baseline_attack_train}, {"test", *report.baseline_attack_test}});
    }
    if (cfg_.evaluate_both) {
      report.rows[0].other_train = single(*report.baseline_attack_train);
      report.rows[0].other_test = single(*report.baseline_attack_test);
    }
  } catch (const Error& e) {
    report.failures.emplace_back("adversarial", e.what());
    finish(report);
    return report;
  }

  for (Phase phase : kAdversarialPhases) {
    const std::string name(to_string(phase));
    try {
      if (auto m = reusable(name)) {
        note(name + ": reusing");
        report.rows.push_back(phase_row_from_json(m->at("row")));
        continue;
      }
      note(name + ": training");
      const TrainConfig tc = cfg_.phase_config(phase);
      std::vector<std::string> checkpoints;
      auto ckpt_name = [&](int t) {
        return tc.trials == 1 ? "checkpoints/" + name + ".ckpt"
                              : "checkpoints/" + name + ".trial" + std::to_string(t) + ".ckpt";
      };
      auto evaluate = [&](int t, const TrainedArtifact& art) {
        const std::string rel = ckpt_name(t);
        save(rel, art, t);
        checkpoints.push_back(rel);
        std::map<std::string, double> m;
        m["train"] = score(art.model, name, t, SplitTag::train, Condition::adversarial, adv_train, rel);
        m["test"] = score(art.model, name, t, SplitTag::test, Condition::adversarial, adv_test, rel);
        if (cfg_.evaluate_both) {
          m["other_train"] = score(art.model, name, t, SplitTag::train, Condition::clean, data.train, rel);
          m["other_test"] = score(art.model, name, t, SplitTag::test, Condition::clean, data.test, rel);
        }
        return m;
      };
      auto loggers = [&](int t) {
        return loss_logger(tc.trials == 1 ? name : name + ".trial" + std::to_string(t), phase, t);
      };
      TrialsResult tr = run_trials(*baseline, data.train, &adv_train, tc, evaluate, TrialSeeds::increment, loggers);
      PhaseRow row;
      row.phase = phase;
      row.condition = Condition::adversarial;
      row.train = tr.metrics.at("train");
      row.test = tr.metrics.at("test");
      if (cfg_.evaluate_both) {
        row.other_train = tr.metrics.at("other_train");
        row.other_test = tr.metrics.at("other_test");
      }
      row.seeds = tr.seeds;
      row.checkpoints = checkpoints;
      mark(name, {{"row", to_json(row)}, {"checkpoints", checkpoints}});
      report.rows.push_back(row);
    } catch (const Error& e) {
      report.failures.emplace_back(name, e.what());
    }
  }
  finish(report);
  return report;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  Run run(cfg, options);
  return run.execute();
}

// ---------------------------------------------------------------------------
// Rendering

TableFormat parse_table_format(std::string_view name) {
  if (name == "plain") return TableFormat::plain;
  if (name == "delimited" || name == "csv") return TableFormat::delimited;
  if (name == "markup" || name == "markdown") return TableFormat::markup;
  throw UsageError("unknown table format '" + std::string(name) + "'");
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string cell(const TrialStatistic& s) {
  if (s.values.size() > 1) return fixed4(s.mean) + " +/- " + fixed4(s.stddev);
  return fixed4(s.mean);
}

std::string missing_phases(const ExperimentReport& report) {
  std::string out;
  for (Phase p : kAllPhases) {
    if (report.row(p) == nullptr) out += (out.empty() ? "" : ", ") + std::string(to_string(p));
  }
  for (const auto& [phase, message] : report.failures) {
    out += (out.empty() ? "" : "; ") + phase + " failed: " + message;
  }
  return out;
}

}  // namespace

std::string render_table(const ExperimentReport& report, TableFormat format) {
  std::ostringstream out;
  const bool incomplete = !report.complete;
  switch (format) {
    case TableFormat::plain: {
      if (incomplete) out << "INCOMPLETE: " << missing_phases(report) << "\n";
      std::size_t width = 5;
      for (const auto& r : report.rows) width = std::max(width, phase_label(r.phase).size());
      auto line = [&](std::string_view a, const std::string& b, const std::string& c) {
        out << a << std::string(width - a.size() + 2, ' ') << b << std::string(b.size() < 20 ? 20 - b.size() : 1, ' ')
            << c << "\n";
      };
      out << "BLEU-4, corpus " << report.corpus << ", seed " << report.seed << ", config " << report.config_hash
          << "\n";
      line("Model", "Train", "Test");
      for (const auto& r : report.rows) line(phase_label(r.phase), cell(r.train), cell(r.test));
      out << "Baseline row on clean splits; other rows on adversarial splits.\n";
      if (report.baseline_attack_train && report.baseline_attack_test) {
        out << "Baseline under attack: train " << fixed4(*report.baseline_attack_train) << ", test "
            << fixed4(*report.baseline_attack_test) << "\n";
      }
      break;
    }
    case TableFormat::delimited: {
      if (incomplete) out << "# INCOMPLETE: " << missing_phases(report) << "\n";
      out << "label,train,test,train_std,test_std\n";
      for (const auto& r : report.rows) {
        const bool trials = r.train.values.size() > 1;
        out << phase_label(r.phase) << "," << exact(r.train.mean) << "," << exact(r.test.mean) << ","
            << (trials ? exact(r.train.stddev) : "") << "," << (trials ? exact(r.test.stddev) : "") << "\n";
      }
      break;
    }
    case TableFormat::markup: {
      if (incomplete) out << "> **INCOMPLETE**: " << missing_phases(report) << "\n\n";
      out << "| Model | Train | Test |\n|---|---|---|\n";
      for (const auto& r : report.rows) {
        out << "| " << phase_label(r.phase) << " | " << cell(r.train) << " | " << cell(r.test) << " |\n";
      }
      out << "\nBaseline row on clean splits; other rows on adversarial splits.\n";
      break;
    }
  }
  return out.str();
}

std::vector<TableLine> parse_delimited_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<TableLine> rows;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 5) throw ParseError("expected 5 fields", line_no);
    TableLine t;
    t.label = fields[0];
    try {
      t.train = std::stod(fields[1]);
      t.test = std::stod(fields[2]);
      if (!fields[3].empty()) t.train_std = std::stod(fields[3]);
      if (!fields[4].empty()) t.test_std = std::stod(fields[4]);
    } catch (const std::logic_error&) {
      throw ParseError("bad number", line_no);
    }
    rows.push_back(std::move(t));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Gallery

GalleryResult emit_gallery(const fs::path& dir, const CaptionModel& model, const Vocabulary& vocab,
                           const Dataset& clean, const Dataset& adversarial, int n_samples, int scale) {
  if (n_samples < 0) throw UsageError("n_samples must be non-negative");
  std::size_t n = static_cast<std::size_t>(n_samples);
  if (n > clean.size()) {
    log_warning("gallery: " + std::to_string(n_samples) + " samples requested, split has " +
                std::to_string(clean.size()) + "; clipped");
    n = clean.size();
  }
  std::map<std::string, std::size_t> adv_index;
  for (std::size_t i = 0; i < adversarial.size(); ++i) adv_index[adversarial.examples[i].id] = i;

  Dataset pert;
  const auto idx = range(0, n);
  for (std::size_t i : idx) {
    const auto it = adv_index.find(clean.examples[i].id);
    if (it == adv_index.end()) throw PairingError("no adversarial example for " + clean.examples[i].id);
    pert.examples.push_back(adversarial.examples[it->second]);
  }

  GalleryResult result;
  fs::create_directories(dir);
  json sidecar = json::array();
  if (n > 0) {
    const ImageBatch originals = gather_images(clean, idx);
    AdversarialBatch ab{gather_images(pert, idx), originals.ids(), {}};
    ab.perturbation.resize(originals.pixels().size());
    for (std::size_t i = 0; i < ab.perturbation.size(); ++i) {
      ab.perturbation[i] = ab.perturbed.pixels()[i] - originals.pixels()[i];
    }
    const ImageBatch diff = difference_image(originals, ab);
    const int max_len = model.config().max_caption_len;
    const auto clean_caps = generate_captions(model, originals, max_len);
    const auto adv_caps = generate_captions(model, ab.perturbed, max_len);
    for (std::size_t k = 0; k < n; ++k) {
      const int b = static_cast<int>(k);
      const std::string& id = clean.examples[k].id;
      const fs::path panel = dir / (id + ".png");
      write_png(panel, compose_triptych(originals.to_image(b), ab.perturbed.to_image(b), diff.to_image(b), scale));
      result.panels.push_back(panel);
      json refs = json::array();
      for (const auto& r : clean.examples[k].captions) refs.push_back(detokenize(r, vocab));
      sidecar.push_back({{"id", id},
                         {"panel", panel.filename().string()},
                         {"clean", detokenize(clean_caps[k].tokens, vocab)},
                         {"adversarial", detokenize(adv_caps[k].tokens, vocab)},
                         {"references", refs}});
    }
  }
  result.sidecar = dir / "captions.json";
  write_file_atomic(result.sidecar, sidecar.dump(2) + "\n");
  return result;
}

}  // namespace advcap
