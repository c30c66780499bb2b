#include "advcap/training.hpp"

#include "advcap/errors.hpp"
#include "advcap/image_io.hpp"
#include "advcap/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace advcap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr std::uint64_t kShuffleSalt = 0x5851f42d4c957f2dULL;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::baseline: return "baseline";
    case Phase::adv_only: return "adv_only";
    case Phase::adv_mixed: return "adv_mixed";
    case Phase::freeze_encoder: return "freeze_encoder";
    case Phase::freeze_decoder: return "freeze_decoder";
  }
  return "unknown";
}

Phase parse_phase(std::string_view name) {
  for (Phase p : kAllPhases) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown phase '" + std::string(name) + "'");
}

std::string_view to_string(PhaseInit init) { return init == PhaseInit::scratch ? "scratch" : "baseline"; }

PhaseInit parse_phase_init(std::string_view name) {
  if (name == "scratch") return PhaseInit::scratch;
  if (name == "baseline") return PhaseInit::baseline;
  throw ConfigError("unknown phase init '" + std::string(name) + "'");
}

TrainConfig TrainConfig::for_phase(Phase phase) {
  TrainConfig c;
  c.phase = phase;
  c.trials = (phase == Phase::freeze_encoder || phase == Phase::freeze_decoder) ? 3 : 1;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  attack.validate();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"phase", to_string(c.phase)}, {"epochs", c.epochs},       {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate}, {"beta1", c.beta1},    {"beta2", c.beta2},
           {"adam_eps", c.adam_eps},   {"grad_clip", c.grad_clip}, {"seed", c.seed},
           {"attack", c.attack},       {"trials", c.trials},
           {"init", to_string(c.init)}};
}

void from_json(const json& j, TrainConfig& c) {
  const Phase phase = j.contains("phase") ? parse_phase(j.at("phase").get<std::string>()) : Phase::baseline;
  const TrainConfig d = TrainConfig::for_phase(phase);
  c.phase = phase;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.seed = j.value("seed", d.seed);
  c.attack = j.contains("attack") ? j.at("attack").get<AttackConfig>() : d.attack;
  c.trials = j.value("trials", d.trials);
  c.init = j.contains("init") ? parse_phase_init(j.at("init").get<std::string>()) : d.init;
}

void apply_phase_freezing(CaptionModel& model, Phase phase) {
  model.set_group_trainable(ParamGroup::encoder, phase != Phase::freeze_encoder);
  model.set_group_trainable(ParamGroup::decoder, phase != Phase::freeze_decoder);
}

// ---------------------------------------------------------------------------
// Adam

AdamOptimizer::AdamOptimizer(const ParameterSet& params, double learning_rate, double beta1, double beta2,
                             double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& t : params) {
    m_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    v_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  }
}

double AdamOptimizer::step(CaptionModel& model, GradientSet& grads, double clip) {
  auto& params = model.parameters();
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (model.trainable(params[i].group)) sq += grads[i].squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double scale = (clip > 0.0 && norm > clip) ? clip / norm : 1.0;
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!model.trainable(params[i].group)) continue;
    const Matrix g = grads[i] * scale;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[i].value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

struct Item {
  const Dataset* source;
  std::size_t index;
};

double mean_loss(const CaptionModel& model, const std::vector<Item>& items, int batch_size) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t start = 0; start < items.size(); start += batch_size) {
    const std::size_t end = std::min(items.size(), start + static_cast<std::size_t>(batch_size));
    // Items in one batch may come from different datasets; gather per item.
    std::vector<Image> imgs;
    std::vector<std::string> ids;
    std::vector<TokenSequence> caps;
    for (std::size_t k = start; k < end; ++k) {
      const Example& ex = items[k].source->examples[items[k].index];
      imgs.push_back(ex.image);
      ids.push_back(ex.id);
      caps.push_back(ex.captions.front());
    }
    const auto images = ImageBatch::from_images(imgs, ids);
    const auto captions = CaptionBatch::from_sequences(caps, model.special_tokens().pad);
    total += forward_loss(model, images, captions) * static_cast<double>(end - start);
    n += end - start;
  }
  return total / static_cast<double>(n);
}

TrainedArtifact run_training(CaptionModel model, const std::vector<Item>& items, const TrainConfig& cfg,
                             const EpochLogger& log) {
  cfg.validate();
  if (items.empty()) throw UsageError("training set is empty");
  apply_phase_freezing(model, cfg.phase);
  TrainedArtifact out{model, cfg.phase, {}, cfg.seed, 0};
  out.history.push_back(mean_loss(model, items, cfg.batch_size));
  if (!std::isfinite(out.history.back())) throw TrainingError("non-finite initial loss", 0);

  AdamOptimizer opt(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::mt19937_64 shuffle_rng(cfg.seed ^ kShuffleSalt);
  std::mt19937_64 dropout_rng(cfg.seed + 1);
  std::vector<std::size_t> order(items.size());
  const int pad = model.special_tokens().pad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Image> imgs;
      std::vector<std::string> ids;
      std::vector<TokenSequence> caps;
      for (std::size_t k = start; k < end; ++k) {
        const Item& it = items[order[k]];
        const Example& ex = it.source->examples[it.index];
        imgs.push_back(ex.image);
        ids.push_back(ex.id);
        // Rotate through the references so every caption is used.
        caps.push_back(ex.captions[(static_cast<std::size_t>(epoch) + it.index) % ex.captions.size()]);
      }
      const auto images = ImageBatch::from_images(imgs, ids);
      const auto captions = CaptionBatch::from_sequences(caps, pad);
      BackwardOptions opts;
      opts.training = true;
      opts.rng = &dropout_rng;
      auto result = loss_and_gradients(model, images, captions, opts);
      if (!std::isfinite(result.loss)) throw TrainingError("non-finite training loss", epoch);
      opt.step(model, result.parameters, cfg.grad_clip);
      epoch_loss += result.loss * static_cast<double>(end - start);
      seen += end - start;
    }
    out.examples_seen += static_cast<long>(seen);
    const double mean = epoch_loss / static_cast<double>(seen);
    out.history.push_back(mean);
    if (log) log(epoch, mean);
  }
  out.model = std::move(model);
  return out;
}

std::vector<Item> items_of(const Dataset& data) {
  std::vector<Item> items;
  for (std::size_t i = 0; i < data.size(); ++i) items.push_back({&data, i});
  return items;
}

}  // namespace

TrainedArtifact train_baseline(const ModelConfig& config, const SpecialTokens& special, const Dataset& train,
                               const TrainConfig& cfg, const EpochLogger& log) {
  if (cfg.phase != Phase::baseline) throw ConfigError("train_baseline needs phase 'baseline'");
  return run_training(CaptionModel(config, special, cfg.seed), items_of(train), cfg, log);
}

TrainedArtifact train_phase(const CaptionModel& init, const Dataset& clean, const Dataset* adv,
                            const TrainConfig& cfg, const EpochLogger& log) {
  if (cfg.phase == Phase::baseline) throw ConfigError("train_phase handles the adversarial phases only");
  if (adv == nullptr) throw ConfigError("phase '" + std::string(to_string(cfg.phase)) + "' needs an adversarial split");
  std::vector<Item> items;
  if (cfg.phase != Phase::adv_only) items = items_of(clean);
  for (const auto& it : items_of(*adv)) items.push_back(it);
  if (cfg.init == PhaseInit::scratch) {
    return run_training(CaptionModel(init.config(), init.special_tokens(), cfg.seed), items, cfg, log);
  }
  return run_training(init, items, cfg, log);
}

// ---------------------------------------------------------------------------
// Adversarial datasets

Dataset build_adversarial_dataset(const CaptionModel& model, const Dataset& data, const AttackConfig& attack,
                                  int batch_size) {
  attack.validate();
  Dataset out;
  out.name = data.name + "+fgsm";
  out.examples.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto images = gather_images(data, idx);
    const auto captions = gather_captions(data, idx, {}, model.special_tokens().pad);
    const auto adv = fgsm(model, images, captions, attack);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Example ex;
      ex.id = data.examples[idx[k]].id;
      ex.image = adv.perturbed.to_image(static_cast<int>(k));
      ex.captions = data.examples[idx[k]].captions;
      out.examples.push_back(std::move(ex));
    }
  }
  return out;
}

void write_adversarial_dataset(const Dataset& adv, const fs::path& dir) {
  std::string manifest;
  for (const auto& ex : adv.examples) {
    const fs::path tensor_rel = fs::path("images") / (ex.id + ".advimg");
    const fs::path preview_rel = fs::path("images") / (ex.id + ".png");
    write_tensor_image(dir / tensor_rel, ex.image);
    write_png(dir / preview_rel, ex.image);
    json rec{{"source_id", ex.id},
             {"adversarial_path", tensor_rel.generic_string()},
             {"preview_path", preview_rel.generic_string()},
             {"caption_refs", ex.captions},
             {"dataset", adv.name}};
    manifest += rec.dump() + "\n";
  }
  write_file_atomic(dir / "manifest.jsonl", manifest);
}

Dataset read_adversarial_dataset(const fs::path& dir) {
  std::istringstream in(read_file(dir / "manifest.jsonl"));
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("adversarial manifest: ") + e.what(), line_no);
    }
    for (const char* key : {"source_id", "adversarial_path", "caption_refs"}) {
      if (!rec.contains(key)) throw ParseError(std::string("adversarial manifest lacks '") + key + "'", line_no);
    }
    Example ex;
    ex.id = rec["source_id"].get<std::string>();
    ex.image = read_tensor_image(dir / rec["adversarial_path"].get<std::string>());
    ex.captions = rec["caption_refs"].get<std::vector<TokenSequence>>();
    out.name = rec.value("dataset", std::string("adversarial"));
    out.examples.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trials

TrialStatistic summarize(std::vector<double> values) {
  TrialStatistic s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / static_cast<double>(s.values.size());
  if (s.values.size() > 1) {
    double sq = 0.0;
    for (double v : s.values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(s.values.size() - 1));
  }
  return s;
}

TrialsResult run_trials(const CaptionModel& init, const Dataset& clean, const Dataset* adv, const TrainConfig& cfg,
                        const TrialEvaluator& evaluate, TrialSeeds seeds, const TrialLoggers& loggers) {
  if (cfg.trials < 1) throw ConfigError("trials must be at least 1");
  TrialsResult out;
  std::map<std::string, std::vector<double>> values;
  for (int t = 0; t < cfg.trials; ++t) {
    TrainConfig trial_cfg = cfg;
    trial_cfg.seed = seeds == TrialSeeds::increment ? cfg.seed + static_cast<std::uint64_t>(t) : cfg.seed;
    try {
      const TrainedArtifact art = train_phase(init, clean, adv, trial_cfg, loggers ? loggers(t) : EpochLogger{});
      out.seeds.push_back(trial_cfg.seed);
      out.checksums.push_back(art.checksum());
      if (evaluate) {
        for (const auto& [name, v] : evaluate(t, art)) values[name].push_back(v);
      }
    } catch (const Error& e) {
      throw TrialError(e.what(), t);
    }
  }
  for (auto& [name, v] : values) out.metrics[name] = summarize(std::move(v));
  return out;
}

}  // namespace advcap
