#include "advcap/checkpoint.hpp"
#include "advcap/errors.hpp"
#include "advcap/experiment.hpp"
#include "advcap/io_util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

using namespace advcap;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  bool verbose = false;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? ExperimentConfig::toy_default() : load_experiment_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.output_dir = g.out;
  cfg.validate();
  return cfg;
}

const Dataset& pick(const ExperimentData& d, const std::string& split) {
  return parse_split(split) == SplitTag::train ? d.train : d.test;
}

void print_bleu(const std::string& what, const BleuReport& r) {
  std::cout << json{{"evaluation", what}, {"bleu", bleu_to_json(r)}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial robustness experiments for a patch-transformer image captioner"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "experiment config file (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--out", g.out, "output directory");
  app.add_flag("--force", g.force, "recompute completed stages");
  app.add_flag("-v,--verbose", g.verbose, "progress on stderr");

  // toy-data
  auto* toy = app.add_subcommand("toy-data", "write the procedural toy corpus (images + manifest)");
  int toy_images = 64;
  int toy_size = 32;
  int toy_captions = 1;
  double toy_test = 0.2;
  toy->add_option("--num-images", toy_images)->check(CLI::PositiveNumber);
  toy->add_option("--image-size", toy_size)->check(CLI::PositiveNumber);
  toy->add_option("--captions-per-image", toy_captions)->check(CLI::Range(1, kToyTemplates));
  toy->add_option("--test-fraction", toy_test)->check(CLI::Range(0.0, 1.0));

  // train
  auto* train = app.add_subcommand("train", "train one phase");
  std::string phase_name = "baseline";
  std::string init_ckpt;
  std::string adv_dir;
  train->add_option("--phase", phase_name, "baseline|adv_only|adv_mixed|freeze_encoder|freeze_decoder");
  train->add_option("--init", init_ckpt, "starting checkpoint (default <out>/checkpoints/baseline.ckpt)");
  train->add_option("--adversarial", adv_dir, "adversarial training split (default <out>/adversarial/train)");

  // attack-build
  auto* attack = app.add_subcommand("attack-build", "build adversarial train/test splits against a checkpoint");
  std::string attack_ckpt;
  std::optional<double> epsilon;
  attack->add_option("--checkpoint", attack_ckpt, "default <out>/checkpoints/baseline.ckpt");
  attack->add_option("--epsilon", epsilon, "overrides the configured epsilon")->check(CLI::NonNegativeNumber);

  // eval
  auto* eval = app.add_subcommand("eval", "greedy captions + corpus BLEU for a checkpoint");
  std::string eval_ckpt;
  std::string eval_split = "test";
  std::string eval_adv;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--split", eval_split, "train|test");
  eval->add_option("--adversarial", eval_adv, "score this adversarial split directory instead of clean data");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run all five phases and write the report");
  std::string exp_format = "plain";
  experiment->add_option("--format", exp_format, "plain|delimited|markup");

  // table
  auto* table = app.add_subcommand("table", "render a report");
  std::string report_path;
  std::string table_format = "plain";
  table->add_option("--report", report_path, "default <out>/report.json");
  table->add_option("--format", table_format, "plain|delimited|markup");

  // gallery
  auto* gallery = app.add_subcommand("gallery", "original | perturbed | difference panels with captions");
  std::string gallery_ckpt;
  std::string gallery_adv;
  std::string gallery_split = "test";
  int gallery_n = 3;
  int gallery_scale = 4;
  gallery->add_option("--checkpoint", gallery_ckpt, "default <out>/checkpoints/baseline.ckpt");
  gallery->add_option("--adversarial", gallery_adv, "default <out>/adversarial/<split>");
  gallery->add_option("--split", gallery_split, "train|test");
  gallery->add_option("-n,--samples", gallery_n)->check(CLI::NonNegativeNumber);
  gallery->add_option("--scale", gallery_scale)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve_config(g);
    const fs::path out = cfg.output_dir;

    if (*toy) {
      ToyCorpusOptions opts;
      opts.captions_per_image = toy_captions;
      opts.test_fraction = toy_test;
      const auto splits = make_toy_corpus(cfg.seed, toy_images, toy_size, opts);
      write_corpus(splits, out, "toy");
      std::cout << "wrote " << splits.train.entries.size() << " train and " << splits.test.entries.size()
                << " test images to " << out.string() << "\n";
      return 0;
    }

    if (*experiment) {
      const TableFormat fmt = parse_table_format(exp_format);
      RunOptions opts;
      opts.force = g.force;
      opts.verbose = g.verbose;
      const ExperimentReport report = run_experiment(cfg, opts);
      std::cout << render_table(report, fmt);
      return report.complete ? 0 : 1;
    }

    if (*table) {
      const fs::path p = report_path.empty() ? out / "report.json" : fs::path(report_path);
      std::cout << render_table(report_from_json(json::parse(read_file(p))), parse_table_format(table_format));
      return 0;
    }

    const ExperimentData data = prepare_data(cfg);
    const fs::path default_ckpt = out / "checkpoints" / "baseline.ckpt";

    if (*train) {
      const Phase phase = parse_phase(phase_name);
      const TrainConfig tc = cfg.phase_config(phase);
      auto logger = [&](const std::string& name) {
        const fs::path p = out / "logs" / (name + ".loss.jsonl");
        fs::create_directories(p.parent_path());
        auto stream = std::make_shared<std::ofstream>(p, std::ios::trunc);
        return EpochLogger([stream, phase, name](int epoch, double loss) {
          *stream << json{{"phase", to_string(phase)}, {"run", name}, {"epoch", epoch}, {"loss", loss}}.dump()
                  << "\n";
          if (epoch % 10 == 0) std::fprintf(stderr, "%s epoch %d loss %.4f\n", name.c_str(), epoch, loss);
        });
      };
      const json vocab_meta = data.vocab.tokens();
      if (phase == Phase::baseline) {
        const TrainedArtifact art = train_baseline(data.model, data.vocab.special(), data.train, tc, logger("baseline"));
        save_checkpoint(default_ckpt, art.model,
                        {{"vocabulary", vocab_meta}, {"phase", "baseline"}, {"seed", art.seed}, {"history", art.history}});
        std::cout << "saved " << default_ckpt.string() << " (final loss " << art.history.back() << ")\n";
        return 0;
      }
      const LoadedCheckpoint init = load_checkpoint(init_ckpt.empty() ? default_ckpt : fs::path(init_ckpt));
      const Dataset adv = read_adversarial_dataset(adv_dir.empty() ? out / "adversarial" / "train" : fs::path(adv_dir));
      for (int t = 0; t < tc.trials; ++t) {
        TrainConfig trial = tc;
        trial.seed = tc.seed + static_cast<std::uint64_t>(t);
        const std::string name = std::string(to_string(phase)) + ".trial" + std::to_string(t);
        const TrainedArtifact art = train_phase(init.model, data.train, &adv, trial, logger(name));
        const fs::path p = out / "checkpoints" / (name + ".ckpt");
        save_checkpoint(p, art.model,
                        {{"vocabulary", vocab_meta}, {"phase", to_string(phase)}, {"seed", art.seed}, {"trial", t},
                         {"history", art.history}});
        std::cout << "saved " << p.string() << " (final loss " << art.history.back() << ")\n";
      }
      return 0;
    }

    if (*attack) {
      const LoadedCheckpoint ckpt = load_checkpoint(attack_ckpt.empty() ? default_ckpt : fs::path(attack_ckpt));
      AttackConfig ac = cfg.attack;
      if (epsilon) ac.epsilon = *epsilon;
      for (const auto* split : {&data.train, &data.test}) {
        const std::string name = split == &data.train ? "train" : "test";
        const Dataset adv = build_adversarial_dataset(ckpt.model, *split, ac, cfg.eval_batch);
        write_adversarial_dataset(adv, out / "adversarial" / name);
        std::cout << "wrote " << adv.size() << " adversarial " << name << " examples\n";
      }
      return 0;
    }

    if (*eval) {
      const LoadedCheckpoint ckpt = load_checkpoint(eval_ckpt);
      if (eval_adv.empty()) {
        print_bleu(eval_split + "/clean", evaluate_checkpoint(ckpt, data.vocab, pick(data, eval_split), cfg.eval_batch));
      } else {
        const Dataset adv = read_adversarial_dataset(eval_adv);
        print_bleu(eval_split + "/adversarial", evaluate_checkpoint(ckpt, data.vocab, adv, cfg.eval_batch));
      }
      return 0;
    }

    if (*gallery) {
      const LoadedCheckpoint ckpt = load_checkpoint(gallery_ckpt.empty() ? default_ckpt : fs::path(gallery_ckpt));
      const Dataset adv =
          read_adversarial_dataset(gallery_adv.empty() ? out / "adversarial" / gallery_split : fs::path(gallery_adv));
      const GalleryResult r = emit_gallery(out / "gallery", ckpt.model, data.vocab, pick(data, gallery_split), adv,
                                           gallery_n, gallery_scale);
      std::cout << "wrote " << r.panels.size() << " panels and " << r.sidecar.string() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
