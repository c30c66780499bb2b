#pragma once

#include "advcap/bleu.hpp"
#include "advcap/tensor.hpp"
#include "advcap/vocabulary.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace advcap {

enum class SplitTag { train, test };

std::string_view to_string(SplitTag tag);
SplitTag parse_split(std::string_view name);

struct CorpusEntry {
  std::string id;
  std::filesystem::path image_path;  // may be empty when `image` is set
  std::vector<std::string> captions;
  std::optional<Image> image;        // in-memory pixels (toy corpus)
};

struct CaptionCorpus {
  std::string name;
  SplitTag split = SplitTag::train;
  std::vector<CorpusEntry> entries;

  std::size_t caption_count() const;
  std::vector<std::string> all_captions() const;
};

struct CorpusSplits {
  CaptionCorpus train;
  CaptionCorpus test;
};

// Flickr8k layout under `root`:
//   Flickr8k.token.txt           lines of "<image>#<idx>\t<caption>"
//   Flickr_8k.trainImages.txt    optional split lists, one file name per
//   Flickr_8k.testImages.txt     line (the dev list is ignored)
//   Flicker8k_Dataset/ | Flickr8k_Dataset/ | Images/ | images/
// Text files may also live in a Flickr8k_text/ subdirectory. Without split
// lists a seeded 80/20 split is used.
CorpusSplits load_flickr8k(const std::filesystem::path& root, std::uint64_t split_seed = 0);

// COCO caption annotations: {"images": [{id, file_name}], "annotations":
// [{image_id, caption}]}. Images with a caption count other than five are
// kept and reported through log_warning.
CaptionCorpus load_coco_captions(const std::filesystem::path& annotation_json,
                                 const std::filesystem::path& image_root);

// Seeded split of one corpus; the test side receives round(n * fraction)
// entries, at least one and at most n - 1.
CorpusSplits split_corpus(const CaptionCorpus& corpus, std::uint64_t seed, double test_fraction = 0.2);

// ---------------------------------------------------------------------------
// Procedural toy corpus

enum class ToyColor { red, green, blue, yellow };
enum class ToyShape { circle, square, triangle };
enum class ToyPlace { left, right, top, bottom };

struct ToyScene {
  ToyColor color = ToyColor::red;
  ToyShape shape = ToyShape::circle;
  ToyPlace place = ToyPlace::left;
  std::uint8_t background[3] = {0, 0, 0};
  double center_x = 0.0;  // fractions of the image side
  double center_y = 0.0;
  double radius = 0.0;

  bool operator==(const ToyScene&) const = default;
};

inline constexpr int kToyTemplates = 5;

// Caption `variant` (0..4) describing the scene.
std::string toy_caption(const ToyScene& scene, int variant);
// Renders the scene; every value is an exact multiple of 1/255.
Image render_toy_scene(const ToyScene& scene, int image_size);
ToyScene random_toy_scene(std::mt19937_64& rng);

struct ToyCorpusOptions {
  int captions_per_image = 1;  // 1..5
  double test_fraction = 0.2;
};

// Deterministic in `seed`. Throws UsageError when num_images < 2.
CorpusSplits make_toy_corpus(std::uint64_t seed, int num_images, int image_size,
                             const ToyCorpusOptions& options = {});

// ---------------------------------------------------------------------------
// Persistence: <dir>/images/<id>.png plus <dir>/manifest.jsonl with one
// {"id", "path", "captions", "split"} record per line. Paths are relative to
// <dir>.

void write_corpus(const CorpusSplits& splits, const std::filesystem::path& dir, const std::string& name);
CorpusSplits read_corpus(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Preprocessing

enum class DecodeFailure { fail_fast, skip };

struct PreprocessedImage {
  std::string id;
  Image image;
};

// Decode (or take in-memory pixels), replicate gray to RGB, resize to
// image_size x image_size bilinearly, values in [0, 1].
std::vector<PreprocessedImage> preprocess_images(const CaptionCorpus& corpus, int image_size,
                                                 DecodeFailure on_failure = DecodeFailure::fail_fast);

// ---------------------------------------------------------------------------
// Training-ready examples

struct Example {
  std::string id;
  Image image;
  std::vector<TokenSequence> captions;  // BOS ... EOS
};

struct Dataset {
  std::string name;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
};

// Tokenizes every caption, truncating to max_caption_len (EOS kept).
Dataset make_dataset(const CaptionCorpus& corpus, const Vocabulary& vocab, int image_size, int max_caption_len,
                     DecodeFailure on_failure = DecodeFailure::fail_fast);

// Gathers the examples at `indices` into model inputs; caption_choice picks the
// reference per example (index modulo the example's caption count).
ImageBatch gather_images(const Dataset& data, std::span<const std::size_t> indices);
CaptionBatch gather_captions(const Dataset& data, std::span<const std::size_t> indices,
                             std::span<const std::size_t> caption_choice, int pad);

}  // namespace advcap
