#include "advcap/dataset.hpp"

#include "advcap/errors.hpp"
#include "advcap/image_io.hpp"
#include "advcap/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace advcap {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SplitTag tag) { return tag == SplitTag::train ? "train" : "test"; }

SplitTag parse_split(std::string_view name) {
  if (name == "train") return SplitTag::train;
  if (name == "test") return SplitTag::test;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

std::size_t CaptionCorpus::caption_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.captions.size();
  return n;
}

std::vector<std::string> CaptionCorpus::all_captions() const {
  std::vector<std::string> out;
  for (const auto& e : entries) out.insert(out.end(), e.captions.begin(), e.captions.end());
  return out;
}

// ---------------------------------------------------------------------------
// Flickr8k

namespace {

std::optional<fs::path> first_existing(const fs::path& root, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (fs::exists(root / n)) return root / n;
  }
  return std::nullopt;
}

std::optional<fs::path> find_text_file(const fs::path& root, const char* name) {
  if (fs::exists(root / name)) return root / name;
  if (fs::exists(root / "Flickr8k_text" / name)) return root / "Flickr8k_text" / name;
  return std::nullopt;
}

std::vector<std::string> read_name_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string stem_of(const std::string& file_name) { return fs::path(file_name).stem().string(); }

}  // namespace

CorpusSplits load_flickr8k(const fs::path& root, std::uint64_t split_seed) {
  const auto token_file = find_text_file(root, "Flickr8k.token.txt");
  if (!token_file) throw IoError("Flickr8k.token.txt not found under " + root.string());
  const auto image_dir = first_existing(root, {"Flicker8k_Dataset", "Flickr8k_Dataset", "Images", "images"});
  if (!image_dir) throw ManifestError("no Flickr8k image directory under " + root.string());

  std::ifstream in(*token_file);
  if (!in) throw IoError("cannot open " + token_file->string());
  std::vector<CorpusEntry> entries;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("caption line lacks a tab separator", line_no);
    const std::string key = line.substr(0, tab);
    const auto hash = key.rfind('#');
    if (hash == std::string::npos || hash == 0 || hash + 1 == key.size()) {
      throw ParseError("caption key '" + key + "' is not <image>#<idx>", line_no);
    }
    const std::string idx = key.substr(hash + 1);
    if (!std::all_of(idx.begin(), idx.end(), [](unsigned char c) { return std::isdigit(c); })) {
      throw ParseError("caption index '" + idx + "' is not a number", line_no);
    }
    std::string caption = trim(line.substr(tab + 1));
    if (caption.empty()) throw ParseError("empty caption", line_no);
    const std::string name = key.substr(0, hash);
    auto [it, inserted] = index.emplace(name, entries.size());
    if (inserted) {
      CorpusEntry e;
      e.id = stem_of(name);
      e.image_path = *image_dir / name;
      entries.push_back(std::move(e));
    }
    entries[it->second].captions.push_back(std::move(caption));
  }
  if (entries.empty()) throw EmptyCorpusError("Flickr8k caption file is empty: " + token_file->string());
  for (const auto& e : entries) {
    if (!fs::exists(e.image_path)) throw ManifestError("missing image " + e.image_path.string());
    if (e.captions.size() != 5) {
      log_warning("Flickr8k image " + e.id + " has " + std::to_string(e.captions.size()) + " captions");
    }
  }

  CaptionCorpus all{"flickr8k", SplitTag::train, std::move(entries)};
  const auto train_list = find_text_file(root, "Flickr_8k.trainImages.txt");
  const auto test_list = find_text_file(root, "Flickr_8k.testImages.txt");
  if (!train_list || !test_list) return split_corpus(all, split_seed, 0.2);

  CorpusSplits out;
  out.train = {"flickr8k", SplitTag::train, {}};
  out.test = {"flickr8k", SplitTag::test, {}};
  std::map<std::string, const CorpusEntry*> by_file;
  for (const auto& e : all.entries) by_file[e.image_path.filename().string()] = &e;
  auto take = [&](const fs::path& list, CaptionCorpus& dst) {
    for (const auto& name : read_name_list(list)) {
      const auto it = by_file.find(name);
      if (it == by_file.end()) throw ManifestError("split list names unknown image " + name);
      dst.entries.push_back(*it->second);
    }
  };
  take(*train_list, out.train);
  take(*test_list, out.test);
  return out;
}

// ---------------------------------------------------------------------------
// COCO

namespace {

const json& require_key(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError("COCO annotations: " + where + " is missing key '" + key + "'");
  }
  return obj.at(key);
}

}  // namespace

CaptionCorpus load_coco_captions(const fs::path& annotation_json, const fs::path& image_root) {
  json doc;
  try {
    doc = json::parse(read_file(annotation_json));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("COCO annotations: ") + e.what());
  }
  const json& images = require_key(doc, "images", "top level");
  const json& annotations = require_key(doc, "annotations", "top level");
  if (!images.is_array() || !annotations.is_array()) {
    throw ParseError("COCO annotations: 'images' and 'annotations' must be arrays");
  }
  CaptionCorpus corpus{"coco", SplitTag::train, {}};
  std::map<std::int64_t, std::size_t> by_id;
  for (const auto& img : images) {
    const auto id = require_key(img, "id", "image record").get<std::int64_t>();
    const auto file = require_key(img, "file_name", "image record").get<std::string>();
    if (!by_id.emplace(id, corpus.entries.size()).second) {
      throw ParseError("COCO annotations: duplicate image id " + std::to_string(id));
    }
    CorpusEntry e;
    e.id = std::to_string(id);
    e.image_path = image_root / file;
    corpus.entries.push_back(std::move(e));
  }
  for (const auto& ann : annotations) {
    const auto image_id = require_key(ann, "image_id", "annotation record").get<std::int64_t>();
    auto caption = trim(require_key(ann, "caption", "annotation record").get<std::string>());
    const auto it = by_id.find(image_id);
    if (it == by_id.end()) {
      throw ManifestError("COCO annotation references unknown image_id " + std::to_string(image_id));
    }
    corpus.entries[it->second].captions.push_back(std::move(caption));
  }
  if (corpus.entries.empty()) throw EmptyCorpusError("COCO annotation file lists no images");
  for (const auto& e : corpus.entries) {
    if (!fs::exists(e.image_path)) throw ManifestError("missing image " + e.image_path.string());
  }
  std::size_t odd = 0;
  for (const auto& e : corpus.entries) odd += e.captions.size() != 5 ? 1 : 0;
  if (odd > 0) log_warning(std::to_string(odd) + " COCO images do not have exactly five captions");
  return corpus;
}

CorpusSplits split_corpus(const CaptionCorpus& corpus, std::uint64_t seed, double test_fraction) {
  const std::size_t n = corpus.entries.size();
  if (n < 2) throw UsageError("cannot split a corpus with fewer than two entries");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + n_test);
  std::vector<std::size_t> train_idx(order.begin() + n_test, order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  CorpusSplits out;
  out.train = {corpus.name, SplitTag::train, {}};
  out.test = {corpus.name, SplitTag::test, {}};
  for (auto i : train_idx) out.train.entries.push_back(corpus.entries[i]);
  for (auto i : test_idx) out.test.entries.push_back(corpus.entries[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Toy corpus

namespace {

constexpr const char* kColorNames[] = {"red", "green", "blue", "yellow"};
constexpr const char* kShapeNames[] = {"circle", "square", "triangle"};
constexpr const char* kPlacePhrases[] = {"on the left", "on the right", "at the top", "at the bottom"};
constexpr std::uint8_t kColorRgb[4][3] = {{220, 30, 30}, {30, 200, 40}, {40, 70, 230}, {230, 210, 30}};

}  // namespace

std::string toy_caption(const ToyScene& scene, int variant) {
  const std::string c = kColorNames[static_cast<int>(scene.color)];
  const std::string s = kShapeNames[static_cast<int>(scene.shape)];
  const std::string p = kPlacePhrases[static_cast<int>(scene.place)];
  switch (variant) {
    case 0: return "a " + c + " " + s + " " + p + ".";
    case 1: return "there is a " + c + " " + s + " " + p + ".";
    case 2: return "a " + c + " " + s + " is " + p + ".";
    case 3: return "the " + s + " " + p + " is " + c + ".";
    case 4: return "a " + s + " that is " + c + " " + p + ".";
    default: throw UsageError("toy caption variant must be 0..4");
  }
}

ToyScene random_toy_scene(std::mt19937_64& rng) {
  ToyScene s;
  s.color = static_cast<ToyColor>(std::uniform_int_distribution<int>(0, 3)(rng));
  s.shape = static_cast<ToyShape>(std::uniform_int_distribution<int>(0, 2)(rng));
  s.place = static_cast<ToyPlace>(std::uniform_int_distribution<int>(0, 3)(rng));
  std::uniform_int_distribution<int> bg(0, 70);
  for (auto& v : s.background) v = static_cast<std::uint8_t>(bg(rng));
  std::uniform_real_distribution<double> along(0.38, 0.62);
  std::uniform_real_distribution<double> near_edge(0.22, 0.3);
  switch (s.place) {
    case ToyPlace::left: s.center_x = near_edge(rng); s.center_y = along(rng); break;
    case ToyPlace::right: s.center_x = 1.0 - near_edge(rng); s.center_y = along(rng); break;
    case ToyPlace::top: s.center_y = near_edge(rng); s.center_x = along(rng); break;
    case ToyPlace::bottom: s.center_y = 1.0 - near_edge(rng); s.center_x = along(rng); break;
  }
  s.radius = std::uniform_real_distribution<double>(0.14, 0.19)(rng);
  return s;
}

Image render_toy_scene(const ToyScene& scene, int image_size) {
  Image img(3, image_size, image_size);
  const double n = image_size;
  const double cx = scene.center_x * n;
  const double cy = scene.center_y * n;
  const double r = scene.radius * n;
  const auto* rgb = kColorRgb[static_cast<int>(scene.color)];
  for (int y = 0; y < image_size; ++y) {
    for (int x = 0; x < image_size; ++x) {
      const double px = x + 0.5 - cx;
      const double py = y + 0.5 - cy;
      bool inside = false;
      switch (scene.shape) {
        case ToyShape::circle: inside = px * px + py * py <= r * r; break;
        case ToyShape::square: inside = std::abs(px) <= 0.85 * r && std::abs(py) <= 0.85 * r; break;
        case ToyShape::triangle: inside = py >= -r && py <= r && std::abs(px) <= (py + r) * 0.5; break;
      }
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = (inside ? rgb[c] : scene.background[c]) / 255.0;
    }
  }
  return img;
}

CorpusSplits make_toy_corpus(std::uint64_t seed, int num_images, int image_size, const ToyCorpusOptions& options) {
  if (num_images < 2) throw UsageError("toy corpus needs at least two images");
  if (options.captions_per_image < 1 || options.captions_per_image > kToyTemplates) {
    throw UsageError("toy captions_per_image must be 1..5");
  }
  std::mt19937_64 rng(seed);
  CaptionCorpus all{"toy", SplitTag::train, {}};
  for (int i = 0; i < num_images; ++i) {
    const ToyScene scene = random_toy_scene(rng);
    CorpusEntry e;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "toy%04d", i);
    e.id = buf;
    for (int v = 0; v < options.captions_per_image; ++v) e.captions.push_back(toy_caption(scene, v));
    e.image = render_toy_scene(scene, image_size);
    all.entries.push_back(std::move(e));
  }
  return split_corpus(all, seed ^ 0x9e3779b97f4a7c15ULL, options.test_fraction);
}

// ---------------------------------------------------------------------------
// Persistence

void write_corpus(const CorpusSplits& splits, const fs::path& dir, const std::string& name) {
  std::string manifest;
  for (const CaptionCorpus* corpus : {&splits.train, &splits.test}) {
    for (const auto& e : corpus->entries) {
      const fs::path rel = fs::path("images") / (e.id + ".png");
      if (e.image) {
        write_png(dir / rel, *e.image);
      } else {
        fs::create_directories((dir / rel).parent_path());
        fs::copy_file(e.image_path, dir / rel, fs::copy_options::overwrite_existing);
      }
      json rec{{"id", e.id}, {"path", rel.generic_string()}, {"captions", e.captions},
               {"split", to_string(corpus->split)}, {"corpus", name}};
      manifest += rec.dump() + "\n";
    }
  }
  write_file_atomic(dir / "manifest.jsonl", manifest);
}

CorpusSplits read_corpus(const fs::path& dir) {
  std::istringstream in(read_file(dir / "manifest.jsonl"));
  CorpusSplits out;
  out.train.split = SplitTag::train;
  out.test.split = SplitTag::test;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("manifest: ") + e.what(), line_no);
    }
    for (const char* key : {"id", "path", "captions", "split"}) {
      if (!rec.contains(key)) throw ParseError(std::string("manifest record lacks '") + key + "'", line_no);
    }
    CorpusEntry e;
    e.id = rec["id"].get<std::string>();
    e.image_path = dir / rec["path"].get<std::string>();
    e.captions = rec["captions"].get<std::vector<std::string>>();
    if (!fs::exists(e.image_path)) throw ManifestError("missing image " + e.image_path.string());
    const std::string corpus_name = rec.value("corpus", std::string("corpus"));
    CaptionCorpus& dst = parse_split(rec["split"].get<std::string>()) == SplitTag::train ? out.train : out.test;
    dst.name = corpus_name;
    dst.entries.push_back(std::move(e));
  }
  if (out.train.entries.empty() && out.test.entries.empty()) {
    throw EmptyCorpusError("manifest lists no entries: " + (dir / "manifest.jsonl").string());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessing

std::vector<PreprocessedImage> preprocess_images(const CaptionCorpus& corpus, int image_size,
                                                 DecodeFailure on_failure) {
  std::vector<PreprocessedImage> out;
  out.reserve(corpus.entries.size());
  for (const auto& e : corpus.entries) {
    Image img;
    if (e.image) {
      img = *e.image;
    } else {
      try {
        img = read_image(e.image_path);
      } catch (const IoError& err) {
        if (on_failure == DecodeFailure::fail_fast) throw;
        log_warning(std::string("skipping undecodable image: ") + err.what());
        continue;
      }
    }
    img = resize_bilinear(to_rgb(img), image_size, image_size);
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
    out.push_back({e.id, std::move(img)});
  }
  return out;
}

Dataset make_dataset(const CaptionCorpus& corpus, const Vocabulary& vocab, int image_size, int max_caption_len,
                     DecodeFailure on_failure) {
  std::map<std::string, const CorpusEntry*> by_id;
  for (const auto& e : corpus.entries) by_id[e.id] = &e;
  Dataset data;
  data.name = corpus.name + "/" + std::string(to_string(corpus.split));
  for (auto& p : preprocess_images(corpus, image_size, on_failure)) {
    const CorpusEntry& e = *by_id.at(p.id);
    if (e.captions.empty()) {
      log_warning("entry " + e.id + " has no captions; skipped");
      continue;
    }
    Example ex;
    ex.id = p.id;
    ex.image = std::move(p.image);
    for (const auto& cap : e.captions) {
      TokenSequence ids = tokenize(cap, vocab);
      if (static_cast<int>(ids.size()) > max_caption_len) {
        ids.resize(static_cast<std::size_t>(max_caption_len));
        ids.back() = vocab.special().eos;
      }
      ex.captions.push_back(std::move(ids));
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

ImageBatch gather_images(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<Image> imgs;
  std::vector<std::string> ids;
  imgs.reserve(indices.size());
  for (auto i : indices) {
    imgs.push_back(data.examples.at(i).image);
    ids.push_back(data.examples[i].id);
  }
  return ImageBatch::from_images(imgs, std::move(ids));
}

CaptionBatch gather_captions(const Dataset& data, std::span<const std::size_t> indices,
                             std::span<const std::size_t> caption_choice, int pad) {
  std::vector<TokenSequence> seqs;
  seqs.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& caps = data.examples.at(indices[k]).captions;
    const std::size_t pick = caption_choice.empty() ? 0 : caption_choice[k] % caps.size();
    seqs.push_back(caps[pick]);
  }
  return CaptionBatch::from_sequences(seqs, pad);
}

}  // namespace advcap
