#include "advcap/dataset.hpp"
#include "advcap/errors.hpp"
#include "advcap/image_io.hpp"
#include "advcap/io_util.hpp"
#include "advcap/vocabulary.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace advcap {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("advcap_" + std::string(info->test_suite_name()) + "_" + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

Image solid(int c, int h, int w, double v) {
  Image img(c, h, w);
  std::fill(img.data.begin(), img.data.end(), v);
  return img;
}

struct QuietWarnings {
  QuietWarnings() { set_warnings_enabled(false); }
  ~QuietWarnings() { set_warnings_enabled(true); }
};

// ---------------------------------------------------------------------------
// Vocabulary

TEST(VocabularyTest, SplitWords) {
  EXPECT_EQ(split_words("A red  circle."), (std::vector<std::string>{"a", "red", "circle", "."}));
  EXPECT_EQ(split_words("dog's ball, here!"),
            (std::vector<std::string>{"dog", "'", "s", "ball", ",", "here", "!"}));
  EXPECT_TRUE(split_words("   ").empty());
}

TEST(VocabularyTest, SpecialIdsAndOrdering) {
  const auto v = build_vocabulary({"b a a", "c b a"});
  EXPECT_EQ(v.token(0), Vocabulary::kPad);
  EXPECT_EQ(v.token(1), Vocabulary::kBos);
  EXPECT_EQ(v.token(2), Vocabulary::kEos);
  EXPECT_EQ(v.token(3), Vocabulary::kUnk);
  EXPECT_EQ(v.token(4), "a");  // 3 occurrences
  EXPECT_EQ(v.token(5), "b");  // 2
  EXPECT_EQ(v.token(6), "c");  // 1
  EXPECT_EQ(v.size(), 7);
}

TEST(VocabularyTest, Bijection) {
  const auto v = build_vocabulary({"the quick brown fox", "jumps over the lazy dog."});
  for (int i = 0; i < v.size(); ++i) EXPECT_EQ(v.id(v.token(i)), i);
}

TEST(VocabularyTest, MinFrequencyMapsRareToUnk) {
  const auto v = build_vocabulary({"a b", "a c", "a b"}, 2);
  EXPECT_EQ(v.id("c"), v.special().unk);
  EXPECT_NE(v.id("b"), v.special().unk);
  EXPECT_EQ(v.min_frequency(), 2);
}

TEST(VocabularyTest, RebuildIsStable) {
  const std::vector<std::string> texts{"one two three", "three two", "two"};
  EXPECT_EQ(build_vocabulary(texts), build_vocabulary(texts));
  const auto v = build_vocabulary(texts);
  EXPECT_EQ(Vocabulary::from_tokens(v.tokens()), v);
  EXPECT_THROW(Vocabulary::from_tokens({"x", "y"}), ParseError);
}

TEST(VocabularyTest, TokenizeToyExample) {
  const auto splits = make_toy_corpus(1, 64, 16, {5, 0.2});
  const auto vocab = build_vocabulary(splits.train.all_captions());
  const auto ids = tokenize("A red circle.", vocab);
  const auto& sp = vocab.special();
  EXPECT_EQ(ids, (TokenSequence{sp.bos, vocab.id("a"), vocab.id("red"), vocab.id("circle"), vocab.id("."), sp.eos}));
  for (int id : ids) EXPECT_NE(id, sp.unk);
  EXPECT_EQ(detokenize(ids, vocab), "a red circle.");
  EXPECT_EQ(tokenize("a purple circle", vocab)[2], sp.unk);
}

TEST(VocabularyTest, RoundTripProperty) {
  const std::vector<std::string> words{"a", "dog", "runs", "on", "the", "grass", "red", "ball", ",", ".", "!"};
  std::vector<std::string> corpus{"a dog runs on the grass, red ball. !"};
  const auto vocab = build_vocabulary(corpus);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<int> len(1, 12);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> toks;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) toks.push_back(words[pick(rng)]);
    // Canonical text: words separated by one space, punctuation attached.
    std::string text;
    for (const auto& t : toks) {
      const bool punct = t.size() == 1 && std::ispunct(static_cast<unsigned char>(t[0]));
      if (!text.empty() && !punct) text += ' ';
      text += t;
    }
    const auto ids = tokenize(text, vocab);
    ASSERT_EQ(detokenize(ids, vocab), text) << trial;
    ASSERT_EQ(ids.size(), toks.size() + 2);
  }
}

TEST(VocabularyTest, StripSpecial) {
  const SpecialTokens sp;
  EXPECT_EQ(strip_special({sp.bos, 5, 6, sp.eos, sp.pad}, sp), (TokenSequence{5, 6}));
}

// ---------------------------------------------------------------------------
// Toy corpus

TEST(ToyCorpusTest, DeterministicInSeed) {
  const auto a = make_toy_corpus(4, 20, 16);
  const auto b = make_toy_corpus(4, 20, 16);
  ASSERT_EQ(a.train.entries.size(), b.train.entries.size());
  for (std::size_t i = 0; i < a.train.entries.size(); ++i) {
    EXPECT_EQ(a.train.entries[i].id, b.train.entries[i].id);
    EXPECT_EQ(a.train.entries[i].captions, b.train.entries[i].captions);
    EXPECT_EQ(*a.train.entries[i].image, *b.train.entries[i].image);
  }
}

TEST(ToyCorpusTest, DifferentSeedsDiffer) {
  auto captions = [](std::uint64_t seed) {
    std::multiset<std::string> s;
    const auto c = make_toy_corpus(seed, 40, 16);
    for (const auto* part : {&c.train, &c.test}) {
      for (const auto& e : part->entries) s.insert(e.captions[0]);
    }
    return s;
  };
  EXPECT_NE(captions(1), captions(2));
}

TEST(ToyCorpusTest, GrammarVocabularyFits) {
  std::vector<std::string> all;
  for (int c = 0; c < 4; ++c) {
    for (int s = 0; s < 3; ++s) {
      for (int p = 0; p < 4; ++p) {
        ToyScene scene;
        scene.color = static_cast<ToyColor>(c);
        scene.shape = static_cast<ToyShape>(s);
        scene.place = static_cast<ToyPlace>(p);
        for (int v = 0; v < kToyTemplates; ++v) all.push_back(toy_caption(scene, v));
      }
    }
  }
  const auto vocab = build_vocabulary(all);
  EXPECT_LE(vocab.size(), 64);
  EXPECT_THROW(toy_caption(ToyScene{}, kToyTemplates), UsageError);
}

TEST(ToyCorpusTest, CaptionDescribesScene) {
  ToyScene s;
  s.color = ToyColor::blue;
  s.shape = ToyShape::triangle;
  s.place = ToyPlace::top;
  EXPECT_EQ(toy_caption(s, 0), "a blue triangle at the top.");
}

TEST(ToyCorpusTest, ShapesAndValues) {
  const auto c = make_toy_corpus(9, 64, 32, {3, 0.2});
  EXPECT_EQ(c.train.entries.size() + c.test.entries.size(), 64u);
  EXPECT_EQ(c.test.entries.size(), 13u);
  for (const auto* part : {&c.train, &c.test}) {
    for (const auto& e : part->entries) {
      ASSERT_TRUE(e.image.has_value());
      EXPECT_EQ(e.captions.size(), 3u);
      EXPECT_EQ(e.image->channels, 3);
      EXPECT_EQ(e.image->height, 32);
      for (double v : e.image->data) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        ASSERT_DOUBLE_EQ(v * 255.0, std::round(v * 255.0));
      }
    }
  }
  EXPECT_THROW(make_toy_corpus(1, 1, 16), UsageError);
}

TEST(SplitTest, DisjointAndDeterministic) {
  const auto c = make_toy_corpus(2, 50, 8);
  std::set<std::string> train_ids;
  for (const auto& e : c.train.entries) train_ids.insert(e.id);
  for (const auto& e : c.test.entries) EXPECT_EQ(train_ids.count(e.id), 0u);
  EXPECT_EQ(train_ids.size() + c.test.entries.size(), 50u);
  const auto again = split_corpus(c.train, 5);
  const auto again2 = split_corpus(c.train, 5);
  ASSERT_EQ(again.test.entries.size(), again2.test.entries.size());
  for (std::size_t i = 0; i < again.test.entries.size(); ++i) {
    EXPECT_EQ(again.test.entries[i].id, again2.test.entries[i].id);
  }
}

TEST(CorpusPersistenceTest, RoundTrip) {
  TempDir dir;
  const auto c = make_toy_corpus(6, 12, 16, {2, 0.25});
  write_corpus(c, dir.path(), "toy");
  const auto back = read_corpus(dir.path());
  ASSERT_EQ(back.train.entries.size(), c.train.entries.size());
  ASSERT_EQ(back.test.entries.size(), c.test.entries.size());
  const auto pre = preprocess_images(back.train, 16);
  for (std::size_t i = 0; i < pre.size(); ++i) {
    EXPECT_EQ(back.train.entries[i].captions, c.train.entries[i].captions);
    EXPECT_EQ(pre[i].image, *c.train.entries[i].image);  // PNG is exact for multiples of 1/255
  }
}

// ---------------------------------------------------------------------------
// Image I/O

TEST(ImageIoTest, BilinearTwoByTwoOracle) {
  // Half-pixel centres: output pixel i samples source coordinate (i + 0.5) * 2/4 - 0.5.
  Image src(1, 2, 2);
  src.at(0, 0, 0) = 0.0;
  src.at(0, 0, 1) = 1.0;
  src.at(0, 1, 0) = 0.5;
  src.at(0, 1, 1) = 0.25;
  const Image out = resize_bilinear(src, 4, 4);
  // Source coordinates per output index: -0.25 -> 0, 0.25, 0.75, 1.25 -> 1.
  const double w[4] = {0.0, 0.25, 0.75, 1.0};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const double top = 0.0 * (1 - w[x]) + 1.0 * w[x];
      const double bottom = 0.5 * (1 - w[x]) + 0.25 * w[x];
      EXPECT_NEAR(out.at(0, y, x), top * (1 - w[y]) + bottom * w[y], 1e-15) << y << "," << x;
    }
  }
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out.at(0, 3, 3), 0.25);
}

TEST(ImageIoTest, SameSizeIsIdentity) {
  Image src(3, 5, 5);
  for (std::size_t i = 0; i < src.data.size(); ++i) src.data[i] = (i % 17) / 16.0;
  EXPECT_EQ(resize_bilinear(src, 5, 5), src);
  EXPECT_THROW(resize_bilinear(src, 0, 5), DimensionError);
}

TEST(ImageIoTest, GrayReplicatedToRgb) {
  TempDir dir;
  Image gray(1, 3, 4);
  for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = static_cast<double>(i * 20) / 255.0;
  write_png(dir.path() / "g.png", gray);
  const Image read = read_image(dir.path() / "g.png");
  ASSERT_EQ(read.channels, 1);
  const Image rgb = to_rgb(read);
  ASSERT_EQ(rgb.channels, 3);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 4; ++x) EXPECT_DOUBLE_EQ(rgb.at(c, y, x), gray.at(0, y, x));
    }
  }
}

TEST(ImageIoTest, PngChannelOrderIsRgb) {
  TempDir dir;
  Image img(3, 2, 2);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      img.at(0, y, x) = 1.0;
      img.at(1, y, x) = 0.0;
      img.at(2, y, x) = 51.0 / 255.0;
    }
  }
  write_png(dir.path() / "c.png", img);
  EXPECT_EQ(read_image(dir.path() / "c.png"), img);
  EXPECT_THROW(read_image(dir.path() / "missing.png"), IoError);
}

TEST(ImageIoTest, TensorImageIsLossless) {
  TempDir dir;
  Image img(3, 4, 4);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0, 1);
  for (double& v : img.data) v = d(rng);
  write_tensor_image(dir.path() / "x.advimg", img);
  EXPECT_EQ(read_tensor_image(dir.path() / "x.advimg"), img);
  write_text(dir.path() / "bad.advimg", "nope");
  EXPECT_THROW(read_tensor_image(dir.path() / "bad.advimg"), ParseError);
}

TEST(PreprocessTest, ResizesAndReplicates) {
  TempDir dir;
  write_png(dir.path() / "a.png", solid(1, 6, 10, 0.4));
  write_png(dir.path() / "b.png", solid(3, 8, 8, 0.8));
  CaptionCorpus c{"x", SplitTag::train, {}};
  c.entries.push_back({"a", dir.path() / "a.png", {"x"}, std::nullopt});
  c.entries.push_back({"b", dir.path() / "b.png", {"y"}, std::nullopt});
  const auto out = preprocess_images(c, 8);
  ASSERT_EQ(out.size(), 2u);
  for (const auto& p : out) {
    EXPECT_EQ(p.image.channels, 3);
    EXPECT_EQ(p.image.height, 8);
    EXPECT_EQ(p.image.width, 8);
    for (double v : p.image.data) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_NEAR(out[0].image.at(2, 3, 3), 102.0 / 255.0, 1e-12);
}

TEST(PreprocessTest, DecodeFailurePolicy) {
  QuietWarnings quiet;
  TempDir dir;
  write_png(dir.path() / "ok.png", solid(3, 4, 4, 0.2));
  write_text(dir.path() / "broken.png", "not an image");
  CaptionCorpus c{"x", SplitTag::train, {}};
  c.entries.push_back({"ok", dir.path() / "ok.png", {"x"}, std::nullopt});
  c.entries.push_back({"broken", dir.path() / "broken.png", {"y"}, std::nullopt});
  EXPECT_THROW(preprocess_images(c, 4, DecodeFailure::fail_fast), IoError);
  const auto kept = preprocess_images(c, 4, DecodeFailure::skip);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id, "ok");
}

// ---------------------------------------------------------------------------
// Flickr8k

void flickr_fixture(const fs::path& root, int images, bool split_lists) {
  std::string tokens;
  std::string train_list;
  std::string test_list;
  for (int i = 0; i < images; ++i) {
    const std::string name = "img" + std::to_string(i) + ".jpg";
    write_png(root / "Flicker8k_Dataset" / name, solid(3, 6, 6, i / 20.0));
    for (int k = 0; k < 5; ++k) tokens += name + "#" + std::to_string(k) + "\tA dog number " + std::to_string(k) + " .\n";
    (i < 8 ? train_list : test_list) += name + "\n";
  }
  write_text(root / "Flickr8k_text" / "Flickr8k.token.txt", tokens);
  if (split_lists) {
    write_text(root / "Flickr8k_text" / "Flickr_8k.trainImages.txt", train_list);
    write_text(root / "Flickr8k_text" / "Flickr_8k.testImages.txt", test_list);
  }
}

TEST(Flickr8kTest, TenImageFixture) {
  TempDir dir;
  flickr_fixture(dir.path(), 10, true);
  const auto s = load_flickr8k(dir.path());
  EXPECT_EQ(s.train.entries.size() + s.test.entries.size(), 10u);
  EXPECT_EQ(s.train.caption_count() + s.test.caption_count(), 50u);
  EXPECT_EQ(s.train.entries.size(), 8u);
  EXPECT_EQ(s.test.entries.size(), 2u);
  EXPECT_EQ(s.train.entries[0].captions[0], "A dog number 0 .");
}

TEST(Flickr8kTest, SeededSplitWithoutLists) {
  TempDir dir;
  flickr_fixture(dir.path(), 10, false);
  const auto a = load_flickr8k(dir.path(), 3);
  const auto b = load_flickr8k(dir.path(), 3);
  EXPECT_EQ(a.test.entries.size(), 2u);
  for (std::size_t i = 0; i < a.test.entries.size(); ++i) EXPECT_EQ(a.test.entries[i].id, b.test.entries[i].id);
}

TEST(Flickr8kTest, EmptyCaptionFile) {
  TempDir dir;
  fs::create_directories(dir.path() / "Images");
  write_text(dir.path() / "Flickr8k.token.txt", "");
  EXPECT_THROW(load_flickr8k(dir.path()), EmptyCorpusError);
}

TEST(Flickr8kTest, MalformedLineReportsLineNumber) {
  TempDir dir;
  fs::create_directories(dir.path() / "Images");
  write_text(dir.path() / "Flickr8k.token.txt", "a.jpg#0\tok caption\na.jpg#1 missing tab\n");
  try {
    load_flickr8k(dir.path());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Flickr8kTest, MissingImageIsManifestError) {
  TempDir dir;
  fs::create_directories(dir.path() / "Images");
  write_text(dir.path() / "Flickr8k.token.txt", "gone.jpg#0\ta caption\n");
  EXPECT_THROW(load_flickr8k(dir.path()), ManifestError);
}

TEST(Flickr8kTest, FullCorpusWhenPresent) {
  const char* root = std::getenv("ADVCAP_FLICKR8K_ROOT");
  if (root == nullptr) GTEST_SKIP() << "ADVCAP_FLICKR8K_ROOT not set";
  QuietWarnings quiet;
  const auto s = load_flickr8k(root);
  // The dev list is not used; count every captioned image.
  std::set<std::string> ids;
  std::size_t captions = 0;
  std::ifstream in(fs::path(root) / "Flickr8k_text" / "Flickr8k.token.txt");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ids.insert(line.substr(0, line.find('#')));
    ++captions;
  }
  EXPECT_EQ(ids.size(), 8000u);
  EXPECT_EQ(captions, 40000u);
  EXPECT_GT(s.train.entries.size(), 0u);
}

// ---------------------------------------------------------------------------
// COCO

void coco_fixture(const fs::path& dir, bool dangling) {
  nlohmann::json doc;
  doc["images"] = nlohmann::json::array();
  doc["annotations"] = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    const std::string file = "COCO_" + std::to_string(i) + ".png";
    write_png(dir / "imgs" / file, solid(3, 5, 7, 0.1 * i));
    doc["images"].push_back({{"id", 100 + i}, {"file_name", file}});
    for (int k = 0; k < 5; ++k) {
      doc["annotations"].push_back({{"image_id", 100 + i}, {"caption", "a cat " + std::to_string(k)}});
    }
  }
  if (dangling) doc["annotations"].push_back({{"image_id", 999}, {"caption", "orphan"}});
  write_text(dir / "captions.json", doc.dump());
}

TEST(CocoTest, FourImageFixture) {
  TempDir dir;
  coco_fixture(dir.path(), false);
  const auto c = load_coco_captions(dir.path() / "captions.json", dir.path() / "imgs");
  EXPECT_EQ(c.entries.size(), 4u);
  EXPECT_EQ(c.caption_count(), 20u);
  EXPECT_EQ(c.entries[2].id, "102");
  const auto pre = preprocess_images(c, 8);
  EXPECT_EQ(pre[0].image.width, 8);
}

TEST(CocoTest, DanglingReference) {
  TempDir dir;
  coco_fixture(dir.path(), true);
  try {
    load_coco_captions(dir.path() / "captions.json", dir.path() / "imgs");
    FAIL() << "expected ManifestError";
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown image_id 999"), std::string::npos);
  }
}

TEST(CocoTest, MissingKeyNamed) {
  TempDir dir;
  write_text(dir.path() / "a.json", R"({"images": [{"id": 1}], "annotations": []})");
  try {
    load_coco_captions(dir.path() / "a.json", dir.path());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("file_name"), std::string::npos);
  }
  write_text(dir.path() / "b.json", R"({"images": []})");
  EXPECT_THROW(load_coco_captions(dir.path() / "b.json", dir.path()), ParseError);
}

TEST(CocoTest, OddCaptionCountsKept) {
  QuietWarnings quiet;
  TempDir dir;
  write_png(dir.path() / "x.png", solid(3, 4, 4, 0.5));
  write_text(dir.path() / "a.json",
             R"({"images": [{"id": 1, "file_name": "x.png"}], "annotations": [{"image_id": 1, "caption": "one"}]})");
  const auto c = load_coco_captions(dir.path() / "a.json", dir.path());
  EXPECT_EQ(c.entries[0].captions.size(), 1u);
}

TEST(CocoTest, FullCorpusWhenPresent) {
  // Colon-separated annotation files (train2014:val2014) and matching image roots.
  const char* ann = std::getenv("ADVCAP_COCO_ANNOTATIONS");
  const char* roots = std::getenv("ADVCAP_COCO_IMAGES");
  if (ann == nullptr || roots == nullptr) GTEST_SKIP() << "ADVCAP_COCO_ANNOTATIONS / ADVCAP_COCO_IMAGES not set";
  QuietWarnings quiet;
  auto split = [](std::string s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ':')) out.push_back(part);
    return out;
  };
  const auto anns = split(ann);
  const auto dirs = split(roots);
  ASSERT_EQ(anns.size(), dirs.size());
  std::size_t images = 0;
  for (std::size_t i = 0; i < anns.size(); ++i) images += load_coco_captions(anns[i], dirs[i]).entries.size();
  EXPECT_EQ(images, 123287u);
}

// ---------------------------------------------------------------------------
// Training examples

TEST(DatasetTest, MakeDatasetTokenizesAndTruncates) {
  const auto c = make_toy_corpus(3, 10, 16, {2, 0.2});
  const auto vocab = build_vocabulary(c.train.all_captions());
  const auto data = make_dataset(c.train, vocab, 8, 6);
  ASSERT_EQ(data.size(), c.train.entries.size());
  for (const auto& ex : data.examples) {
    EXPECT_EQ(ex.image.height, 8);
    for (const auto& cap : ex.captions) {
      EXPECT_LE(cap.size(), 6u);
      EXPECT_EQ(cap.front(), vocab.special().bos);
      EXPECT_EQ(cap.back(), vocab.special().eos);
      for (int id : cap) EXPECT_LT(id, vocab.size());
    }
  }
}

TEST(DatasetTest, GatherPicksCaptions) {
  const auto c = make_toy_corpus(3, 10, 16, {3, 0.2});
  const auto vocab = build_vocabulary(c.train.all_captions());
  const auto data = make_dataset(c.train, vocab, 16, 16);
  const std::vector<std::size_t> idx{2, 0};
  const std::vector<std::size_t> choice{1, 5};
  const auto images = gather_images(data, idx);
  EXPECT_EQ(images.ids(), (std::vector<std::string>{data.examples[2].id, data.examples[0].id}));
  const auto caps = gather_captions(data, idx, choice, vocab.special().pad);
  EXPECT_EQ(caps.batch(), 2);
  for (int t = 0; t < static_cast<int>(data.examples[2].captions[1].size()); ++t) {
    EXPECT_EQ(caps.token(0, t), data.examples[2].captions[1][t]);
  }
  for (int t = 0; t < static_cast<int>(data.examples[0].captions[2].size()); ++t) {
    EXPECT_EQ(caps.token(1, t), data.examples[0].captions[2][t]);
  }
}

}  // namespace
}  // namespace advcap
