#include "advcap/checkpoint.hpp"

#include "advcap/errors.hpp"
#include "advcap/io_util.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace advcap {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'C', 'A', 'P', 'C', 'K'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void read_into(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("truncated checkpoint");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const CaptionModel& model, const nlohmann::json& extra) {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["config"] = model.config();
  meta["special_tokens"] = model.special_tokens();
  const std::string meta_text = meta.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, meta_text.size());
  out += meta_text;
  const auto& params = model.parameters();
  put<std::uint64_t>(out, params.size());
  for (const auto& t : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.group));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
    out.append(reinterpret_cast<const char*>(t.value.data()), sizeof(double) * t.value.size());
  }
  return out;
}

LoadedCheckpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw ParseError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CompatibilityError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto meta_len = in.get<std::uint64_t>();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in.take(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what());
  }
  if (!meta.contains("config") || !meta.contains("special_tokens")) {
    throw ParseError("checkpoint metadata lacks config or special_tokens");
  }
  const auto config = meta.at("config").get<ModelConfig>();
  const auto special = meta.at("special_tokens").get<SpecialTokens>();

  ParameterSet params;
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint32_t>();
    std::string name = in.take(name_len);
    const auto group = in.get<std::uint8_t>();
    if (group > 1) throw ParseError("bad parameter group tag in checkpoint");
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    Matrix value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read_into(value.data(), sizeof(double) * rows * cols);
    params.add(std::move(name), static_cast<ParamGroup>(group), std::move(value));
  }
  if (!in.at_end()) throw ParseError("trailing bytes after checkpoint payload");
  meta.erase("config");
  meta.erase("special_tokens");
  return {CaptionModel(config, special, std::move(params)), std::move(meta)};
}

void save_checkpoint(const std::filesystem::path& path, const CaptionModel& model, const nlohmann::json& extra) {
  write_file_atomic(path, serialize_checkpoint(model, extra));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace advcap
