#include "ntrr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include "json.hpp"

#include "ntrr/error.hpp"
#include "ntrr/run_config.hpp"

namespace ntrr::data {
namespace {

constexpr std::uint32_t kFlagF64 = 1;
constexpr std::uint32_t kMaxRank = 8;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void text(const std::string& s) { bytes(s.data(), s.size()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw CorruptionError(pos_, std::string("truncated checkpoint while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string config_block(const Checkpoint& c) {
  std::string out = model_config_text(c.config);
  out += "entity_types = " + nlohmann::json(c.config.labels.entity_types()).dump() + "\n";
  out += "vocab = " + nlohmann::json(c.vocab.tokens()).dump() + "\n";
  return out;
}

void parse_config_block(const std::string& text, std::size_t offset, Checkpoint& c) {
  RunConfig rc;
  bool have_types = false, have_vocab = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw CorruptionError(offset, "malformed config line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    try {
      if (key == "entity_types" || key == "vocab") {
        auto items = nlohmann::json::parse(value).get<std::vector<std::string>>();
        if (key == "entity_types") {
          rc.model.labels = tagging::LabelSet(std::move(items));
          have_types = true;
        } else {
          c.vocab = Vocab::from_tokens(std::move(items));
          have_vocab = true;
        }
      } else {
        set_value(rc, key, value);
      }
    } catch (const nlohmann::json::exception& e) {
      throw CorruptionError(offset, "bad '" + key + "' in config block: " + e.what());
    } catch (const Error& e) {
      throw CorruptionError(offset, std::string("bad config block: ") + e.what());
    }
  }
  if (!have_types || !have_vocab) throw CorruptionError(offset, "config block lacks entity_types or vocab");
  c.config = rc.model;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(checkpoint.f64 ? kFlagF64 : 0);
  const std::string block = config_block(checkpoint);
  w.u64(block.size());
  w.text(block);
  w.u64(checkpoint.tensors.size());
  for (const auto& nt : checkpoint.tensors) {
    w.u32(static_cast<std::uint32_t>(nt.name.size()));
    w.text(nt.name);
    const Shape& shape = nt.tensor.shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) w.u64(d);
    for (double v : nt.tensor.values()) {
      if (checkpoint.f64) w.u64(std::bit_cast<std::uint64_t>(v));
      else w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw CorruptionError(0, "not a checkpoint (bad magic)");
  r.text(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw CorruptionError(4, "unsupported checkpoint version " + std::to_string(version));
  const std::size_t flags_at = r.offset();
  const std::uint32_t flags = r.u32("flags");
  if (flags & ~kFlagF64) throw CorruptionError(flags_at, "unknown checkpoint flags");
  Checkpoint c;
  c.f64 = (flags & kFlagF64) != 0;
  const std::size_t width = c.f64 ? 8 : 4;

  const std::size_t block_at = r.offset();
  const std::uint64_t block_len = r.u64("config length");
  if (block_len > r.remaining()) throw CorruptionError(block_at, "config length exceeds file size");
  const std::size_t text_at = r.offset();
  parse_config_block(r.text(block_len, "config block"), text_at, c);

  const std::size_t count_at = r.offset();
  const std::uint64_t count = r.u64("tensor count");
  // Each record needs at least 8 bytes, which bounds a sane count.
  if (count > r.remaining() / 8) throw CorruptionError(count_at, "tensor count exceeds file size");
  for (std::uint64_t t = 0; t < count; ++t) {
    const std::size_t rec_at = r.offset();
    const std::uint32_t name_len = r.u32("name length");
    if (name_len > r.remaining()) throw CorruptionError(rec_at, "name length exceeds file size");
    std::string name = r.text(name_len, "name");
    const std::size_t rank_at = r.offset();
    const std::uint32_t rank = r.u32("rank");
    if (rank > kMaxRank) throw CorruptionError(rank_at, "rank " + std::to_string(rank) + " too large");
    Shape shape;
    std::uint64_t elements = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::size_t dim_at = r.offset();
      const std::uint64_t d = r.u64("dimension");
      if (d == 0 || d > r.remaining() || elements > r.remaining() / d)
        throw CorruptionError(dim_at, "implausible dimension " + std::to_string(d));
      elements *= d;
      shape.push_back(static_cast<std::size_t>(d));
    }
    const std::size_t values_at = r.offset();
    if (elements > r.remaining() / width)
      throw CorruptionError(values_at, "values of '" + name + "' exceed file size");
    std::vector<double> values(elements);
    for (auto& v : values) {
      if (c.f64) v = std::bit_cast<double>(r.u64("value"));
      else v = static_cast<double>(std::bit_cast<float>(r.u32("value")));
    }
    c.tensors.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values), true)});
  }
  if (r.remaining() != 0) throw CorruptionError(r.offset(), "trailing bytes after last tensor");
  return c;
}

void save_checkpoint(const std::string& path, const model::ModelParams& params, const model::ModelConfig& config,
                     const Vocab& vocab, bool f64) {
  Checkpoint c{config, vocab, params.named(), f64};
  const auto bytes = serialize_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace ntrr::data
