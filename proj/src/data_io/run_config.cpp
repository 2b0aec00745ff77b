#include "ntrr/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <sstream>

#include "ntrr/error.hpp"

namespace ntrr::data {
namespace {

using attention::PeMode;
using model::DecodeMode;

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_integer(std::string_view s, T& out) {
  if (s.empty() || s.front() == '+') return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

struct Field {
  const char* key;
  const char* section;
  const char* type;
  const char* description;
  // Returns false when the text is not a value of the field's type.
  std::function<bool(RunConfig&, std::string_view)> parse;
  std::function<std::string(const RunConfig&)> format;
};

template <class T, class Get>
Field integer_field(const char* key, const char* section, const char* description, Get get) {
  const char* type = std::is_signed_v<T> ? "integer" : "non-negative integer";
  return {key, section, type, description,
          [get](RunConfig& c, std::string_view v) {
            T out{};
            if (!parse_integer(v, out)) return false;
            get(c) = out;
            return true;
          },
          [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Field real_field(const char* key, const char* section, const char* description, Get get) {
  return {key, section, "real", description,
          [get](RunConfig& c, std::string_view v) {
            double out = 0;
            if (!parse_double(v, out)) return false;
            get(c) = out;
            return true;
          },
          [get](const RunConfig& c) { return format_double(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Field bool_field(const char* key, const char* section, const char* description, Get get) {
  return {key, section, "bool", description,
          [get](RunConfig& c, std::string_view v) {
            if (v == "true") get(c) = true;
            else if (v == "false") get(c) = false;
            else return false;
            return true;
          },
          [get](const RunConfig& c) { return std::string(get(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <class E, class Get>
Field enum_field(const char* key, const char* section, const char* type, const char* description,
                 std::vector<std::pair<std::string_view, E>> names, Get get) {
  return {key, section, type, description,
          [get, names](RunConfig& c, std::string_view v) {
            for (const auto& [n, e] : names)
              if (n == v) {
                get(c) = e;
                return true;
              }
            return false;
          },
          [get, names](const RunConfig& c) {
            for (const auto& [n, e] : names)
              if (e == get(const_cast<RunConfig&>(c))) return std::string(n);
            return std::string("?");
          }};
}

#define M(field) [](RunConfig& c) -> auto& { return c.model.field; }
#define T(field) [](RunConfig& c) -> auto& { return c.train.field; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(integer_field<std::size_t>("vocab_size", "model", "Vocabulary size; 0 binds it to the training vocabulary.", M(vocab_size)));
    f.push_back(integer_field<std::size_t>("model_dim", "model", "Hidden width d.", M(model_dim)));
    f.push_back(integer_field<std::size_t>("ffn_dim", "model", "Feed-forward inner width.", M(ffn_dim)));
    f.push_back(integer_field<std::size_t>("xlnet_layers", "model", "Layers in the XLNet encoder stack.", M(xlnet_layers)));
    f.push_back(integer_field<std::size_t>("transformer_layers", "model", "Layers in the relative-position Transformer stack.", M(transformer_layers)));
    f.push_back(integer_field<std::size_t>("num_heads", "model", "Attention heads; must divide model_dim.", M(num_heads)));
    f.push_back(integer_field<int>("clip_k", "model", "Maximum relative distance k.", M(clip_k)));
    f.push_back(integer_field<int>("clip_k_start", "model", "First-epoch k of a linear schedule; 0 with clip_k_end 0 keeps k fixed.", M(clip_k_start)));
    f.push_back(integer_field<int>("clip_k_end", "model", "Last-epoch k of the schedule.", M(clip_k_end)));
    f.push_back(enum_field<PeMode>("pe_mode", "model", "absolute or relative", "Position encoding.",
                                   {{"absolute", PeMode::absolute}, {"relative", PeMode::relative}}, M(pe_mode)));
    f.push_back(integer_field<std::size_t>("memory_len", "model", "Cached rows per layer carried to the next segment.", M(memory_len)));
    f.push_back(integer_field<std::size_t>("segment_len", "model", "Segment length; 0 treats each sentence as one segment.", M(segment_len)));
    f.push_back(bool_field("causal", "model", "Causal self-attention in every layer.", M(causal)));
    f.push_back(real_field("dropout", "model", "Drop probability for embeddings and sublayer outputs.", M(dropout)));
    f.push_back(real_field("attn_dropout", "model", "Drop probability on attention weights.", M(attn_dropout)));
    f.push_back(enum_field<DecodeMode>("decode", "model", "greedy or constrained", "Tag decoding.",
                                       {{"greedy", DecodeMode::greedy}, {"constrained", DecodeMode::constrained}}, M(decode)));
    f.push_back(real_field("lr_init", "train", "Peak learning rate.", T(lr_init)));
    f.push_back(integer_field<std::size_t>("warmup_steps", "train", "Linear warm-up steps; 0 uses 10% of total steps.", T(warmup_steps)));
    f.push_back(integer_field<std::size_t>("epochs", "train", "Fine-tuning epochs.", T(epochs)));
    f.push_back(integer_field<std::size_t>("total_steps", "train", "Schedule length; 0 uses epochs times batches per epoch.", T(total_steps)));
    f.push_back(real_field("alpha", "train", "Weight of the symmetric KL term.", T(alpha)));
    f.push_back(bool_field("kl_half", "train", "Halve the symmetric KL term.", T(kl_half)));
    f.push_back(integer_field<std::size_t>("batch_size", "train", "Sentences per batch before duplication.", T(batch_size)));
    f.push_back(integer_field<std::uint64_t>("seed", "train", "Root seed for every random stream.", T(seed)));
    f.push_back(bool_field("rdrop_enabled", "train", "Two dropout passes and the KL term.", T(rdrop_enabled)));
    f.push_back(bool_field("rdrop_duplicate", "train", "Run both passes as one doubled batch.", T(rdrop_duplicate)));
    f.push_back(real_field("grad_clip_norm", "train", "Global gradient norm bound; 0 disables.", T(grad_clip_norm)));
    f.push_back(real_field("adam_beta1", "train", "Adam first-moment decay.", T(adam_beta1)));
    f.push_back(real_field("adam_beta2", "train", "Adam second-moment decay.", T(adam_beta2)));
    f.push_back(real_field("adam_eps", "train", "Adam denominator epsilon.", T(adam_eps)));
    f.push_back(integer_field<std::size_t>("min_freq", "train", "Minimum token frequency for the vocabulary.", T(min_freq)));
    f.push_back(real_field("dev_ratio", "train", "Share of training sentences held out when no dev file is given.", T(dev_ratio)));
    f.push_back(integer_field<std::size_t>("pretrain_epochs", "train", "Permutation language-model epochs.", T(pretrain_epochs)));
    f.push_back(enum_field<TokenMode>("token_mode", "train", "character or whitespace", "Tokenisation of raw text for predict.",
                                      {{"character", TokenMode::character}, {"whitespace", TokenMode::whitespace}}, T(token_mode)));
    f.push_back(bool_field("checkpoint_f32", "train", "Store checkpoint values as 32-bit floats.", T(checkpoint_f32)));
    return f;
  }();
  return table;
}

#undef M
#undef T

const Field* find_field(std::string_view key) {
  for (const auto& f : fields())
    if (key == f.key) return &f;
  return nullptr;
}

void check_ranges(const RunConfig& c) {
  const auto& t = c.train;
  if (!(t.lr_init > 0)) throw ConfigError("lr_init must be positive");
  if (t.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (t.alpha < 0) throw ConfigError("alpha must be non-negative");
  if (t.grad_clip_norm < 0) throw ConfigError("grad_clip_norm must be non-negative");
  if (!(t.adam_beta1 >= 0 && t.adam_beta1 < 1)) throw ConfigError("adam_beta1 must lie in [0, 1)");
  if (!(t.adam_beta2 >= 0 && t.adam_beta2 < 1)) throw ConfigError("adam_beta2 must lie in [0, 1)");
  if (!(t.adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (t.min_freq == 0) throw ConfigError("min_freq must be at least 1");
  if (!(t.dev_ratio >= 0 && t.dev_ratio < 1)) throw ConfigError("dev_ratio must lie in [0, 1)");
  const auto& m = c.model;
  if (!(m.dropout >= 0 && m.dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(m.attn_dropout >= 0 && m.attn_dropout < 1)) throw ConfigError("attn_dropout must lie in [0, 1)");
  if (m.model_dim == 0 || m.num_heads == 0 || m.model_dim % m.num_heads != 0)
    throw ConfigError("num_heads must divide model_dim");
  if (m.ffn_dim == 0) throw ConfigError("ffn_dim must be at least 1");
  if (m.clip_k < 1) throw ConfigError("clip_k must be at least 1");
  if (m.clip_k_start < 0 || m.clip_k_end < 0) throw ConfigError("clip_k_start and clip_k_end must be non-negative");
  if ((m.clip_k_start == 0) != (m.clip_k_end == 0)) throw ConfigError("clip_k_start and clip_k_end must be set together");
  if (m.pe_mode == PeMode::absolute && m.model_dim % 2 != 0) throw ConfigError("absolute pe_mode needs an even model_dim");
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = [] {
    std::vector<ConfigKey> out;
    const RunConfig defaults;
    for (const auto& f : fields()) out.push_back({f.key, f.section, f.type, f.format(defaults), f.description});
    return out;
  }();
  return schema;
}

void set_value(RunConfig& config, std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown key '" + std::string(key) + "'");
  if (!f->parse(config, value))
    throw ConfigError("key '" + std::string(key) + "' expects " + f->type + ", got '" + std::string(value) + "'");
}

std::string get_value(const RunConfig& config, std::string_view key) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown key '" + std::string(key) + "'");
  return f->format(config);
}

RunConfig parse_run_config(std::string_view text, const std::string& source) {
  RunConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    for (std::size_t i = 0; i < line.size(); ++i)
      if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line = line.substr(0, i);
        break;
      }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = source + ":line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    try {
      set_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  try {
    check_ranges(config);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  set_value(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void apply_overrides(RunConfig& config, std::span<const std::string> assignments) {
  for (const auto& a : assignments) apply_override(config, a);
  check_ranges(config);
}

void validate_run_config(const RunConfig& config) { check_ranges(config); }

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.format(config) + "\n";
  return out;
}

std::string model_config_text(const model::ModelConfig& config) {
  RunConfig c;
  c.model = config;
  std::string out;
  for (const auto& f : fields())
    if (std::string_view(f.section) == "model") out += std::string(f.key) + " = " + f.format(c) + "\n";
  return out;
}

std::string config_reference() {
  std::string out = "# Configuration reference\n\n";
  out += "Run configs are flat `key = value` lines. `#` starts a comment. Unknown keys are errors.\n";
  out += "Any key can be overridden on the command line with `--set key=value`.\n";
  for (const char* section : {"model", "train"}) {
    out += std::string("\n## ") + section + "\n\n| key | type | default | meaning |\n|---|---|---|---|\n";
    for (const auto& k : config_schema())
      if (k.section == section)
        out += "| `" + k.key + "` | " + k.type + " | `" + k.default_value + "` | " + k.description + " |\n";
  }
  return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return to_text(a) == to_text(b); }

}  // namespace ntrr::data
