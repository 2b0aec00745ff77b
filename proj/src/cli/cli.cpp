#include "ntrr/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "ntrr/checkpoint.hpp"
#include "ntrr/data_io.hpp"
#include "ntrr/error.hpp"
#include "ntrr/gradcheck.hpp"
#include "ntrr/kernels.hpp"
#include "ntrr/run_config.hpp"
#include "ntrr/training.hpp"

namespace ntrr::cli {
namespace {

using data::RunConfig;

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void add_to(CLI::App* app) {
    app->add_option("--config", path, "Run config file (key = value lines)");
    app->add_option("--set", overrides, "Override one config key: key=value")->take_all();
  }

  RunConfig load() const {
    RunConfig c = path.empty() ? RunConfig{} : data::load_run_config(path);
    data::apply_overrides(c, overrides);
    return c;
  }
};

tagging::Scheme parse_scheme(const std::string& s) {
  if (s == "bio") return tagging::Scheme::bio;
  if (s == "bmes") return tagging::Scheme::bmes;
  throw ConfigError("unknown tag scheme '" + s + "' (expected bio or bmes)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

void print_prf(const tagging::PrfReport& prf, std::size_t repairs, std::ostream& out) {
  auto row = [&](const std::string& name, const tagging::Score& s) {
    out << std::left << std::setw(10) << name << std::right << std::setw(12) << percent(s.precision)
        << std::setw(12) << percent(s.recall) << std::setw(14) << percent(s.f1) << "   " << s.true_positives << "/"
        << s.predicted << "/" << s.gold << "\n";
  };
  out << std::left << std::setw(10) << "type" << std::right << std::setw(12) << "Precise (%)" << std::setw(12)
      << "Recall (%)" << std::setw(14) << "F1 Score (%)" << "   tp/pred/gold\n";
  row("overall", prf.overall);
  for (const auto& t : prf.per_type) row(t.type, t.score);
  out << "repairs: " << repairs << "\n";
}

tagging::LabelSet union_labels(const data::Corpus& a, const data::Corpus& b) {
  std::set<std::string> types;
  for (const auto& t : a.entity_types()) types.insert(t);
  for (const auto& t : b.entity_types()) types.insert(t);
  return tagging::LabelSet(std::vector<std::string>(types.begin(), types.end()));
}

// Binds the vocabulary size, checking an explicit setting.
void bind_vocab(model::ModelConfig& config, const data::Vocab& vocab) {
  if (config.vocab_size != 0 && config.vocab_size != vocab.size()) {
    throw ConfigError("vocab_size = " + std::to_string(config.vocab_size) + " but the vocabulary has " +
                      std::to_string(vocab.size()) + " entries");
  }
  config.vocab_size = vocab.size();
}

int cmd_convert(const std::string& in, const std::string& out_path, const std::string& from, const std::string& to,
                std::ostream& out) {
  if (to != "bmes") throw ConfigError("only --to bmes is supported");
  const data::Corpus corpus = data::parse_conll(read_file(in), parse_scheme(from), in);
  data::write_conll_file(corpus, out_path);
  out << "sentences: " << corpus.sentences.size() << "\nrepairs: " << corpus.repairs << "\n";
  return kExitOk;
}

int cmd_synth(const std::string& out_path, std::size_t sentences, std::uint64_t seed, std::ostream& out) {
  const data::Corpus corpus = data::synthetic_corpus(sentences, seed);
  data::write_conll_file(corpus, out_path);
  out << "wrote " << corpus.sentences.size() << " sentences to " << out_path << "\n";
  return kExitOk;
}

struct LogSink {
  std::ofstream file;
  std::ostream* stream = nullptr;

  LogSink(const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
      stream = &fallback;
      return;
    }
    file.open(path);
    if (!file) throw IoError("cannot write log '" + path + "'");
    stream = &file;
  }
};

int cmd_pretrain(const ConfigArgs& cfg_args, const std::string& train_path, const std::string& scheme,
                 const std::string& out_path, const std::string& log_path, std::ostream& out) {
  RunConfig rc = cfg_args.load();
  const data::Corpus corpus = data::read_conll(train_path, parse_scheme(scheme));
  const data::Vocab vocab = data::Vocab::build(corpus, rc.train.min_freq);
  rc.model.labels = corpus.label_set();
  bind_vocab(rc.model, vocab);
  rc.model.validate();
  model::ModelParams params = model::ModelParams::init(rc.model, rc.train.seed);
  LogSink log(log_path, out);
  const auto report = training::pretrain(corpus, vocab, rc.model, rc.train, params, log.stream);
  data::save_checkpoint(out_path, params, rc.model, vocab, !rc.train.checkpoint_f32);
  out << "pretrained " << report.steps << " steps; final loss "
      << (report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back()) << "; wrote " << out_path << "\n";
  return kExitOk;
}

int cmd_train(const ConfigArgs& cfg_args, const std::string& train_path, const std::string& dev_path,
              const std::string& scheme_name, const std::string& out_path, const std::string& log_path,
              const std::string& init_path, std::ostream& out) {
  RunConfig rc = cfg_args.load();
  const auto scheme = parse_scheme(scheme_name);
  data::Corpus train_set = data::read_conll(train_path, scheme);
  data::Corpus dev_set;
  if (!dev_path.empty()) {
    dev_set = data::read_conll(dev_path, scheme);
  } else if (rc.train.dev_ratio > 0.0) {
    auto [first, second] = data::split_corpus(train_set, rc.train.dev_ratio, rc.train.seed);
    train_set = std::move(first);
    dev_set = std::move(second);
  }
  std::optional<data::Checkpoint> warm;
  if (!init_path.empty()) warm = data::load_checkpoint(init_path);
  const data::Vocab vocab = warm ? warm->vocab : data::Vocab::build(train_set, rc.train.min_freq);
  rc.model.labels = union_labels(train_set, dev_set);
  bind_vocab(rc.model, vocab);
  rc.model.validate();
  model::ModelParams params = model::ModelParams::init(rc.model, rc.train.seed);
  if (warm) {
    std::map<std::string, Shape> shapes;
    for (const auto& nt : params.named()) shapes.emplace(nt.name, nt.tensor.shape());
    for (const auto& nt : warm->tensors) {
      const auto it = shapes.find(nt.name);
      if (it != shapes.end() && it->second != nt.tensor.shape()) {
        throw ContractError("warm start: '" + nt.name + "' is " + shape_string(nt.tensor.shape()) + " in " +
                            init_path + " but " + shape_string(it->second) + " under this config");
      }
    }
    const std::size_t copied = params.copy_matching(warm->tensors);
    out << "warm start: " << copied << " tensors from " << init_path << "\n";
  }
  LogSink log(log_path, out);
  const auto start = std::chrono::steady_clock::now();
  const auto report = training::train(train_set, dev_set, vocab, rc.model, rc.train, params, log.stream);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  data::save_checkpoint(out_path, report.best_params, rc.model, vocab, !rc.train.checkpoint_f32);
  out << "best epoch " << report.best_epoch << " dev F1 " << percent(report.best_f1) << " after " << report.steps
      << " steps in " << std::fixed << std::setprecision(1) << seconds << " s; wrote " << out_path << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& gold_path,
             const std::string& pred_path, const std::string& scheme_name, std::ostream& out) {
  const auto scheme = parse_scheme(scheme_name);
  if (!gold_path.empty() || !pred_path.empty()) {
    if (gold_path.empty() || pred_path.empty()) throw ConfigError("--gold and --pred must be given together");
    const data::Corpus gold = data::read_conll(gold_path, scheme);
    const data::Corpus pred = data::read_conll(pred_path, scheme);
    if (gold.sentences.size() != pred.sentences.size()) {
      throw ContractError("gold has " + std::to_string(gold.sentences.size()) + " sentences, predictions have " +
                          std::to_string(pred.sentences.size()));
    }
    tagging::PrfAccumulator acc;
    std::size_t repairs = 0;
    for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
      if (gold.sentences[i].tokens.size() != pred.sentences[i].tokens.size()) {
        throw ContractError("sentence " + std::to_string(i + 1) + " differs in length between gold and predictions");
      }
      const auto p = tagging::extract_entities(pred.sentences[i].tags);
      const auto g = tagging::extract_entities(gold.sentences[i].tags);
      acc.add(p.entities, g.entities);
      repairs += p.repairs;
    }
    print_prf(acc.report(), repairs, out);
    return kExitOk;
  }
  if (model_path.empty() || data_path.empty()) throw ConfigError("eval needs --model and --data, or --gold and --pred");
  const data::Checkpoint ck = data::load_checkpoint(model_path);
  const auto params = model::ModelParams::from_named(ck.config, ck.tensors);
  const data::Corpus corpus = data::read_conll(data_path, scheme);
  const auto result = training::evaluate(corpus, ck.vocab, params, ck.config);
  print_prf(result.prf, result.repairs, out);
  return kExitOk;
}

int cmd_predict(const ConfigArgs& cfg_args, const std::string& model_path, const std::string& in_path,
                const std::string& out_path, std::ostream& out) {
  const RunConfig rc = cfg_args.load();
  const data::Checkpoint ck = data::load_checkpoint(model_path);
  const auto params = model::ModelParams::from_named(ck.config, ck.tensors);
  std::istringstream lines(read_file(in_path));
  data::Corpus result;
  std::string line;
  while (std::getline(lines, line)) {
    data::Sentence s;
    s.tokens = data::tokenize(line, rc.train.token_mode);
    if (s.tokens.empty()) continue;
    s.tags = training::predict_tags(s.tokens, ck.vocab, params, ck.config);
    result.sentences.push_back(std::move(s));
  }
  if (out_path.empty()) {
    data::write_conll(result, out);
  } else {
    data::write_conll_file(result, out_path);
  }
  return kExitOk;
}

// Tiny full model for finite-difference checks.
model::ModelConfig tiny_config(attention::PeMode mode) {
  model::ModelConfig c;
  c.vocab_size = 50;
  c.model_dim = 16;
  c.ffn_dim = 32;
  c.xlnet_layers = 2;
  c.transformer_layers = 2;
  c.num_heads = 2;
  c.clip_k = 3;
  c.pe_mode = mode;
  c.segment_len = 4;
  c.memory_len = 4;
  c.dropout = 0.1;
  c.attn_dropout = 0.1;
  c.labels = tagging::LabelSet({"LOC", "PER"});
  return c;
}

// Pools tensors by dropping the last name component (xlnet.0.attn.wq -> xlnet.0.attn).
std::vector<GroupError> pool_groups(const GradCheckReport& report) {
  std::vector<GroupError> out;
  std::map<std::string, std::size_t> index;
  for (const auto& g : report.groups) {
    const auto dot = g.name.rfind('.');
    const std::string key = dot == std::string::npos ? g.name : g.name.substr(0, dot);
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) out.push_back({key, 0, 0.0});
    out[it->second].count += g.count;
    out[it->second].max_rel_error = std::max(out[it->second].max_rel_error, g.max_rel_error);
  }
  return out;
}

int cmd_gradcheck(const std::string& scale, std::uint64_t seed, double tolerance, std::ostream& out) {
  if (scale != "tiny") throw ConfigError("gradcheck supports --scale tiny only");
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  out << "objective\tpe_mode\tgroup\tcount\tmax_rel_error\n";
  for (auto mode : {attention::PeMode::relative, attention::PeMode::absolute}) {
    const model::ModelConfig cfg = tiny_config(mode);
    model::ModelParams params = model::ModelParams::init(cfg, seed);
    Rng data_rng(seed, Rng::stream_id(StreamPurpose::test, 1));
    // A fixed memory from a first segment; the checked segment attends over it.
    std::vector<int> prefix, ids;
    std::vector<int> tags;
    for (std::size_t t = 0; t < cfg.memory_len; ++t) prefix.push_back(2 + static_cast<int>(data_rng.below(cfg.vocab_size - 2)));
    for (std::size_t t = 0; t < 5; ++t) {
      ids.push_back(2 + static_cast<int>(data_rng.below(cfg.vocab_size - 2)));
      tags.push_back(static_cast<int>(data_rng.below(cfg.labels.size())));
    }
    model::ForwardContext eval_ctx;
    const model::SegmentMemory memory = model::forward_ner(prefix, nullptr, cfg, params, eval_ctx).memory;
    const auto branch = [&](int b) {
      Rng rng(seed, Rng::stream_id(StreamPurpose::dropout, 1, static_cast<std::uint64_t>(b), 0));
      model::ForwardContext ctx{&rng, true, 0};
      return model::forward_ner(ids, &memory, cfg, params, ctx).log_probs;
    };
    auto run = [&](const std::string& objective, const std::function<Tensor()>& loss_fn, auto keep) {
      std::vector<NamedTensor> named;
      for (auto& nt : params.named())
        if (keep(nt.name)) named.push_back(nt);
      const auto report = check_gradients(loss_fn, named);
      for (const auto& g : pool_groups(report)) {
        out << objective << '\t' << model::to_string(mode) << '\t' << g.name << '\t' << g.count << '\t'
            << std::scientific << std::setprecision(3) << g.max_rel_error << std::defaultfloat << "\n";
        worst = std::max(worst, g.max_rel_error);
      }
    };
    const auto not_lm = [](const std::string& n) { return n.rfind("lm_", 0) != 0 && n != "query_init"; };
    run("rdrop", [&] { return training::rdrop_loss(branch(1), branch(2), tags, 1.0).total; }, not_lm);

    const auto plan = plm::plan_from_order({2, 0, 3, 1});
    const auto plm_side = [](const std::string& n) {
      return n == "embedding" || n == "query_init" || n.rfind("xlnet", 0) == 0 || n.rfind("lm_", 0) == 0;
    };
    run("plm",
        [&] {
          Rng drop(seed, Rng::stream_id(StreamPurpose::dropout, 1, 0, 0));
          model::ForwardContext ctx{&drop, true, 0};
          return model::pretrain_forward(std::span(ids).first(4), plan, &memory, cfg, params, ctx).loss;
        },
        plm_side);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = worst <= tolerance;
  out << "max relative error " << std::scientific << std::setprecision(3) << worst << " (tolerance " << tolerance
      << ") " << (ok ? "PASS" : "FAIL") << std::defaultfloat << " in " << std::fixed << std::setprecision(1)
      << seconds << " s\n";
  return ok ? kExitOk : kExitRuntime;
}

struct LogSummary {
  std::vector<double> step_totals;
  std::vector<std::vector<std::pair<std::string, std::string>>> epochs;
};

LogSummary parse_log(const std::string& path) {
  std::istringstream in(read_file(path));
  LogSummary s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    for (std::string f; std::getline(ls, f, '\t');) fields.push_back(f);
    if (fields[0] == "epoch") {
      std::vector<std::pair<std::string, std::string>> rec{{"epoch", fields.size() > 1 ? fields[1] : ""}};
      for (std::size_t i = 2; i + 1 < fields.size(); i += 2) rec.emplace_back(fields[i], fields[i + 1]);
      s.epochs.push_back(std::move(rec));
    } else if (fields.size() == 5) {
      try {
        s.step_totals.push_back(std::stod(fields[4]));
      } catch (const std::exception&) {
        throw ParseError(path, line_no, "bad step line");
      }
    }
  }
  return s;
}

int cmd_report(const std::string& log_path, std::ostream& out) {
  const LogSummary s = parse_log(log_path);
  if (s.step_totals.empty() && s.epochs.empty()) throw ParseError(log_path, 0, "no step or epoch lines");
  std::vector<std::string> columns;
  for (const auto& e : s.epochs)
    for (const auto& [k, v] : e)
      if (k != "epoch" && std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
  out << "epochs: " << s.epochs.size() << "  steps: " << s.step_totals.size() << "\n\n";
  if (!s.epochs.empty()) {
    out << std::left << std::setw(8) << "epoch";
    for (const auto& c : columns) out << std::setw(12) << c;
    out << "\n";
    for (const auto& e : s.epochs) {
      out << std::setw(8) << e.front().second;
      for (const auto& c : columns) {
        auto it = std::find_if(e.begin(), e.end(), [&](const auto& kv) { return kv.first == c; });
        out << std::setw(12) << (it == e.end() ? "-" : it->second);
      }
      out << "\n";
    }
    out << std::right;
  }
  if (s.step_totals.size() >= 2) {
    constexpr std::size_t kWidth = 60, kHeight = 12;
    const std::size_t n = s.step_totals.size();
    const std::size_t width = std::min(kWidth, n);
    std::vector<double> cols(width, 0.0);
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t lo = c * n / width, hi = std::max(lo + 1, (c + 1) * n / width);
      for (std::size_t i = lo; i < hi; ++i) cols[c] += s.step_totals[i];
      cols[c] /= static_cast<double>(hi - lo);
    }
    const double top = *std::max_element(cols.begin(), cols.end());
    const double bottom = *std::min_element(cols.begin(), cols.end());
    const double span = top > bottom ? top - bottom : 1.0;
    out << "\nloss (total) over " << n << " steps\n";
    for (std::size_t r = 0; r < kHeight; ++r) {
      const double level = top - span * static_cast<double>(r) / static_cast<double>(kHeight - 1);
      std::ostringstream label;
      label << std::setprecision(4) << level;
      out << std::setw(10) << label.str() << " |";
      for (double v : cols) {
        const auto row = static_cast<std::size_t>(std::lround((top - v) / span * static_cast<double>(kHeight - 1)));
        out << (row == r ? '*' : ' ');
      }
      out << "\n";
    }
    out << std::string(11, ' ') << '+' << std::string(width, '-') << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chinese NER with an XLNet encoder, relative-position Transformer and R-Drop"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ntrr 1.0");

  std::string in, out_path, from = "bio", to = "bmes";
  auto* convert = app.add_subcommand("convert", "Convert a BIO CoNLL file to BMES");
  convert->add_option("--in", in, "Input CoNLL file")->required();
  convert->add_option("--out", out_path, "Output CoNLL file")->required();
  convert->add_option("--from", from, "Source scheme: bio or bmes");
  convert->add_option("--to", to, "Target scheme: bmes");

  std::size_t synth_sentences = 50;
  std::uint64_t synth_seed = 20240611;
  auto* synth = app.add_subcommand("synth", "Write the deterministic synthetic BMES corpus");
  synth->add_option("--out", out_path, "Output CoNLL file")->required();
  synth->add_option("--sentences", synth_sentences, "Number of sentences");
  synth->add_option("--seed", synth_seed, "Generator seed");

  auto* defaults = app.add_subcommand("defaults", "Print the configuration reference with defaults");
  defaults->add_option("--out", out_path, "Write to a file instead of standard output");

  ConfigArgs cfg;
  std::string train_path, dev_path, scheme = "bmes", log_path, init_path;
  auto* pretrain = app.add_subcommand("pretrain", "Permutation language-model pretraining of the encoder");
  cfg.add_to(pretrain);
  pretrain->add_option("--train", train_path, "Training corpus (CoNLL)")->required();
  pretrain->add_option("--scheme", scheme, "Tag scheme of the corpus: bio or bmes");
  pretrain->add_option("--out", out_path, "Checkpoint to write")->required();
  pretrain->add_option("--log", log_path, "Log file (default: standard output)");

  auto* train = app.add_subcommand("train", "Fine-tune the tagger with R-Drop");
  cfg.add_to(train);
  train->add_option("--train", train_path, "Training corpus (CoNLL)")->required();
  train->add_option("--dev", dev_path, "Development corpus (CoNLL)");
  train->add_option("--scheme", scheme, "Tag scheme of the corpora: bio or bmes");
  train->add_option("--out", out_path, "Checkpoint to write (best dev F1)")->required();
  train->add_option("--log", log_path, "Log file (default: standard output)");
  train->add_option("--init", init_path, "Warm start from a pretraining checkpoint");

  std::string model_path, data_path, gold_path, pred_path;
  auto* eval = app.add_subcommand("eval", "Entity-level precision, recall and F1");
  eval->add_option("--model", model_path, "Checkpoint");
  eval->add_option("--data", data_path, "Gold corpus (CoNLL)");
  eval->add_option("--gold", gold_path, "Gold corpus, scored against --pred without a model");
  eval->add_option("--pred", pred_path, "Predicted corpus (CoNLL)");
  eval->add_option("--scheme", scheme, "Tag scheme: bio or bmes");

  auto* predict = app.add_subcommand("predict", "Tag plain text, one sentence per line");
  cfg.add_to(predict);
  predict->add_option("--model", model_path, "Checkpoint")->required();
  predict->add_option("--in", in, "Plain-text input")->required();
  predict->add_option("--out", out_path, "CoNLL output (default: standard output)");

  std::string scale = "tiny";
  std::uint64_t gc_seed = 7;
  double tolerance = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  gradcheck->add_option("--scale", scale, "Model scale: tiny");
  gradcheck->add_option("--seed", gc_seed, "Initialisation seed");
  gradcheck->add_option("--tolerance", tolerance, "Maximum accepted relative error");

  auto* report = app.add_subcommand("report", "Summarise a training log");
  report->add_option("--log", log_path, "Log file written by train or pretrain")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (*convert) return cmd_convert(in, out_path, from, to, out);
    if (*synth) return cmd_synth(out_path, synth_sentences, synth_seed, out);
    if (*defaults) {
      if (out_path.empty()) {
        out << data::config_reference();
      } else {
        std::ofstream f(out_path);
        if (!f) throw IoError("cannot write '" + out_path + "'");
        f << data::config_reference();
      }
      return kExitOk;
    }
    if (*pretrain) return cmd_pretrain(cfg, train_path, scheme, out_path, log_path, out);
    if (*train) return cmd_train(cfg, train_path, dev_path, scheme, out_path, log_path, init_path, out);
    if (*eval) return cmd_eval(model_path, data_path, gold_path, pred_path, scheme, out);
    if (*predict) return cmd_predict(cfg, model_path, in, out_path, out);
    if (*gradcheck) return cmd_gradcheck(scale, gc_seed, tolerance, out);
    if (*report) return cmd_report(log_path, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CorruptionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace ntrr::cli
