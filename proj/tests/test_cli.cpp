#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ntrr/cli.hpp"
#include "ntrr/data_io.hpp"

namespace fs = std::filesystem;
using ntrr::cli::run_cli;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "ntrr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ntrr_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

const std::string kSmall =
    "--set model_dim=16 --set ffn_dim=32 --set xlnet_layers=1 --set transformer_layers=1 --set num_heads=2";

std::vector<std::string> split(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("convert bio to bmes") {
  TempDir d("convert");
  write(d / "in.bio", "中 B-LOC\n国 I-LOC\n人 O\n\n张 B-PER\n");
  const auto r = run({"convert", "--in", d / "in.bio", "--out", d / "out.bmes", "--from", "bio", "--to", "bmes"});
  CHECK(r.code == 0);
  CHECK(slurp(d.path / "out.bmes") == "中 B-LOC\n国 E-LOC\n人 O\n\n张 S-PER\n");
  CHECK(r.out.find("repairs") != std::string::npos);

  const auto same = run({"convert", "--in", d / "out.bmes", "--out", d / "again.bmes", "--from", "bmes"});
  CHECK(same.code == 0);
  CHECK(slurp(d.path / "again.bmes") == slurp(d.path / "out.bmes"));
}

TEST_CASE("convert reports the line of a malformed tag") {
  TempDir d("badtag");
  std::string text;
  for (int i = 1; i < 17; ++i) text += "字 O\n";
  text += "字 Q-PER\n";
  write(d / "in.bio", text);
  const auto r = run({"convert", "--in", d / "in.bio", "--out", d / "out.bmes", "--from", "bio"});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 17") != std::string::npos);
}

TEST_CASE("input errors exit with code 2") {
  TempDir d("errors");
  CHECK(run({"convert", "--in", d / "missing", "--out", d / "x"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"train", "--train", d / "missing", "--out", d / "m"}).code == 2);
  const auto bad = run({"defaults", "--set", "lr_init=banana"});
  CHECK(bad.code == 2);
  write(d / "c.conf", "lr_init = banana\n");
  ntrr::data::write_conll_file(ntrr::data::synthetic_corpus(4, 1), d / "t.bmes");
  const auto r = run({"train", "--config", d / "c.conf", "--train", d / "t.bmes", "--out", d / "m"});
  CHECK(r.code == 2);
  CHECK(r.err.find("lr_init") != std::string::npos);
  write(d / "junk.ckpt", "definitely not a checkpoint");
  const auto junk = run({"eval", "--model", d / "junk.ckpt", "--data", d / "t.bmes"});
  CHECK(junk.code == 2);
  CHECK(junk.err.find("not a checkpoint") != std::string::npos);
  CHECK(run({"gradcheck", "--scale", "huge"}).code == 2);
}

TEST_CASE("defaults prints the reference") {
  const auto r = run({"defaults"});
  CHECK(r.code == 0);
  CHECK(r.out.find("`lr_init`") != std::string::npos);
}

TEST_CASE("eval of gold against itself is perfect") {
  TempDir d("evalgold");
  ntrr::data::write_conll_file(ntrr::data::synthetic_corpus(10, 2), d / "g.bmes");
  const auto r = run({"eval", "--gold", d / "g.bmes", "--pred", d / "g.bmes"});
  CHECK(r.code == 0);
  CHECK(r.out.find("Precise (%)  Recall (%)  F1 Score (%)") != std::string::npos);
  CHECK(r.out.find("100.00") != std::string::npos);
  CHECK(r.out.find("repairs: 0") != std::string::npos);
}

TEST_CASE("train, predict and eval agree and are deterministic") {
  TempDir d("pipeline");
  const auto corpus = ntrr::data::synthetic_corpus(12, 3);
  ntrr::data::write_conll_file(corpus, d / "t.bmes");
  std::string raw;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) raw += t;
    raw += "\n";
  }
  write(d / "raw.txt", raw);

  const auto train_args = cat({"train", "--train", d / "t.bmes", "--set", "epochs=4"}, split(kSmall));
  const auto t1 = run(cat(train_args, {"--out", d / "m1.ckpt", "--log", d / "l1.log"}));
  REQUIRE(t1.code == 0);
  const auto t2 = run(cat(train_args, {"--out", d / "m2.ckpt", "--log", d / "l2.log"}));
  REQUIRE(t2.code == 0);
  CHECK(slurp(d.path / "m1.ckpt") == slurp(d.path / "m2.ckpt"));
  CHECK(slurp(d.path / "l1.log") == slurp(d.path / "l2.log"));

  const auto p = run({"predict", "--model", d / "m1.ckpt", "--in", d / "raw.txt", "--out", d / "pred.bmes"});
  REQUIRE(p.code == 0);
  const auto via_files = run({"eval", "--gold", d / "t.bmes", "--pred", d / "pred.bmes"});
  const auto in_process = run({"eval", "--model", d / "m1.ckpt", "--data", d / "t.bmes"});
  REQUIRE(via_files.code == 0);
  REQUIRE(in_process.code == 0);
  // Same table, except the repair line may differ: files hold decoded tags.
  auto table = [](const std::string& s) { return s.substr(0, s.find("repairs:")); };
  CHECK(table(via_files.out) == table(in_process.out));

  const auto rep = run({"report", "--log", d / "l1.log"});
  CHECK(rep.code == 0);
  CHECK(rep.out.find("epoch") != std::string::npos);
  CHECK(rep.out.find("f1") != std::string::npos);
}

TEST_CASE("pretraining warm-starts training") {
  TempDir d("pretrain");
  ntrr::data::write_conll_file(ntrr::data::synthetic_corpus(8, 4), d / "t.bmes");
  const auto pre =
      run(cat({"pretrain", "--train", d / "t.bmes", "--set", "pretrain_epochs=2", "--out", d / "enc.ckpt", "--log",
               d / "pre.log"},
              split(kSmall)));
  REQUIRE(pre.code == 0);
  const auto tr = run(cat({"train", "--train", d / "t.bmes", "--set", "epochs=2", "--init", d / "enc.ckpt", "--out",
                           d / "m.ckpt", "--log", d / "t.log"},
                          split(kSmall)));
  CHECK(tr.code == 0);
  // A shape mismatch between the warm-start file and the config is an input error.
  const auto bad = run({"train", "--train", d / "t.bmes", "--set", "epochs=1", "--set", "model_dim=8", "--set",
                        "num_heads=2", "--init", d / "enc.ckpt", "--out", d / "m2.ckpt", "--log", d / "t2.log"});
  CHECK(bad.code != 0);
}
