#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "istf/network.hpp"

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args, const std::string& env = "ISF_LOG=error") {
  std::string cmd = env + " \"" + ISF_BINARY + "\" " + args + " >cli_stdout.txt 2>cli_stderr.txt";
  int rc = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp("cli_stdout.txt");
  r.err = slurp("cli_stderr.txt");
  return r;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

const char* kConfig =
    "# small end-to-end run\n"
    "synth.m = 3\n"
    "synth.months = 20\n"
    "synth.seed = 11\n"
    "data.context_length = 4\n"
    "data.horizon = 2\n"
    "data.train_end = 2016-06\n"
    "net.d_model = 8\n"
    "net.num_heads = 2\n"
    "net.ff_width = 16\n"
    "net.encoder_blocks = 1\n"
    "net.decoder_blocks = 1\n"
    "net.embedding_dim = 3\n"
    "train.epochs = 3\n"
    "train.batch_size = 8\n"
    "train.learning_rate = 0.01\n"
    "backtest.origins = 2016-03,2016-05\n";

struct Setup {
  Setup() {
    write_file("cli.cfg", kConfig);
    run("generate --config cli.cfg --out cli_panel.csv");
  }
};
Setup setup;  // shared panel for the suite

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("generate is byte-deterministic per seed") {
  RunResult r1 = run("generate --config cli.cfg --out cli_a.csv");
  RunResult r2 = run("generate --config cli.cfg --out cli_b.csv");
  CHECK(r1.code == 0);
  CHECK(r2.code == 0);
  CHECK(slurp("cli_a.csv") == slurp("cli_b.csv"));

  RunResult r3 = run("generate --config cli.cfg --seed 99 --out cli_c.csv");
  CHECK(r3.code == 0);
  CHECK(slurp("cli_a.csv") != slurp("cli_c.csv"));
}

TEST_CASE("missing required config key is reported by name") {
  write_file("cli_missing.cfg", "synth.months = 20\n");
  RunResult r = run("generate --config cli_missing.cfg --out cli_x.csv");
  CHECK(r.code == 1);
  CHECK(r.err.find("error:config:") != std::string::npos);
  CHECK(r.err.find("synth.m") != std::string::npos);
}

TEST_CASE("unknown config key is rejected") {
  write_file("cli_unknown.cfg", std::string(kConfig) + "synth.bogus = 1\n");
  RunResult r = run("generate --config cli_unknown.cfg --out cli_x.csv");
  CHECK(r.code == 1);
  CHECK(r.err.find("error:config:") != std::string::npos);
  CHECK(r.err.find("synth.bogus") != std::string::npos);
}

TEST_CASE("train writes a loadable checkpoint plus loss and config traces") {
  RunResult r = run("train --config cli.cfg --data cli_panel.csv --out cli_model.bin");
  CHECK(r.code == 0);
  istf::ModelState st = istf::load_state("cli_model.bin");
  CHECK(st.config.d_model == 8);
  CHECK(st.config.horizon == 2);
  CHECK(st.spec.product_vocab.size() == 3);

  auto loss_lines = lines(slurp("cli_model.bin.loss.csv"));
  REQUIRE(loss_lines.size() == 4);  // header + 3 epochs
  CHECK(loss_lines[0] == "epoch,loss,learning_rate");

  std::string echoed = slurp("cli_model.bin.config.txt");
  CHECK(echoed.find("net.d_model = 8") != std::string::npos);
  CHECK(echoed.find("data.train_end = 2016-06") != std::string::npos);
}

TEST_CASE("--seed override changes the trained model") {
  RunResult r1 = run("train --config cli.cfg --seed 5 --data cli_panel.csv --out cli_m5.bin");
  RunResult r2 = run("train --config cli.cfg --seed 5 --data cli_panel.csv --out cli_m5b.bin");
  RunResult r3 = run("train --config cli.cfg --seed 6 --data cli_panel.csv --out cli_m6.bin");
  CHECK(r1.code == 0);
  CHECK(r2.code == 0);
  CHECK(r3.code == 0);
  CHECK(slurp("cli_m5.bin") == slurp("cli_m5b.bin"));
  CHECK(slurp("cli_m5.bin") != slurp("cli_m6.bin"));
}

TEST_CASE("forecast emits one row per series and step, nonnegative") {
  run("train --config cli.cfg --data cli_panel.csv --out cli_model.bin");
  RunResult r = run("forecast --config cli.cfg --checkpoint cli_model.bin --data cli_panel.csv "
                    "--origin 2016-07 --out cli_fc.csv");
  CHECK(r.code == 0);
  auto rows = lines(slurp("cli_fc.csv"));
  REQUIRE(rows.size() == 1 + 3 * 2);
  CHECK(rows[0] == "series_id,origin,step,target_date,forecast");
  for (size_t i = 1; i < rows.size(); ++i) {
    auto comma = rows[i].rfind(',');
    CHECK(std::stod(rows[i].substr(comma + 1)) >= 0.0);
  }
}

TEST_CASE("forecast against a missing checkpoint is an io error") {
  RunResult r = run("forecast --config cli.cfg --checkpoint cli_nope.bin --data cli_panel.csv "
                    "--origin 2016-07 --out cli_fc.csv");
  CHECK(r.code == 1);
  CHECK(r.err.find("error:io:") != std::string::npos);
}

TEST_CASE("backtest writes per-origin and averaged reports") {
  RunResult r = run("backtest --config cli.cfg --data cli_panel.csv --out cli_bt");
  CHECK(r.code == 0);
  auto o1 = lines(slurp("cli_bt_2016-03.csv"));
  auto o2 = lines(slurp("cli_bt_2016-05.csv"));
  auto avg = lines(slurp("cli_bt_average.csv"));
  REQUIRE(o1.size() > 1);
  REQUIRE(o2.size() > 1);
  REQUIRE(avg.size() > 1);
  CHECK(o1[0] == "origin,bucket,metric,value");
  CHECK(o1[1].rfind("2016-03,", 0) == 0);
  CHECK(avg[1].rfind("average,", 0) == 0);
}

TEST_CASE("attention export rows are probability distributions") {
  run("train --config cli.cfg --data cli_panel.csv --out cli_model.bin");
  RunResult r = run("attention --config cli.cfg --checkpoint cli_model.bin --data cli_panel.csv "
                    "--origin 2016-07 --out cli_attn.csv");
  CHECK(r.code == 0);
  auto rows = lines(slurp("cli_attn.csv"));
  REQUIRE(rows.size() == 4);  // header + 3 series
  for (size_t i = 1; i < rows.size(); ++i) {
    std::stringstream ss(rows[i]);
    std::string cell;
    std::getline(ss, cell, ',');  // series_id
    double sum = 0.0;
    int n = 0;
    while (std::getline(ss, cell, ',')) {
      sum += std::stod(cell);
      ++n;
    }
    CHECK(n == 3);
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("missing --out is a config error") {
  RunResult r = run("generate --config cli.cfg");
  CHECK(r.code == 1);
  CHECK(r.err.find("error:config:") != std::string::npos);
  CHECK(r.err.find("--out") != std::string::npos);
}

TEST_CASE("invalid ISF_LOG value is rejected") {
  RunResult r = run("generate --config cli.cfg --out cli_x.csv", "ISF_LOG=chatty");
  CHECK(r.code == 1);
  CHECK(r.err.find("error:config:") != std::string::npos);
  CHECK(r.err.find("ISF_LOG") != std::string::npos);
}

TEST_CASE("info logging reports progress on stderr") {
  RunResult r = run("generate --config cli.cfg --out cli_x.csv", "ISF_LOG=info");
  CHECK(r.code == 0);
  CHECK(r.err.find("generated panel: 3 series x 20 months") != std::string::npos);
}
