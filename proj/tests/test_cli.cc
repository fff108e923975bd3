// tests/test_cli.cc

// Copyright 2026  The densenet-am authors

// See ../COPYING for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "densenet/archive.h"
#include "densenet/features.h"
#include "densenet/wav.h"
#include "doctest.h"
#include "test_util.h"

using namespace densenet;
using densenet::testing::TempDir;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

// Runs the CLI with stdout and stderr captured to a file.
Run Cli(const std::string& args, const TempDir& dir) {
  const std::string log = dir.file("cli_output.txt");
  const std::string cmd = std::string(DENSENET_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<float> Tone(double hz, int samples) {
  std::vector<float> w(samples);
  for (int i = 0; i < samples; ++i) w[i] = static_cast<float>(8000 * std::sin(6.283185307 * hz * i / 16000));
  return w;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("inspect prints the table and exits 0") {
    TempDir dir("cli_inspect");
    const auto r = Cli("inspect", dir);
    CHECK(r.status == 0);
    CHECK(r.out.find("9x38") != std::string::npos);
    const auto m = Cli("inspect --machine --set depth=13", dir);
    CHECK(m.status == 0);
    CHECK(m.out.starts_with("#stage"));
    CHECK(m.out.find("\ntotal\t") != std::string::npos);
  }

  TEST_CASE("invalid configuration exits 2 naming the key") {
    TempDir dir("cli_badcfg");
    const auto r = Cli("inspect --set depth=4", dir);
    CHECK(r.status == 2);
    CHECK(r.out.find("depth") != std::string::npos);
    CHECK(Cli("inspect --set nonsense=1", dir).status == 2);
    CHECK(Cli("inspect --bogus-flag", dir).status == 2);
  }

  TEST_CASE("featurize keeps manifest order and is reproducible") {
    TempDir dir("cli_featurize");
    std::ofstream(dir.file("m.txt")) << "u3 c.wav\nu1 a.wav\nu2 b.wav\n";
    WriteWav(dir.file("a.wav"), Tone(300, 4000), 16000);
    WriteWav(dir.file("b.wav"), Tone(900, 6000), 16000);
    WriteWav(dir.file("c.wav"), Tone(2000, 5000), 16000);
    const std::string args = "featurize --set manifest=" + dir.file("m.txt") +
                             " --set archive=" + dir.file("out.fbk") + " --set stats=" +
                             dir.file("out.cmvn");
    REQUIRE(Cli(args, dir).status == 0);
    const auto archive = ReadArchive(dir.file("out.fbk"));
    REQUIRE(archive.utterances.size() == 3);
    CHECK(archive.utterances[0].id == "u3");
    CHECK(archive.utterances[1].id == "u1");
    CHECK(archive.utterances[2].id == "u2");
    CHECK(archive.utterances[1].frames.shape() == Shape{1 + (4000 - 400) / 160, 3, 40});
    CHECK(ReadCmvnStats(dir.file("out.cmvn")).frames ==
          static_cast<std::uint64_t>(archive.utterances[0].num_frames() +
                                     archive.utterances[1].num_frames() +
                                     archive.utterances[2].num_frames()));
    const std::string first = Slurp(dir.file("out.fbk"));
    REQUIRE(Cli(args, dir).status == 0);
    CHECK(Slurp(dir.file("out.fbk")) == first);
  }

  TEST_CASE("featurize names the manifest line of a missing file") {
    TempDir dir("cli_missing");
    std::ofstream(dir.file("m.txt")) << "u1 a.wav\nu2 nothere.wav\n";
    WriteWav(dir.file("a.wav"), Tone(300, 4000), 16000);
    const auto r = Cli("featurize --set manifest=" + dir.file("m.txt") + " --set archive=" +
                           dir.file("o.fbk") + " --set stats=" + dir.file("o.cmvn"),
                       dir);
    CHECK(r.status == 3);
    CHECK(r.out.find("line 2") != std::string::npos);
    CHECK(r.out.find("u2") != std::string::npos);
  }

  TEST_CASE("synthdata, train, eval") {
    TempDir dir("cli_train");
    const std::string model = " --set depth=13 --set batch_size=16";
    REQUIRE(Cli("synthdata --seed 3 --set archive=" + dir.file("train.fbk"), dir).status == 0);
    REQUIRE(Cli("synthdata --seed 4 --set archive=" + dir.file("valid.fbk"), dir).status == 0);
    const auto t = Cli("train --deterministic --seed 3" + model + " --set max_epochs=15" +
                           " --set train_archive=" + dir.file("train.fbk") +
                           " --set valid_archive=" + dir.file("valid.fbk") +
                           " --set checkpoint=" + dir.file("m.ckpt") + " --set metrics_log=" +
                           dir.file("metrics.log"),
                       dir);
    INFO(t.out);
    REQUIRE(t.status == 0);
    const std::string log = Slurp(dir.file("metrics.log"));
    CHECK(log.starts_with("epoch=1 lr=0.01"));
    const auto e = Cli("eval --set checkpoint=" + dir.file("m.ckpt") + " --set eval_archive=" +
                           dir.file("train.fbk"),
                       dir);
    INFO(e.out);
    REQUIRE(e.status == 0);
    const auto pos = e.out.find("frame_accuracy");
    REQUIRE(pos != std::string::npos);
    const double acc = std::stod(e.out.substr(e.out.find_first_of("0123456789", pos)));
    CHECK(acc > 0.99);

    const auto wrong = Cli("eval --set num_classes=5 --set checkpoint=" + dir.file("m.ckpt") +
                               " --set eval_archive=" + dir.file("train.fbk"),
                           dir);
    CHECK(wrong.status == 5);
  }

  TEST_CASE("eval with a missing checkpoint is an input error") {
    TempDir dir("cli_nockpt");
    CHECK(Cli("eval --set checkpoint=" + dir.file("none.ckpt") + " --set eval_archive=" +
                  dir.file("none.fbk"),
              dir)
              .status == 3);
  }

  TEST_CASE("gradcheck passes") {
    TempDir dir("cli_gradcheck");
    const auto r = Cli("gradcheck --instances 3", dir);
    INFO(r.out);
    CHECK(r.status == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
  }
}
