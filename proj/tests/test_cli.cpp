/*
 * Copyright (C) 2026 The srmc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Drives the srmc executable named by SRMC_CLI.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("SRMC_CLI");
  return p ? p : "";
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    if (cli().empty()) GTEST_SKIP() << "SRMC_CLI not set";
    dir_ = fs::temp_directory_path() / (std::string("srmc_cli_") +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!dir_.empty()) fs::remove_all(dir_);
  }

  // Runs the CLI inside the scratch directory; stdout and stderr go to files.
  int run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" + cli() + "' " + args + " >out.txt 2>err.txt";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  }

  [[nodiscard]] std::string read(const std::string& rel) const {
    std::ifstream f(dir_ / rel, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  }
  [[nodiscard]] bool exists(const std::string& rel) const { return fs::exists(dir_ / rel); }
  void write(const std::string& rel, const std::string& text) const { std::ofstream(dir_ / rel) << text; }

  static std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

  fs::path dir_;
};

const std::string kTiny =
    "train --data shapes32 --count 16 --nf 4 --k 4 --batch 4 --steps 6 --seed 3 --no-wall-clock --log-every 0 "
    "--sample-grid 4";

}  // namespace

TEST_F(CliTest, VerifySuitesPass) {
  EXPECT_EQ(run("verify --suite pythagorean"), 0) << read("out.txt");
  EXPECT_NE(read("out.txt").find("PASS"), std::string::npos);
  EXPECT_EQ(run("verify --suite monotone-kl"), 0) << read("out.txt");
}

TEST_F(CliTest, UsageErrorsExitNonZero) {
  EXPECT_NE(run("train --data shapes32 --out r --no-such-flag 1"), 0);
  EXPECT_NE(run("frobnicate"), 0);
  EXPECT_NE(run(""), 0);
  EXPECT_NE(run("sample --ckpt missing.srmc --grid s.png"), 0);
  EXPECT_NE(read("err.txt").find("missing.srmc"), std::string::npos) << read("err.txt");
  EXPECT_NE(run("train --data no_such_dir --out r"), 0);
  EXPECT_NE(read("err.txt").find("no_such_dir"), std::string::npos) << read("err.txt");
  fs::create_directories(dir_ / "empty");
  EXPECT_NE(run("train --data empty --out r"), 0);
}

TEST_F(CliTest, TrainAndSampleAreByteReproducible) {
  ASSERT_EQ(run(kTiny + " --out a"), 0) << read("err.txt");
  ASSERT_EQ(run(kTiny + " --out b"), 0) << read("err.txt");
  for (const char* f : {"metrics.csv", "final.srmc", "samples.png"}) {
    ASSERT_TRUE(exists(std::string("a/") + f)) << f;
    EXPECT_EQ(read(std::string("a/") + f), read(std::string("b/") + f)) << f;
  }
  EXPECT_EQ(lines(read("a/metrics.csv")), 7u);

  ASSERT_EQ(run("sample --ckpt a/final.srmc --batch 9 --k 4 --seed 5 --grid s1.png"), 0) << read("err.txt");
  ASSERT_EQ(run("sample --ckpt a/final.srmc --batch 9 --k 4 --seed 5 --grid s2.png"), 0);
  ASSERT_EQ(run("sample --ckpt a/final.srmc --batch 9 --k 4 --seed 6 --grid s3.png"), 0);
  EXPECT_EQ(read("s1.png"), read("s2.png"));
  EXPECT_NE(read("s1.png"), read("s3.png"));
  EXPECT_NE(run("sample --ckpt a/final.srmc --batch 7 --k 4 --grid s4.png"), 0);  // not square, no --nrow
}

TEST_F(CliTest, ThreadCountDoesNotChangeResults) {
  ASSERT_EQ(run("--threads 1 " + kTiny + " --out a"), 0) << read("err.txt");
  ASSERT_EQ(run("--threads 3 " + kTiny + " --out b"), 0) << read("err.txt");
  EXPECT_EQ(read("a/final.srmc"), read("b/final.srmc"));
  EXPECT_EQ(read("a/samples.png"), read("b/samples.png"));
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  ASSERT_EQ(run(kTiny + " --out a --checkpoint-every 3"), 0) << read("err.txt");
  ASSERT_TRUE(exists("a/ckpt_3.srmc"));
  ASSERT_EQ(run(kTiny + " --out b --resume a/ckpt_3.srmc"), 0) << read("err.txt");
  EXPECT_EQ(read("a/final.srmc"), read("b/final.srmc"));
  EXPECT_EQ(read("a/ckpt_6.srmc"), read("b/final.srmc"));
  // The resumed file holds rows 3..5, identical to the tail of the full run.
  const std::string full = read("a/metrics.csv"), tail = read("b/metrics.csv");
  const std::string header = full.substr(0, full.find('\n') + 1);
  ASSERT_EQ(tail.substr(0, header.size()), header);
  const std::string rows = tail.substr(header.size());
  EXPECT_EQ(full.substr(full.size() - rows.size()), rows);
  EXPECT_EQ(lines(rows), 3u);
}

TEST_F(CliTest, ConfigFileSitsBetweenFlagsAndDefaults) {
  write("c.cfg", "# tiny run\nsteps = 2\nk=3\nnf = 4\nbatch=2\ncount = 8\nsample-grid = 0\n");
  ASSERT_EQ(run("train --data shapes32 --out a --config c.cfg --no-wall-clock"), 0) << read("err.txt");
  EXPECT_EQ(lines(read("a/metrics.csv")), 3u);
  ASSERT_EQ(run("train --data shapes32 --out b --config c.cfg --steps 1 --no-wall-clock"), 0) << read("err.txt");
  EXPECT_EQ(lines(read("b/metrics.csv")), 2u);
  EXPECT_FALSE(exists("a/samples.png"));

  write("bad.cfg", "stepz = 2\n");
  EXPECT_NE(run("train --data shapes32 --out c --config bad.cfg"), 0);
  EXPECT_NE(read("err.txt").find("stepz"), std::string::npos);
}

TEST_F(CliTest, DivergedRunLeavesCheckpoint) {
  const int rc = run(
      "train --data gauss1d --count 2000 --model poly --degree 2 --precision double --lr 0.5 --step-size 100 "
      "--k 50 --batch 64 --steps 50 --out d --log-every 0");
  EXPECT_EQ(rc, 3) << read("err.txt");
  EXPECT_TRUE(exists("d/diverged.srmc"));
  EXPECT_NE(read("err.txt").find("diverged"), std::string::npos);
  EXPECT_EQ(run("sample --ckpt d/diverged.srmc --precision double --batch 4 --k 0 --tensor t.srmt"), 0) << read("err.txt");
}

TEST_F(CliTest, GeneratorSubcommandsWriteOutputs) {
  ASSERT_EQ(run(kTiny + " --out a"), 0) << read("err.txt");
  ASSERT_EQ(run("interpolate --ckpt a/final.srmc --k 4 --pairs 2 --points 5 --grid i.png --csv i.csv"), 0)
      << read("err.txt");
  EXPECT_TRUE(exists("i.png"));
  EXPECT_EQ(lines(read("i.csv")), 6u);
  ASSERT_EQ(run("reconstruct --ckpt a/final.srmc --data shapes32 --count 2 --k 4 --iters 3 --grid r.png --csv r.csv"), 0)
      << read("err.txt");
  EXPECT_EQ(lines(read("r.csv")), 5u);
  // Held-out examples past the default built-in size.
  ASSERT_EQ(run("reconstruct --ckpt a/final.srmc --data shapes32 --offset 500 --count 2 --k 4 --iters 1"), 0)
      << read("err.txt");
  ASSERT_EQ(run("vary-k --ckpt a/final.srmc --out vk --ks 0,4 --batch 4"), 0) << read("err.txt");
  EXPECT_TRUE(exists("vk/k_0.png"));
  EXPECT_TRUE(exists("vk/k_4.png"));
  const std::string csv = read("vk/vary_k.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,saturation_fraction,mean_grad_norm");
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 4), "0,0,");
}

TEST_F(CliTest, ToyWritesDensities) {
  ASSERT_EQ(run("toy --target gauss1d --steps 20 --samples 2000 --out t"), 0) << read("err.txt");
  EXPECT_TRUE(exists("t/densities.png"));
  const std::string csv = read("t/densities.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,truth,ebm,kde");
  EXPECT_NE(read("out.txt").find("TV(kde, truth)"), std::string::npos);
}
