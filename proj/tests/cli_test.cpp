// Copyright 2026 The scenemotion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the scenemotion binary as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>

#include "oracles.hpp"

namespace sm = scenemotion;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;

  std::string lastLine() const {
    auto end = out.find_last_not_of('\n');
    if (end == std::string::npos) return {};
    auto begin = out.rfind('\n', end);
    return out.substr(begin == std::string::npos ? 0 : begin + 1, end - (begin == std::string::npos ? 0 : begin + 1) + 1);
  }
  json summary() const { return json::parse(lastLine()); }
};

Result run(const std::string& args) {
  const std::string cmd = std::string(SCENEMOTION_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// One tiny corpus shared by the tests that need data.
const fs::path& corpusDir() {
  static const fs::path dir = [] {
    auto d = oracle::scratchDir("cli_corpus");
    run("datagen --preset tiny --seed 3 --out " + d.string());
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Cli, HelpDocumentsEveryFlag) {
  const std::map<std::string, std::vector<std::string>> flags{
      {"datagen", {}},
      {"train-motion", {"--data", "--epochs", "--c1", "--c2", "--rollout", "--batch", "--learning-rate"}},
      {"train-goal", {"--epochs", "--learning-rate", "--objects", "--action"}},
      {"synth", {"--motion", "--goal", "--scene", "--driver", "--latent", "--start", "--object", "--frames"}},
      {"eval", {"--motion", "--driver", "--runs", "--data", "--object", "--action"}},
      {"serve", {"--motion", "--goal", "--scene", "--host", "--port", "--duration"}}};
  for (const auto& [cmd, extra] : flags) {
    const auto r = run(cmd + " --help");
    EXPECT_EQ(r.code, 0) << cmd;
    for (const char* f : {"--config", "--seed", "--preset", "--out"}) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << f;
    for (const auto& f : extra) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
}

TEST(Cli, DatagenWritesTinyCorpus) {
  const auto dir = corpusDir();
  const auto m = sm::readManifest((dir / "manifest.json").string());
  EXPECT_GE(m.clips.size(), 5u);
  EXPECT_EQ(sm::stateDim(m.config), sm::stateDim(sm::StateConfig::tiny()));
  for (const auto& c : m.clips) EXPECT_TRUE(fs::exists(dir / c)) << c;
}

TEST(Cli, SameSeedSameSummary) {
  const auto dir = oracle::scratchDir("cli_repeat");
  const std::string args = "datagen --preset tiny --seed 9 --out " + dir.string();
  const auto a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.lastLine(), b.lastLine());
  EXPECT_GE(a.summary().at("clips").get<int>(), 5);

  const std::string goal = "train-goal --preset tiny --epochs 3 --objects 2 --seed 4 --out " + dir.string();
  const auto g1 = run(goal), g2 = run(goal);
  ASSERT_EQ(g1.code, 0) << g1.out;
  EXPECT_EQ(g1.lastLine(), g2.lastLine());
  EXPECT_TRUE(fs::exists(dir / "goal.json"));
  fs::remove_all(dir);
}

TEST(Cli, TrainMotionFiveEpochs) {
  const auto out = oracle::scratchDir("cli_train");
  const auto r = run("train-motion --preset tiny --epochs 5 --data " + (corpusDir() / "manifest.json").string() +
                     " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = r.summary();
  ASSERT_EQ(j.at("checkpoints").size(), 5u);
  for (const auto& c : j.at("checkpoints")) {
    EXPECT_TRUE(fs::exists(c.get<std::string>() + ".json"));
    EXPECT_TRUE(fs::exists(c.get<std::string>() + ".bin"));
  }
  const auto loss = j.at("epochLoss").get<std::vector<double>>();
  ASSERT_EQ(loss.size(), 5u);
  for (std::size_t i = 1; i < loss.size(); ++i) EXPECT_LE(loss[i], loss[i - 1]) << i;

  // The trained checkpoint drives a headless session.
  const auto s = run("synth --preset tiny --frames 20 --motion " + (out / "motion").string() + " --out " + out.string());
  ASSERT_EQ(s.code, 0) << s.out;
  EXPECT_EQ(s.summary().at("metrics").at("frames"), 20);
  EXPECT_EQ(sm::readClip((out / "synth.clip").string()).size(), 20u);
  fs::remove_all(out);
}

TEST(Cli, ScriptedRolloutHasZeroApd) {
  const auto out = oracle::scratchDir("cli_eval");
  const auto r = run("eval --driver kinematic --runs 3 --frames 900 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto report = r.summary().at("report").at("kinematic");
  EXPECT_EQ(report.at("apd").get<double>(), 0.0);
  EXPECT_EQ(report.at("executedPct").get<double>(), 100.0);
  EXPECT_EQ(report.at("penetrationPct").get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(out / "report.json"));
  EXPECT_TRUE(fs::exists(out / "report.csv"));
  fs::remove_all(out);
}

TEST(Cli, SynthKinematicSessionCompletes) {
  const auto out = oracle::scratchDir("cli_synth");
  const auto r = run("synth --driver kinematic --start 1 4 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto m = r.summary().at("metrics");
  EXPECT_EQ(m.at("status"), "done");
  EXPECT_TRUE(m.at("executionTime").is_number());
  EXPECT_LT(m.at("precisionPosition").get<double>(), 0.05);
  EXPECT_LT(m.at("precisionRotation").get<double>(), 3.0);
  EXPECT_TRUE(fs::exists(out / "synth_metrics.json"));
  fs::remove_all(out);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto dir = oracle::scratchDir("cli_config");
  const auto cfg = dir / "run.json";
  sm::detail::writeAll(cfg.string(), json{{"seed", 5}, {"preset", "tiny"}, {"out", dir.string()}}.dump());
  auto r = run("datagen --config " + cfg.string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.summary().at("seed"), 5);
  EXPECT_EQ(r.summary().at("preset"), "tiny");
  r = run("datagen --config " + cfg.string() + " --seed 7");
  EXPECT_EQ(r.summary().at("seed"), 7);

  sm::detail::writeAll(cfg.string(), json{{"epochz", 5}}.dump());
  r = run("train-motion --config " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.summary().at("ok").get<bool>());
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("datagen --bogus").code, 2);
  EXPECT_EQ(run("datagen --preset huge").code, 2);
  EXPECT_EQ(run("synth --frames 5").code, 2);  // network driver without a model
  EXPECT_EQ(run("synth --driver kinematic --object lamp").code, 2);
  EXPECT_EQ(run("synth --driver kinematic --action walk").code, 2);
  EXPECT_EQ(run("train-motion --preset tiny --epochs 0").code, 2);

  const auto dir = oracle::scratchDir("cli_corrupt");
  sm::detail::writeAll((dir / "manifest.json").string(), std::string("{broken"));
  const auto r = run("train-motion --preset tiny --data " + (dir / "manifest.json").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.summary().at("error"), "CorruptHeader");
  EXPECT_EQ(run("synth --motion " + (dir / "missing").string()).code, 3);
  fs::remove_all(dir);
}

TEST(Cli, ServeAnswersHello) {
  const std::string cmd =
      std::string(SCENEMOTION_CLI) + " serve --driver kinematic --port 0 --duration 3 2>/dev/null";
  FILE* p = ::popen(cmd.c_str(), "r");
  ASSERT_NE(p, nullptr);
  char line[4096];
  ASSERT_NE(std::fgets(line, sizeof line, p), nullptr);
  const auto listening = json::parse(line);
  ASSERT_EQ(listening.at("event"), "listening");
  const int port = listening.at("port");

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  ASSERT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  timeval tv{5, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  const std::string hello = "{\"type\":\"hello\"}\n";
  ASSERT_EQ(::send(fd, hello.data(), hello.size(), MSG_NOSIGNAL), static_cast<ssize_t>(hello.size()));
  std::string buf;
  char chunk[8192];
  while (buf.find('\n') == std::string::npos) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buf.append(chunk, static_cast<std::size_t>(n));
  }
  ::close(fd);
  ASSERT_NE(buf.find('\n'), std::string::npos);
  const auto scene = json::parse(buf.substr(0, buf.find('\n')));
  EXPECT_EQ(scene.at("type"), "scene");
  EXPECT_EQ(scene.at("scene").at("objects").size(), 3u);

  std::string rest;
  while (std::fgets(line, sizeof line, p)) rest = line;
  const int status = ::pclose(p);
  EXPECT_EQ(WEXITSTATUS(status), 0);
  const auto summary = json::parse(rest);
  EXPECT_EQ(summary.at("command"), "serve");
  EXPECT_EQ(summary.at("port"), port);
}
