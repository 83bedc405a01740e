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

// scenemotion: data generation, training, synthesis, evaluation and the
// session service from one binary. Every command prints a JSON summary as its
// last stdout line; progress goes to stderr.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "scenemotion/scenemotion.hpp"

namespace sm = scenemotion;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Raised for anything the operator can fix by changing flags or the config.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool isConfigCode(sm::Errc c) {
  switch (c) {
    case sm::Errc::InvalidConfig:
    case sm::Errc::UnknownObject:
    case sm::Errc::UnsupportedAction:
      return true;
    default:
      return false;
  }
}

// Flags land in `flags`, the --config file in `file`; flags win.
class Settings {
 public:
  explicit Settings(CLI::App* cmd) : cmd_(cmd) {
    cmd_->add_option("--config", configPath_, "JSON file with any of this command's settings; flags override it")
        ->check(CLI::ExistingFile);
  }

  template <typename T>
  CLI::Option* add(const std::string& flag, const std::string& key, const std::string& help) {
    keys_.insert(key);
    return cmd_->add_option_function<T>(flag, [this, key](const T& v) { flags_[key] = v; }, help);
  }

  void load() {
    values_ = json::object();
    if (!configPath_.empty()) {
      std::ifstream in(configPath_);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError(configPath_ + ": " + e.what());
      }
      if (!file.is_object()) throw ConfigError(configPath_ + ": expected a JSON object");
      for (auto it = file.begin(); it != file.end(); ++it) {
        if (!keys_.count(it.key())) throw ConfigError(configPath_ + ": unknown setting '" + it.key() + "'");
        values_[it.key()] = it.value();
      }
    }
    for (auto it = flags_.begin(); it != flags_.end(); ++it) values_[it.key()] = it.value();
  }

  bool has(const std::string& key) const { return values_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!values_.contains(key)) return fallback;
    try {
      return values_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("setting '" + key + "' has the wrong type");
    }
  }

 private:
  CLI::App* cmd_;
  std::string configPath_;
  std::set<std::string> keys_;
  json flags_ = json::object();
  json values_ = json::object();
};

// ---------------------------------------------------------------------------
// Shared settings

struct Common {
  std::string preset;
  std::uint64_t seed;
  std::string out;
  bool tiny() const { return preset == "tiny"; }
};

void addCommon(Settings& s) {
  s.add<std::uint64_t>("--seed", "seed", "Random seed (default 1)");
  s.add<std::string>("--preset", "preset", "Network and state size: tiny or full (default full)")
      ->check(CLI::IsMember({"tiny", "full"}));
  s.add<std::string>("--out", "out", "Output directory (default out)");
}

Common common(const Settings& s) {
  Common c{s.get<std::string>("preset", "full"), s.get<std::uint64_t>("seed", 1), s.get<std::string>("out", "out")};
  if (c.preset != "tiny" && c.preset != "full") throw ConfigError("preset must be tiny or full");
  return c;
}

json summaryHead(const std::string& command, const Common& c) {
  return {{"command", command}, {"ok", true}, {"preset", c.preset}, {"seed", c.seed}};
}

sm::StateConfig stateConfig(const Common& c) { return c.tiny() ? sm::StateConfig::tiny() : sm::StateConfig::full(); }

sm::Action parseActionOr(const std::string& name) {
  const auto a = sm::parseAction(name);
  if (!a) throw ConfigError("unknown action '" + name + "'");
  return *a;
}

// Demo room used when no scene file is given.
sm::Scene demoScene() {
  auto chair = sm::objects::chair();
  auto sofa = sm::objects::lsofa();
  sofa.pose = sm::RootTransform::fromYaw(sm::Vec2(4, 0), 0.0);
  auto bed = sm::objects::bed();
  bed.pose = sm::RootTransform::fromYaw(sm::Vec2(-4, 0.5), 0.0);
  return {{chair, sofa, bed}};
}

void addSessionFlags(Settings& s) {
  s.add<std::string>("--motion", "motion", "MotionNet checkpoint prefix (required for the network driver)");
  s.add<std::string>("--goal", "goal", "GoalNet checkpoint prefix; labeled object goals are used without it");
  s.add<std::string>("--scene", "scene", "Scene JSON file (default: built-in demo room)");
  s.add<std::string>("--driver", "driver", "network or kinematic (default network)")
      ->check(CLI::IsMember({"network", "kinematic"}));
  s.add<std::string>("--latent", "latent", "sample or zero (default sample)")->check(CLI::IsMember({"sample", "zero"}));
  s.add<std::vector<double>>("--start", "start", "Character start position x z (default 0 4)")->expected(2);
  s.add<double>("--start-yaw", "startYaw", "Character start heading in radians (default pi)");
}

struct Runtime {
  sm::Scene scene;
  std::optional<sm::MotionNet> motion;
  std::optional<sm::GoalNet> goal;
  sm::SessionOptions options;

  sm::Models models() const { return {motion ? &*motion : nullptr, goal ? &*goal : nullptr}; }
};

Runtime loadRuntime(const Settings& s) {
  Runtime r;
  r.scene = s.has("scene") ? sm::loadScene(s.get<std::string>("scene", "")) : demoScene();
  const std::string driver = s.get<std::string>("driver", "network");
  if (driver != "network" && driver != "kinematic") throw ConfigError("driver must be network or kinematic");
  r.options.driver = driver == "network" ? sm::Driver::Network : sm::Driver::Kinematic;
  const std::string latent = s.get<std::string>("latent", "sample");
  if (latent != "sample" && latent != "zero") throw ConfigError("latent must be sample or zero");
  r.options.latent = latent == "sample" ? sm::LatentMode::Sample : sm::LatentMode::Zero;
  const auto start = s.get<std::vector<double>>("start", {0.0, 4.0});
  if (start.size() != 2) throw ConfigError("start needs two coordinates");
  r.options.start = sm::Vec2(start[0], start[1]);
  r.options.startYaw = s.get<double>("startYaw", std::numbers::pi);
  if (s.has("motion")) r.motion = sm::loadMotionNet(s.get<std::string>("motion", ""));
  if (s.has("goal")) r.goal = sm::loadGoalNet(s.get<std::string>("goal", ""));
  if (r.options.driver == sm::Driver::Network && !r.motion) throw ConfigError("the network driver needs --motion");
  return r;
}

// One headless session with everything the metrics need.
struct Rollout {
  sm::MotionClip clip;
  std::vector<std::vector<sm::Vec3>> joints;
  std::vector<Eigen::VectorXd> actions;
  sm::SessionStatus status = sm::SessionStatus::Navigating;
  sm::Goal goal;
  sm::RootTransform finalRoot;
};

Rollout rollout(const Runtime& rt, const std::string& objectId, sm::Action action, std::uint64_t seed, int maxFrames) {
  auto s = sm::startSession(rt.scene, objectId, action, seed, rt.models(), rt.options);
  Rollout r;
  r.clip.config = s.config;
  r.clip.objectRef = objectId;
  r.clip.goal = s.goal;
  r.goal = s.goal;
  while (static_cast<int>(r.joints.size()) < maxFrames && s.status != sm::SessionStatus::Done &&
         s.status != sm::SessionStatus::Failed) {
    const auto ev = sm::step(s);
    Eigen::Index arg = 0;
    ev.actions.maxCoeff(&arg);
    r.clip.states.push_back(s.state);
    r.clip.roots.push_back(ev.root);
    r.clip.labels.push_back(static_cast<sm::Action>(arg));
    r.joints.push_back(ev.joints);
    r.actions.push_back(ev.actions);
  }
  r.status = s.status;
  r.finalRoot = s.root;
  return r;
}

// Infinity does not exist in JSON.
json finite(double v) { return std::isfinite(v) ? json(v) : json(); }

// ---------------------------------------------------------------------------
// Commands

json runDatagen(const Settings& s) {
  const Common c = common(s);
  const auto mix = c.tiny() ? sm::CorpusSpec::tiny() : sm::CorpusSpec::full();
  const auto corpus = sm::generateCorpus(stateConfig(c), c.seed, mix);
  const auto manifest = sm::writeCorpus(corpus, c.out);
  std::size_t frames = 0;
  for (const auto& clip : corpus.clips) frames += clip.size();
  json j = summaryHead("datagen", c);
  j["manifest"] = (fs::path(c.out) / "manifest.json").string();
  j["clips"] = manifest.clips.size();
  j["frames"] = frames;
  j["objects"] = corpus.scene.objects.size();
  j["stateDim"] = sm::stateDim(manifest.config);
  return j;
}

json runTrainMotion(const Settings& s) {
  const Common c = common(s);
  sm::MotionNetConfig netCfg = c.tiny() ? sm::MotionNetConfig::tiny() : sm::MotionNetConfig::full();
  sm::ScheduleConfig sched;
  sched.epochs = s.get<int>("epochs", c.tiny() ? 10 : sched.epochs);
  if (sched.epochs < 1) throw ConfigError("epochs must be positive");
  sched.rolloutLength = s.get<int>("rollout", c.tiny() ? 30 : sched.rolloutLength);
  sched.batchClips = s.get<int>("batch", c.tiny() ? 8 : sched.batchClips);
  sched.learningRate = s.get<double>("learningRate", c.tiny() ? 1e-3 : sched.learningRate);
  if (sched.epochs == 1) {
    // One epoch cannot hold C1 < C2 <= epochs; it is pure teacher forcing.
    sched.c1 = 1;
    sched.c2 = 2;
  } else {
    // Without explicit switch points the teacher-forcing phases keep their
    // default share of the run.
    const int e = sched.epochs;
    const int c2 = std::clamp(static_cast<int>(std::lround(0.6 * e)), 2, e);
    sched.c2 = s.get<int>("c2", c2);
    sched.c1 = s.get<int>("c1", std::clamp(static_cast<int>(std::lround(0.3 * e)), 1, c2 - 1));
    sched.validate();
  }

  sm::Corpus corpus;
  sm::Normalizer norm;
  if (s.has("data")) {
    sm::DatasetManifest m;
    corpus = sm::readCorpus(s.get<std::string>("data", ""), &m);
    norm = m.stats;
  } else {
    corpus = sm::generateCorpus(netCfg.state, c.seed, sm::CorpusSpec::tiny());
    norm = sm::computeStats(corpus.clips);
  }
  if (corpus.clips.empty()) throw sm::Error(sm::Errc::EmptyDataset, "dataset has no clips");
  if (!(corpus.clips.front().config == netCfg.state)) {
    throw ConfigError("dataset state layout does not match preset '" + c.preset + "'");
  }
  std::vector<sm::TrainingWindow> windows;
  for (const auto& clip : corpus.clips) {
    auto w = sm::makeWindows(clip, corpus.scene, norm, sched.rolloutLength, sched.rolloutLength);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  if (windows.empty()) throw sm::Error(sm::Errc::TooFewFrames, "no clip is as long as one rollout window");

  sm::Rng rng(c.seed);
  sm::MotionNet net = sm::MotionNet::create(netCfg, rng);
  net.normalizer = norm;
  auto opt = sm::motionOptimizer(net, sched);
  fs::create_directories(c.out);

  std::vector<std::size_t> order(windows.size());
  json losses = json::array(), trainLosses = json::array(), checkpoints = json::array();
  const auto batch = static_cast<std::size_t>(sched.batchClips);
  for (int epoch = 1; epoch <= sched.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::vector<sm::TrainingWindow> b;
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) b.push_back(windows[order[i]]);
      for (const auto& t : sm::trainBatch(net, opt, b, epoch, sched, rng)) {
        sum += t.mean();
        ++n;
      }
    }
    // Teacher-forced loss with fixed noise, comparable across epochs.
    const double loss = sm::evaluateWindows(net, windows, sched.beta1, c.seed);
    char name[32];
    std::snprintf(name, sizeof name, "motion_epoch_%03d", epoch);
    const std::string path = (fs::path(c.out) / name).string();
    sm::saveMotionNet(net, path, {{"epoch", epoch}, {"loss", loss}});
    losses.push_back(loss);
    trainLosses.push_back(sum / static_cast<double>(n));
    checkpoints.push_back(path);
    std::cerr << "epoch " << epoch << "/" << sched.epochs << " loss " << loss << "\n";
  }
  const std::string finalPath = (fs::path(c.out) / "motion").string();
  sm::saveMotionNet(net, finalPath, {{"epoch", sched.epochs}});

  json j = summaryHead("train-motion", c);
  j["epochs"] = sched.epochs;
  j["c1"] = sched.c1;
  j["c2"] = sched.c2;
  j["windows"] = windows.size();
  j["epochLoss"] = losses;
  j["trainLoss"] = trainLosses;
  j["checkpoints"] = checkpoints;
  j["checkpoint"] = finalPath;
  return j;
}

json runTrainGoal(const Settings& s) {
  const Common c = common(s);
  sm::GoalNetConfig cfg = c.tiny() ? sm::GoalNetConfig::tiny() : sm::GoalNetConfig::full();
  cfg.epochs = s.get<int>("epochs", cfg.epochs);
  cfg.learningRate = s.get<double>("learningRate", cfg.learningRate);
  if (cfg.epochs < 1) throw ConfigError("epochs must be positive");
  const int perCategory = s.get<int>("objects", c.tiny() ? 24 : 200);
  if (perCategory < 1) throw ConfigError("objects must be positive");
  const sm::Action action = parseActionOr(s.get<std::string>("action", "sit"));
  if (action != sm::Action::Sit && action != sm::Action::LieDown) {
    throw sm::Error(sm::Errc::UnsupportedAction, "goals exist for sit and liedown only");
  }

  sm::Rng objRng(c.seed);
  std::vector<sm::GoalSample> data;
  for (int i = 0; i < perCategory; ++i)
    for (const auto& cat : sm::objects::categories()) {
      const auto obj = sm::objects::randomized(cat, cat, objRng);
      const auto all = sm::goalSamples(obj);
      for (std::size_t k = 0; k < all.size(); ++k)
        if (obj.goals[k].action == action) data.push_back(all[k]);
    }
  sm::Rng rng(c.seed ^ 0x676F616Cull);
  sm::GoalNet net = sm::GoalNet::create(cfg, rng);
  const auto history = sm::trainGoalNet(net, data, cfg.epochs, rng);
  fs::create_directories(c.out);
  const std::string path = (fs::path(c.out) / "goal").string();
  sm::saveGoalNet(net, path, {{"action", std::string(sm::actionName(action))}});

  json j = summaryHead("train-goal", c);
  j["action"] = sm::actionName(action);
  j["samples"] = data.size();
  j["epochs"] = cfg.epochs;
  j["firstLoss"] = history.front();
  j["finalLoss"] = history.back();
  j["checkpoint"] = path;
  return j;
}

struct Target {
  std::string objectId;
  sm::Action action;
  int frames;
};

void addTargetFlags(Settings& s) {
  s.add<std::string>("--object", "object", "Target object id (default chair)");
  s.add<std::string>("--action", "action", "sit or liedown (default sit)");
  s.add<int>("--frames", "frames", "Frame cap per session (default: the 3 minute execution cap)");
}

Target target(const Settings& s, const sm::SessionOptions& o) {
  Target t{s.get<std::string>("object", "chair"), parseActionOr(s.get<std::string>("action", "sit")),
           s.get<int>("frames", static_cast<int>(std::lround(o.capSeconds * 30)))};
  if (t.frames < 1) throw ConfigError("frames must be positive");
  return t;
}

json rolloutMetrics(const Rollout& r, const sm::Scene& scene, sm::Action action) {
  const double fps = r.clip.config.fps;
  const double exec = sm::executionTime(r.actions, action, fps);
  json m = {{"frames", r.joints.size()},
            {"status", sm::statusName(r.status)},
            {"executionTime", finite(exec)},
            {"penetrationPct", sm::penetrationPct(r.joints, scene, r.clip.objectRef)}};
  if (std::isfinite(exec)) {
    const auto p = sm::precision(r.finalRoot, r.goal, exec);
    m["precisionPosition"] = p.position;
    m["precisionRotation"] = p.rotation;
  }
  return m;
}

json runSynth(const Settings& s) {
  const Common c = common(s);
  const Runtime rt = loadRuntime(s);
  const Target t = target(s, rt.options);
  const Rollout r = rollout(rt, t.objectId, t.action, c.seed, t.frames);
  fs::create_directories(c.out);
  const std::string clipPath = (fs::path(c.out) / "synth.clip").string();
  if (!r.clip.states.empty()) sm::writeClip(r.clip, clipPath);
  const json metrics = rolloutMetrics(r, rt.scene, t.action);
  sm::detail::writeAll((fs::path(c.out) / "synth_metrics.json").string(), metrics.dump(2) + "\n");

  json j = summaryHead("synth", c);
  j["object"] = t.objectId;
  j["action"] = sm::actionName(t.action);
  j["clip"] = clipPath;
  j["metrics"] = metrics;
  return j;
}

json runEval(const Settings& s) {
  const Common c = common(s);
  const Runtime rt = loadRuntime(s);
  const Target t = target(s, rt.options);
  const int runs = s.get<int>("runs", 10);
  if (runs < 1) throw ConfigError("runs must be positive");

  std::vector<Eigen::VectorXd> finals, generated;
  double execSum = 0, posSum = 0, rotSum = 0, penSum = 0;
  int executed = 0;
  for (int i = 0; i < runs; ++i) {
    const Rollout r = rollout(rt, t.objectId, t.action, c.seed + static_cast<std::uint64_t>(i), t.frames);
    if (r.clip.states.empty()) continue;
    finals.push_back(sm::poseFeature(r.clip.states.back()));
    for (const auto& st : r.clip.states) generated.push_back(sm::featureSubset(st));
    penSum += sm::penetrationPct(r.joints, rt.scene, t.objectId);
    const double exec = sm::executionTime(r.actions, t.action, r.clip.config.fps);
    if (!std::isfinite(exec)) continue;
    const auto p = sm::precision(r.finalRoot, r.goal, exec);
    execSum += exec;
    posSum += p.position;
    rotSum += p.rotation;
    ++executed;
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::map<std::string, double> metrics{
      {"apd", finals.size() > 1 ? sm::apd(finals) : 0.0},
      {"runs", runs},
      {"executedPct", 100.0 * executed / runs},
      {"executionTime", executed ? execSum / executed : inf},
      {"precisionPosition", executed ? posSum / executed : inf},
      {"precisionRotation", executed ? rotSum / executed : inf},
      {"penetrationPct", penSum / runs}};
  if (s.has("data")) {
    const auto reference = sm::readCorpus(s.get<std::string>("data", ""));
    std::vector<Eigen::VectorXd> real;
    for (const auto& clip : reference.clips)
      for (const auto& st : clip.states) real.push_back(sm::featureSubset(st));
    if (generated.empty() || real.empty() || generated.front().size() != real.front().size()) {
      throw ConfigError("reference data uses a different state layout or is empty");
    }
    metrics["fd"] = sm::frechetDistance(generated, real);
  }
  const std::string name = rt.options.driver == sm::Driver::Network ? "network" : "kinematic";
  const sm::Report report{{name, metrics}};
  fs::create_directories(c.out);
  sm::detail::writeAll((fs::path(c.out) / "report.json").string(), sm::reportToJson(report).dump(2) + "\n");
  sm::detail::writeAll((fs::path(c.out) / "report.csv").string(), sm::reportToCsv(report));

  json j = summaryHead("eval", c);
  j["object"] = t.objectId;
  j["action"] = sm::actionName(t.action);
  j["report"] = sm::reportToJson(report);
  return j;
}

std::atomic<bool> gStop{false};
extern "C" void onSignal(int) { gStop = true; }

json runServe(const Settings& s) {
  const Common c = common(s);
  const Runtime rt = loadRuntime(s);
  const std::string host = s.get<std::string>("host", "127.0.0.1");
  const int port = s.get<int>("port", 7878);
  const double duration = s.get<double>("duration", 0.0);
  if (port < 0 || port > 65535) throw ConfigError("port out of range");

  sm::Models models = rt.models();
  sm::SessionService service(rt.scene, models, rt.options);
  sm::SessionServer server(service);
  const int bound = server.listen(host, port);
  std::cout << json{{"event", "listening"}, {"host", host}, {"port", bound}}.dump() << std::endl;

  std::signal(SIGINT, onSignal);
  std::signal(SIGTERM, onSignal);
  std::thread watcher([&] {
    const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(duration);
    while (!gStop && (duration <= 0 || std::chrono::steady_clock::now() < until))
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  server.serve();
  gStop = true;
  watcher.join();

  json j = summaryHead("serve", c);
  j["host"] = host;
  j["port"] = bound;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-aware stochastic character motion: data, training, synthesis, evaluation, serving."};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    std::unique_ptr<Settings> settings;
    json (*run)(const Settings&);
  };
  std::vector<Command> commands;
  auto add = [&](const char* name, const char* help, json (*run)(const Settings&)) -> Settings& {
    auto* sub = app.add_subcommand(name, help);
    commands.push_back({sub, std::make_unique<Settings>(sub), run});
    addCommon(*commands.back().settings);
    return *commands.back().settings;
  };

  add("datagen", "Generate the synthetic corpus, its scene and normalization statistics", runDatagen);

  auto& tm = add("train-motion", "Train MotionNet with scheduled sampling; one checkpoint per epoch", runTrainMotion);
  tm.add<std::string>("--data", "data", "Dataset manifest (default: generate the tiny corpus from --seed)");
  tm.add<int>("--epochs", "epochs", "Training epochs (default 10 tiny, 100 full)");
  tm.add<int>("--c1", "c1", "Last epoch of pure teacher forcing (default 30% of epochs)");
  tm.add<int>("--c2", "c2", "Last epoch of mixed inputs (default 60% of epochs)");
  tm.add<int>("--rollout", "rollout", "Rollout window length in frames (default 30 tiny, 60 full)");
  tm.add<int>("--batch", "batch", "Windows per optimizer step (default 8 tiny, 32 full)");
  tm.add<double>("--learning-rate", "learningRate", "Initial Adam learning rate (default 1e-3 tiny, 5e-5 full)");

  auto& tg = add("train-goal", "Train GoalNet on randomized furniture instances", runTrainGoal);
  tg.add<int>("--epochs", "epochs", "Training epochs (default from the preset)");
  tg.add<double>("--learning-rate", "learningRate", "Initial Adam learning rate (default 1e-3)");
  tg.add<int>("--objects", "objects", "Randomized instances per category (default 24 tiny, 200 full)");
  tg.add<std::string>("--action", "action", "Goal action to learn: sit or liedown (default sit)");

  auto& sy = add("synth", "Run one session headless and write the clip plus its metrics", runSynth);
  addSessionFlags(sy);
  addTargetFlags(sy);

  auto& ev = add("eval", "Run sessions over consecutive seeds and write an APD/FD/precision/execution/penetration report",
                 runEval);
  addSessionFlags(ev);
  addTargetFlags(ev);
  ev.add<int>("--runs", "runs", "Sessions to run, seeds seed..seed+runs-1 (default 10)");
  ev.add<std::string>("--data", "data", "Reference dataset manifest; enables FD");

  auto& sv = add("serve", "Serve interactive sessions over newline-delimited JSON on TCP", runServe);
  addSessionFlags(sv);
  sv.add<std::string>("--host", "host", "Bind address (default 127.0.0.1)");
  sv.add<int>("--port", "port", "TCP port, 0 picks a free one (default 7878)");
  sv.add<double>("--duration", "duration", "Stop after this many seconds; 0 runs until SIGINT (default 0)");

  std::string name = "scenemotion";
  auto fail = [&](int code, const std::string& error, const std::string& message) {
    std::cerr << "error: " << message << "\n";
    std::cout << json{{"command", name}, {"ok", false}, {"exitCode", code}, {"error", error}, {"message", message}}.dump()
              << std::endl;
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    for (const auto& c : commands)
      if (c.app->parsed()) name = c.app->get_name();
    return fail(kExitConfig, "InvalidConfig", e.what());
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    name = c.app->get_name();
    try {
      c.settings->load();
      std::cout << c.run(*c.settings).dump() << std::endl;
      return kExitOk;
    } catch (const ConfigError& e) {
      return fail(kExitConfig, "InvalidConfig", e.what());
    } catch (const sm::Error& e) {
      return fail(isConfigCode(e.code()) ? kExitConfig : kExitRuntime, std::string(sm::errcName(e.code())), e.what());
    } catch (const std::exception& e) {
      return fail(kExitRuntime, "Runtime", e.what());
    }
  }
  return kExitOk;
}
