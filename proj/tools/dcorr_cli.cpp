// Command-line front end. Talks to the library only through dcorr.h.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcorr/dcorr.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitConfig = 2;

// Failure carried from a C call to the top-level handler.
struct CallError {
  dcorr_status status;
  std::string message;
};

void check(dcorr_status s) {
  if (s != DCORR_OK) throw CallError{s, dcorr_last_error()};
}

json take_json(char* s) {
  json j = json::parse(s);
  dcorr_string_free(s);
  return j;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomically(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw CallError{DCORR_ERR_DATA, "cannot write " + path.string()};
    out << text;
  }
  fs::rename(tmp, path);
}

struct Common {
  std::optional<uint64_t> seed;
  std::string config;
  std::string out;
};

// One manifest per output directory, rewritten in place when the run ends.
class Manifest {
 public:
  Manifest(std::string command, fs::path dir, const Common& common) : dir_(std::move(dir)) {
    doc_ = {{"command", std::move(command)},
            {"code_version", dcorr_version()},
            {"seed", common.seed ? json(*common.seed) : json(nullptr)},
            {"config", common.config.empty() ? json(nullptr) : json(fs::absolute(common.config).string())},
            {"config_hash", nullptr},
            {"started_at", utc_now()},
            {"status", "running"},
            {"outputs", json::array()}};
  }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void output(const fs::path& p) { doc_["outputs"].push_back(fs::absolute(p).string()); }
  void write() { write_atomically(dir_ / "run_manifest.json", doc_.dump(2) + "\n"); }
  void finish(const std::string& status) {
    doc_["status"] = status;
    doc_["finished_at"] = utc_now();
    write();
  }

 private:
  fs::path dir_;
  json doc_;
};

fs::path dir_of(const std::string& out_file) {
  const auto p = fs::absolute(out_file).parent_path();
  fs::create_directories(p);
  return p;
}

std::string seed_overrides(const Common& c) {
  return c.seed ? json{{"seed", *c.seed}}.dump() : std::string();
}

// RAII owner for model handles.
struct Model {
  dcorr_model* handle = nullptr;
  ~Model() { dcorr_model_free(handle); }
};

struct Flow {
  dcorr_flow* handle = nullptr;
  ~Flow() { dcorr_flow_free(handle); }
};

// --ckpt wins; otherwise an untrained model is built from --config.
void open_model(Model& m, const std::string& ckpt, const Common& c, Manifest& manifest) {
  if (!ckpt.empty()) {
    check(dcorr_model_load(ckpt.c_str(), &m.handle));
    manifest.set("checkpoint", fs::absolute(ckpt).string());
  } else if (!c.config.empty()) {
    const auto overrides = seed_overrides(c);
    check(dcorr_model_from_config(c.config.c_str(), overrides.c_str(), &m.handle));
  } else {
    throw CallError{DCORR_ERR_CONFIGURATION, "either --ckpt or --config is required"};
  }
  char* info = nullptr;
  check(dcorr_model_info(m.handle, &info));
  manifest.set("config_hash", take_json(info)["config_hash"]);
}

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--seed", c.seed, "Random seed (overrides the config)");
  cmd->add_option("--config", c.config, "Pipeline configuration (JSON)");
  auto* out = cmd->add_option("--out", c.out, "Output path");
  if (out_required) out->required();
}

int exit_code_for(dcorr_status s) {
  return s == DCORR_ERR_CONFIGURATION || s == DCORR_ERR_ARGUMENT ? kExitConfig : kExitData;
}

void report_error(const std::string& command, const std::string& kind, const std::string& message, int code) {
  json err = {{"error", {{"command", command}, {"kind", kind}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense visual correspondence: training, inference and evaluation"};
  app.require_subcommand(1);
  int verbosity = 2;
  app.add_option("--log-level", verbosity, "0 debug .. 4 silent")->check(CLI::Range(0, 4));

  Common common;
  std::string resume, ckpt, src, tgt, data, flows, filter, current, goal, flow_file, mode = "overlay";
  bool exclude_occluded = false;
  double threshold = 3.0;
  int64_t spacing = 16;

  auto* train = app.add_subcommand("train", "Train the correspondence encoder");
  add_common(train, common);
  train->get_option("--config")->required();
  train->add_option("--resume", resume, "Checkpoint to resume from");

  auto* infer = app.add_subcommand("infer-flow", "Predict a dense flow field between two images");
  add_common(infer, common);
  infer->add_option("--ckpt", ckpt, "Model checkpoint");
  infer->add_option("--src", src, "Source image")->required();
  infer->add_option("--tgt", tgt, "Target image")->required();

  auto* tap = app.add_subcommand("eval-tapvid", "Point-tracking metrics (AD, delta_avg, AJ)");
  add_common(tap, common);
  tap->add_option("--ckpt", ckpt, "Model checkpoint");
  tap->add_option("--data", data, "Dataset root")->required();
  tap->add_option("--flows", flows, "Directory of precomputed flows instead of a model");
  tap->add_flag("--exclude-occluded", exclude_occluded, "Drop occluded points instead of counting false positives");

  auto* art = app.add_subcommand("eval-articulation", "Revolute-joint estimation errors");
  add_common(art, common);
  art->add_option("--ckpt", ckpt, "Model checkpoint");
  art->add_option("--data", data, "Directory of articulated instances")->required();
  art->add_option("--filter", filter, "File listing the instances to evaluate");

  auto* plan = app.add_subcommand("plan-action", "Goal-conditioned manipulation action");
  add_common(plan, common);
  plan->add_option("--ckpt", ckpt, "Model checkpoint");
  plan->add_option("--current", current, "Current RGB-D observation directory")->required();
  plan->add_option("--goal", goal, "Goal image")->required();
  plan->add_option("--threshold", threshold, "Done threshold in pixels");

  auto* viz = app.add_subcommand("viz", "Correspondence overlay or feature PCA image");
  add_common(viz, common);
  viz->add_option("--mode", mode, "overlay or pca")->check(CLI::IsMember({"overlay", "pca"}));
  viz->add_option("--flow", flow_file, "Flow file (overlay mode)");
  viz->add_option("--ckpt", ckpt, "Model checkpoint (pca mode)");
  viz->add_option("--src", src, "Source image")->required();
  viz->add_option("--tgt", tgt, "Target image")->required();
  viz->add_option("--spacing", spacing, "Match grid spacing in pixels")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << std::flush;
    report_error(argc > 1 ? argv[1] : "", "usage", e.what(), kExitConfig);
    return kExitConfig;
  }
  dcorr_set_log_level(verbosity);

  const std::string command = app.get_subcommands().front()->get_name();
  std::optional<Manifest> manifest;
  try {
    if (command == "train") {
      manifest.emplace(command, fs::absolute(common.out), common);
      const auto overrides = seed_overrides(common);
      char* resolved = nullptr;
      check(dcorr_config_resolve(common.config.c_str(), overrides.c_str(), &resolved));
      const auto cfg = take_json(resolved);
      manifest->set("config_hash", cfg["config_hash"]);
      manifest->set("seed", cfg["config"]["seed"]);
      if (!resume.empty()) manifest->set("resume", fs::absolute(resume).string());
      manifest->write();
      char* summary = nullptr;
      check(dcorr_train(common.config.c_str(), overrides.c_str(), resume.empty() ? nullptr : resume.c_str(),
                        common.out.c_str(), &summary));
      const auto s = take_json(summary);
      for (const auto& p : s["checkpoints"]) manifest->output(p.get<std::string>());
      manifest->output(fs::path(common.out) / "metrics.jsonl");
      manifest->set("summary", s);
      std::cout << s.dump(2) << std::endl;
    } else if (command == "infer-flow") {
      manifest.emplace(command, dir_of(common.out), common);
      Model m;
      open_model(m, ckpt, common, *manifest);
      manifest->write();
      Flow f;
      check(dcorr_infer_flow_files(m.handle, src.c_str(), tgt.c_str(), &f.handle));
      check(dcorr_flow_write(f.handle, common.out.c_str()));
      manifest->output(common.out);
    } else if (command == "eval-tapvid") {
      manifest.emplace(command, dir_of(common.out), common);
      Model m;
      if (flows.empty()) {
        open_model(m, ckpt, common, *manifest);
      } else if (!ckpt.empty()) {
        throw CallError{DCORR_ERR_CONFIGURATION, "--ckpt and --flows are mutually exclusive"};
      } else {
        manifest->set("flows", fs::absolute(flows).string());
      }
      manifest->write();
      char* report = nullptr;
      check(dcorr_eval_tapvid(m.handle, data.c_str(), flows.empty() ? nullptr : flows.c_str(),
                              exclude_occluded ? 1 : 0, &report));
      write_atomically(common.out, take_json(report).dump(2) + "\n");
      manifest->output(common.out);
    } else if (command == "eval-articulation") {
      manifest.emplace(command, dir_of(common.out), common);
      Model m;
      open_model(m, ckpt, common, *manifest);
      manifest->write();
      char* report = nullptr;
      check(dcorr_eval_articulation(m.handle, data.c_str(), filter.empty() ? nullptr : filter.c_str(), &report));
      write_atomically(common.out, take_json(report).dump(2) + "\n");
      manifest->output(common.out);
    } else if (command == "plan-action") {
      manifest.emplace(command, dir_of(common.out), common);
      Model m;
      open_model(m, ckpt, common, *manifest);
      manifest->write();
      char* action = nullptr;
      check(dcorr_plan_action(m.handle, current.c_str(), goal.c_str(), threshold, &action));
      write_atomically(common.out, take_json(action).dump(2) + "\n");
      manifest->output(common.out);
    } else if (command == "viz") {
      manifest.emplace(command, dir_of(common.out), common);
      if (mode == "overlay") {
        if (flow_file.empty()) throw CallError{DCORR_ERR_CONFIGURATION, "viz --mode overlay needs --flow"};
        manifest->write();
        Flow f;
        check(dcorr_flow_read(flow_file.c_str(), &f.handle));
        check(dcorr_viz_overlay(f.handle, src.c_str(), tgt.c_str(), spacing, common.out.c_str()));
      } else {
        Model m;
        open_model(m, ckpt, common, *manifest);
        manifest->write();
        check(dcorr_viz_pca(m.handle, src.c_str(), tgt.c_str(), common.out.c_str()));
      }
      manifest->output(common.out);
    }
    if (manifest) manifest->finish("ok");
    return kExitOk;
  } catch (const CallError& e) {
    const int code = exit_code_for(e.status);
    report_error(command, dcorr_status_string(e.status), e.message, code);
    if (manifest) {
      try {
        manifest->set("error", e.message);
        manifest->finish("failed");
      } catch (...) {
      }
    }
    return code;
  } catch (const std::exception& e) {
    report_error(command, "data error", e.what(), kExitData);
    return kExitData;
  }
}
