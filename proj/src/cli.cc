// Copyright 2026 The steinest Authors.
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

#include "steinest/cli.h"

#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "steinest/diffusion.h"
#include "steinest/experiment.h"
#include "steinest/kernel.h"
#include "steinest/model.h"

namespace steinest {
namespace {

struct CommonFlags {
  std::string out;
  std::optional<std::uint64_t> seed;
  bool timing = false;
};

void AddCommonFlags(CLI::App* cmd, CommonFlags* f) {
  cmd->add_option("--out", f->out, "Output directory");
  cmd->add_option("--seed", f->seed, "Override the configured seed");
  cmd->add_flag("--timing", f->timing, "Record wall-clock columns (otherwise written as 0)");
}

ExperimentConfig LoadWithFlags(const std::string& path, const CommonFlags& f) {
  ExperimentConfig cfg = LoadExperimentConfig(path);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output = f.out;
  if (f.timing) cfg.timing = true;
  return cfg;
}

void PrintList(std::ostream& out) {
  const auto section = [&](const char* title, const std::vector<std::string>& ids) {
    out << title << ":";
    for (const std::string& id : ids) out << ' ' << id;
    out << '\n';
  };
  section("models", BuiltinModelIds());
  section("kernels", BuiltinKernelIds());
  section("diffusions", BuiltinDiffusionIds());
  section("estimators", {"sm", "dsm", "ksd", "dksd", "nnsm", "nnksd"});
  section("presets", PresetIds());
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parameter estimation with diffusion Stein discrepancies"};
  app.require_subcommand(1);

  std::string config_path;
  CommonFlags flags;
  auto* estimate = app.add_subcommand("estimate", "Fit every replication of an experiment");
  auto* scan = app.add_subcommand("scan", "Loss over a grid of one parameter");
  auto* influence = app.add_subcommand("influence", "Influence curve at the fitted parameter");
  auto* clt = app.add_subcommand("clt", "Replication covariance against the sandwich");
  for (CLI::App* cmd : {estimate, scan, influence, clt}) {
    cmd->add_option("config", config_path, "Experiment file (JSON)")->required();
    AddCommonFlags(cmd, &flags);
  }
  std::string preset_name;
  int preset_reps = 0;
  auto* preset = app.add_subcommand("preset", "Run a bundled experiment");
  preset->add_option("name", preset_name, "Preset id")->required();
  preset->add_option("--reps", preset_reps, "Override the replication count");
  AddCommonFlags(preset, &flags);
  auto* list = app.add_subcommand("list", "Print available ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (list->parsed()) {
      PrintList(out);
    } else if (preset->parsed()) {
      PresetOptions opt;
      opt.out_dir = flags.out.empty() ? "out" : flags.out;
      opt.seed = flags.seed.value_or(0);
      opt.timing = flags.timing;
      opt.replications = preset_reps;
      const Json summary = RunPreset(preset_name, opt);
      out << summary.dump(2) << '\n';
    } else if (estimate->parsed()) {
      const ExperimentConfig cfg = LoadWithFlags(config_path, flags);
      const RunResult r = RunExperiment(cfg);
      WriteTextFile(cfg.output, "reps.csv", RepsCsv(r));
      const Json summary = RunSummaryJson(cfg, r);
      WriteTextFile(cfg.output, "summary.json", summary.dump(2) + "\n");
      out << "wrote " << cfg.output << "/reps.csv (" << r.ok_count << " of " << r.reps.size()
          << " replications succeeded)\n";
    } else if (scan->parsed()) {
      const ExperimentConfig cfg = LoadWithFlags(config_path, flags);
      const std::string name = "scan_" + cfg.estimator + ".csv";
      WriteTextFile(cfg.output, name, GridCsv(ScanExperiment(cfg)));
      out << "wrote " << cfg.output << "/" << name << '\n';
    } else if (influence->parsed()) {
      const ExperimentConfig cfg = LoadWithFlags(config_path, flags);
      WriteTextFile(cfg.output, "influence.csv", InfluenceCsv(InfluenceExperiment(cfg)));
      out << "wrote " << cfg.output << "/influence.csv\n";
    } else if (clt->parsed()) {
      const ExperimentConfig cfg = LoadWithFlags(config_path, flags);
      const CltResult r = CltStudy(cfg);
      WriteTextFile(cfg.output, "clt.csv", CltCsv(r));
      WriteTextFile(cfg.output, "summary.json", CltSummaryJson(r).dump(2) + "\n");
      out << "wrote " << cfg.output << "/clt.csv\n";
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace steinest
