// Copyright 2026 The deformfuse Authors
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

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>

#include "deformfuse/commands.hpp"
#include "deformfuse/errors.hpp"
#include "deformfuse/run_config.hpp"

using namespace deformfuse;

namespace {

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value configuration file");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("-s,--set", flags.settings, "override one key, e.g. -s fusion.keep_count=3")->allow_extra_args(false);
}

// Shorthand flag for a configuration key; applied in command-line order with -s.
void alias(CLI::App* cmd, CommonFlags& flags, const std::string& flag, const std::string& key, const std::string& help) {
  cmd->add_option(
      flag,
      [&flags, key](const CLI::results_t& r) {
        flags.settings.push_back(key + "=" + r[0]);
        return true;
      },
      help + " (" + key + ")");
}

RunConfig resolve(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) {
    for (const auto& [k, v] : read_config_file(flags.config_path)) apply_setting(cfg, k, v);
  }
  for (const auto& s : flags.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigFieldError(s, "expected key=value");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out) cfg.out = *flags.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deformfuse: deformable cross-attention LiDAR-camera fusion toolkit"};
  app.require_subcommand(0, 1);
  CommonFlags flags;
  std::string fault;
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "print every configuration key and exit");

  auto* selftest = app.add_subcommand("selftest", "run the invariant suite and print a pass/fail table");
  selftest->add_option("--inject-fault", fault, "corrupt one analytic gradient (offset-grad)")
      ->check(CLI::IsMember({"offset-grad"}));
  auto* pipeline = app.add_subcommand("pipeline", "scene -> voxels -> dropout -> fusion; writes fused.bin and metrics");
  auto* augment = app.add_subcommand("augment", "depth-aware GT paste into a scene");
  auto* bench = app.add_subcommand("bench", "deformable vs dense attention complexity sweep");
  auto* gtdb = app.add_subcommand("gtdb", "build a ground-truth object database from generated scenes");
  for (auto* cmd : {selftest, pipeline, augment, bench, gtdb}) add_common(cmd, flags);
  alias(augment, flags, "--scene", "aug.scene", "input scene directory");
  alias(augment, flags, "--db", "aug.db", "input database directory");
  alias(augment, flags, "--alpha", "aug.alpha", "blend weight kept by the underlying image");
  alias(pipeline, flags, "--keep-count", "fusion.keep_count", "cameras kept by image-level dropout");
  alias(pipeline, flags, "--params", "fusion.params", "DCFA parameter file");
  alias(pipeline, flags, "--augment", "aug.enabled", "paste database objects before voxelizing (true/false)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (list_keys) {
    for (const auto& [k, help] : config_keys()) std::cout << k << "  " << help << '\n';
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    const RunConfig cfg = resolve(flags);
    if (*selftest) return cmd_selftest(cfg, fault, std::cout);
    if (*pipeline) return cmd_pipeline(cfg, std::cout);
    if (*augment) return cmd_augment(cfg, std::cout);
    if (*bench) return cmd_bench(cfg, std::cout);
    return cmd_gtdb(cfg, std::cout);
  } catch (const ConfigFieldError& e) {
    std::cerr << "error: " << nlohmann::json{{"kind", "config"}, {"field", e.field()}, {"message", e.what()}}.dump() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << nlohmann::json{{"kind", "config"}, {"message", e.what()}}.dump() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
