#include <CLI11.hpp>

#include <iostream>

#include "pointvig/cli/commands.hpp"

using namespace pointvig;

int main(int argc, char** argv) {
  CLI::App app{"PointViG point-cloud graph network toolkit"};
  app.require_subcommand(1);
  std::string config, manifest;
  std::vector<std::string> sets;
  bool quiet = false;
  for (const auto& name : cli::kCommands) {
    auto* sub = app.add_subcommand(name);
    auto* cfg = sub->add_option("--config,-c", config, "key = value run configuration");
    auto* man = sub->add_option("--from-manifest", manifest, "rerun from the config echo of a manifest.json");
    cfg->excludes(man);
    sub->add_option("--set,-s", sets, "key=value override, repeatable");
    sub->add_flag("--quiet,-q", quiet, "suppress progress lines");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    require(!config.empty() || !manifest.empty(), ErrorKind::validation, "one of --config or --from-manifest is required");
    io::KvDoc doc = config.empty() ? io::manifest_config(manifest) : io::load_kv(config);
    cli::apply_overrides(doc, sets);
    const auto base = std::filesystem::absolute(config.empty() ? manifest : config).parent_path();
    const auto log = [&](const std::string& s) {
      if (!quiet) std::cerr << s << '\n';
    };
    const auto r = cli::run_command(cmd, doc, base, log);
    std::cout << r.output_dir << "/manifest.json\n";
  } catch (const Error& e) {
    std::cerr << "pointvig " << cmd << ": " << e.what() << '\n';
    return cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "pointvig " << cmd << ": internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
