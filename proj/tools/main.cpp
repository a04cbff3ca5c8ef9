// Command-line driver: fetch / prepare / train / eval / diagnose.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbg/error.hpp"
#include "sbg/fetch.hpp"
#include "sbg/pipeline.hpp"

namespace {

struct ConfigArgs {
  std::string config_file;
  std::map<std::string, std::string> values;  // per-key option storage
  std::map<std::string, bool> flags;          // per-key boolean storage
};

void add_config_options(CLI::App* cmd, ConfigArgs* args) {
  cmd->add_option("--config", args->config_file, "key=value config file");
  for (const auto& key : sbg::config_key_list()) {
    std::string flag = "--" + key.name;
    for (char& c : flag)
      if (c == '_') c = '-';
    if (key.boolean) {
      args->flags[key.name] = false;
      cmd->add_flag(flag, args->flags[key.name], "set " + key.name + "=true");
    } else {
      args->values[key.name] = "";
      cmd->add_option(flag, args->values[key.name], "override " + key.name)
          ->type_name("VALUE");
    }
  }
}

sbg::RunConfig build_config(const CLI::App* cmd, const ConfigArgs& args) {
  std::vector<std::string> overrides;
  for (const auto& [key, value] : args.values) {
    std::string flag = "--" + key;
    for (char& c : flag)
      if (c == '_') c = '-';
    if (cmd->count(flag) > 0) overrides.push_back(key + "=" + value);
  }
  for (const auto& [key, set] : args.flags)
    if (set) overrides.push_back(key + "=true");

  std::optional<std::filesystem::path> file;
  if (!args.config_file.empty()) file = args.config_file;
  return sbg::load_run_config(file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"personalized product search over a successive behavior graph"};
  app.require_subcommand(1);

  // fetch
  auto* fetch_cmd = app.add_subcommand("fetch", "download + convert raw data");
  std::string dataset, url, meta_url, sha256, fetch_out = "data";
  fetch_cmd->add_option("--dataset", dataset, "dataset shortcut (magazine)");
  fetch_cmd->add_option("--url", url, "review file URL");
  fetch_cmd->add_option("--meta-url", meta_url, "product metadata URL");
  fetch_cmd->add_option("--sha256", sha256, "expected review-file checksum");
  fetch_cmd->add_option("--out", fetch_out, "output directory");

  auto* prepare_cmd = app.add_subcommand("prepare", "build corpus + graph");
  auto* train_cmd = app.add_subcommand("train", "train embeddings");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* diagnose_cmd =
      app.add_subcommand("diagnose", "diversity + spectral diagnostics");

  ConfigArgs prepare_args, train_args, eval_args, diagnose_args;
  add_config_options(prepare_cmd, &prepare_args);
  add_config_options(train_cmd, &train_args);
  add_config_options(eval_cmd, &eval_args);
  add_config_options(diagnose_cmd, &diagnose_args);

  std::string checkpoint;
  bool force = false;
  eval_cmd->add_option("--checkpoint", checkpoint,
                       "checkpoint directory (default <run_dir>/checkpoint)");
  eval_cmd->add_flag("--force", force, "evaluate despite fingerprint mismatch");

  try {
    app.parse(argc, argv);

    if (fetch_cmd->parsed()) {
      std::optional<std::string> expected;
      if (!sha256.empty()) expected = sha256;
      auto out = sbg::cmd_fetch(dataset, url, meta_url, expected, fetch_out);
      std::cout << out.string() << "\n";
    } else if (prepare_cmd->parsed()) {
      sbg::cmd_prepare(build_config(prepare_cmd, prepare_args));
    } else if (train_cmd->parsed()) {
      sbg::cmd_train(build_config(train_cmd, train_args));
    } else if (eval_cmd->parsed()) {
      sbg::RunConfig config = build_config(eval_cmd, eval_args);
      std::filesystem::path ckpt = checkpoint.empty()
                                       ? sbg::resolve_run_dir(config) / "checkpoint"
                                       : std::filesystem::path(checkpoint);
      sbg::cmd_eval(config, ckpt, force);
    } else if (diagnose_cmd->parsed()) {
      sbg::cmd_diagnose(build_config(diagnose_cmd, diagnose_args));
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const sbg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: E_INTERNAL: " << e.what() << "\n";
    return 1;
  }
}
