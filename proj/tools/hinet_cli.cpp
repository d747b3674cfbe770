#include <exception>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "hinet/error.hpp"
#include "hinet/experiment.hpp"

namespace {

struct Invocation {
  std::string config_path;
  hinet::CommandOptions options;
  // Config keys given on the command line, as raw text.
  std::map<std::string, std::string> overrides;
};

void add_common_options(CLI::App& sub, Invocation& inv, const hinet::Json& defaults) {
  sub.add_option("--config", inv.config_path, "JSON experiment config; flags override its keys");
  sub.add_flag("--force", inv.options.force, "Replace an existing output subdirectory");
  for (const auto& item : defaults.items()) {
    const std::string key = item.key();
    std::string hint = item.value().dump();
    if (item.value().is_array()) hint = "comma separated, default " + hint;
    sub.add_option_function<std::string>(
        "--" + key, [&inv, key](const std::string& text) { inv.overrides[key] = text; }, hint);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network causal effect estimation experiments"};
  app.require_subcommand(1);
  const hinet::Json defaults = hinet::to_json(hinet::ExperimentConfig{});

  Invocation inv;
  auto* generate = app.add_subcommand("generate", "Draw train, validation and test splits");
  auto* train = app.add_subcommand("train", "Tune and train every estimator for every seed");
  auto* evaluate = app.add_subcommand("evaluate", "Score checkpoints on the test split");
  auto* sweep = app.add_subcommand("sweep", "Generate, train and evaluate across one sweep axis");
  auto* report = app.add_subcommand("report", "Summarise evaluation and sweep results");
  for (auto* sub : {generate, train, evaluate, sweep, report}) add_common_options(*sub, inv, defaults);
  evaluate->add_flag("--include-oracle", inv.options.include_oracle,
                     "Also score the noise-free data-generating oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? hinet::kExitOk : hinet::kExitValidation;
  }

  try {
    hinet::Json document = defaults;
    if (!inv.config_path.empty()) {
      const hinet::Json file = hinet::read_json_file(inv.config_path);
      if (!file.is_object()) throw hinet::InvalidParameter(inv.config_path + ": expected a JSON object");
      for (const auto& item : file.items()) {
        if (!document.contains(item.key())) throw hinet::InvalidParameter(item.key() + ": unknown config key");
        document[item.key()] = item.value();
      }
    }
    document = hinet::apply_overrides(std::move(document), inv.overrides);
    const hinet::ExperimentConfig config = hinet::experiment_config_from_json(document);

    if (*generate) return hinet::cmd_generate(config, inv.options);
    if (*train) return hinet::cmd_train(config, inv.options);
    if (*evaluate) return hinet::cmd_evaluate(config, inv.options);
    if (*sweep) return hinet::cmd_sweep(config, inv.options);
    return hinet::cmd_report(config, inv.options);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hinet::kExitValidation;
  }
}
