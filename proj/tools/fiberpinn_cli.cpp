#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fiberpinn/fiberpinn.h"

namespace {

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  bool print_config = false;
};

int report(fp_status st, const char* what) {
  if (st != FP_OK) std::fprintf(stderr, "fiberpinn %s: %s\n", what, fp_last_error());
  return static_cast<int>(st) == FP_ERR_INTERNAL ? 1 : static_cast<int>(st);
}

int run(const std::string& command, const Options& o) {
  fp_options* opts = nullptr;
  if (fp_options_new(&opts) != FP_OK) return report(FP_ERR_INTERNAL, command.c_str());
  fp_status st = FP_OK;
  for (const auto& s : o.sets) {
    if (st == FP_OK) st = fp_options_set(opts, s.c_str());
  }
  if (st == FP_OK && o.seed) st = fp_options_set_seed(opts, *o.seed);
  if (st == FP_OK && o.out) st = fp_options_set_out(opts, o.out->c_str());
  if (st == FP_OK && o.jobs) st = fp_options_set_jobs(opts, *o.jobs);

  const char* cfg = o.config.empty() ? nullptr : o.config.c_str();
  if (st == FP_OK && o.print_config) {
    size_t needed = 0;
    st = fp_resolve_config(cfg, opts, nullptr, 0, &needed);
    if (st == FP_OK) {
      std::string buf(needed, '\0');
      st = fp_resolve_config(cfg, opts, buf.data(), buf.size(), &needed);
      if (st == FP_OK) std::printf("%s\n", buf.c_str());
    }
  } else if (st == FP_OK) {
    if (command == "generate") st = fp_generate(cfg, opts);
    else if (command == "train") st = fp_train(cfg, opts);
    else if (command == "evaluate") st = fp_evaluate(cfg, opts);
    else st = fp_export(cfg, opts);
  }
  fp_options_free(opts);
  return report(st, command.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fiber orientation and conduction velocity estimation from activation times"};
  app.set_version_flag("--version", fp_version());
  app.require_subcommand(1);

  Options o;
  app.add_option("--config", o.config, "JSON run configuration or run manifest");
  app.add_option("--set", o.sets, "Override a config field: section.key=value (repeatable)");
  app.add_option("--seed", o.seed, "Master training seed (run.seed)");
  app.add_option("--out", o.out, "Output directory (run.out)");
  app.add_option("--jobs", o.jobs, "Parallel training restarts (run.jobs)")->check(CLI::PositiveNumber);
  app.add_flag("--print-config", o.print_config, "Print the resolved configuration and exit");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"generate", "Synthesize ground truth and activation samples"},
      {"train", "Fit the networks and write checkpoint, history and metrics"},
      {"evaluate", "Compute metrics for a checkpoint and export results"},
      {"export", "Write per-vertex fields and sample predictions for a checkpoint"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return run(app.get_subcommands().front()->get_name(), o);
}
