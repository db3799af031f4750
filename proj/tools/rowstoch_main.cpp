#include <CLI11.hpp>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "rowstoch/rowstoch.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset;
  rowstoch::ConfigOverrides ov;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool with_algorithm = true) {
  cmd->add_option("--config", flags.config_path, "experiment config JSON file");
  cmd->add_option("--preset", flags.preset,
                  "built-in config: paper-logistic (default) or quad5");
  cmd->add_option("--alpha", flags.ov.alpha, "constant step size");
  cmd->add_option("--seed", flags.ov.seed, "seed echoed into outputs");
  cmd->add_option("--max-iters", flags.ov.max_iters, "iteration budget");
  cmd->add_option("--record-every", flags.ov.record_every, "trace sampling stride");
  cmd->add_option("--out", flags.ov.out, "output directory");
  if (with_algorithm) {
    cmd->add_option("--algorithm", flags.ov.algorithm,
                    "proposed | centralized_gd | subgradient_push");
    cmd->add_option("--push-sum-step", flags.ov.push_sum_step,
                    "step constant a for the diminishing a/sqrt(k) schedule");
    cmd->add_option("--target-rel-residual", flags.ov.target_rel_residual,
                    "stop once residual2 <= target * initial residual2");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed first-order optimization over digraphs with "
               "row-stochastic weights"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "run one algorithm, write a trace");
  add_common_flags(run_cmd, run_flags);

  CommonFlags sweep_flags;
  std::vector<std::string> sweep_algorithms{"proposed"};
  std::vector<double> sweep_alphas;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "run several (algorithm, alpha) series");
  add_common_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--algorithms", sweep_algorithms,
                        "algorithms to sweep (comma separated)")
      ->delimiter(',');
  sweep_cmd->add_option("--alphas", sweep_alphas,
                        "step sizes to sweep (comma separated)")
      ->delimiter(',')
      ->required();

  CommonFlags verify_flags;
  double perturb_weights = 0.0;
  long verify_run_iters = 300;
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "check every analytical invariant");
  add_common_flags(verify_cmd, verify_flags);
  verify_cmd->add_option("--perturb-weights", perturb_weights,
                         "fault injection: scale all weights by (1 + delta)");
  verify_cmd->add_option("--run-iters", verify_run_iters,
                         "length of the instrumented run used by the checks");

  CommonFlags spectral_flags;
  CLI::App* spectral_cmd =
      app.add_subcommand("spectral", "dump the network constants as JSON");
  add_common_flags(spectral_cmd, spectral_flags);

  std::vector<std::string> plot_traces;
  std::string plot_out = "plot.svg";
  std::string plot_title = "residual vs iteration";
  CLI::App* plot_cmd = app.add_subcommand("plot", "render trace CSVs as an SVG");
  plot_cmd->add_option("traces", plot_traces, "trace CSV files")->required();
  plot_cmd->add_option("--out", plot_out, "output SVG path");
  plot_cmd->add_option("--title", plot_title, "chart title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return rowstoch::cmd_run(
          rowstoch::resolve_config(run_flags.config_path, run_flags.preset,
                                   run_flags.ov));
    }
    if (sweep_cmd->parsed()) {
      return rowstoch::cmd_sweep(
          rowstoch::resolve_config(sweep_flags.config_path, sweep_flags.preset,
                                   sweep_flags.ov),
          sweep_algorithms, sweep_alphas);
    }
    if (verify_cmd->parsed()) {
      rowstoch::VerifyOptions opts;
      opts.run_iters = verify_run_iters;
      return rowstoch::cmd_verify(
          rowstoch::resolve_config(verify_flags.config_path, verify_flags.preset,
                                   verify_flags.ov),
          perturb_weights, opts);
    }
    if (spectral_cmd->parsed()) {
      return rowstoch::cmd_spectral(rowstoch::resolve_config(
          spectral_flags.config_path, spectral_flags.preset, spectral_flags.ov));
    }
    if (plot_cmd->parsed()) {
      return rowstoch::cmd_plot(plot_traces, plot_out, plot_title);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
