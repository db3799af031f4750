#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "rowstoch/algorithms.hpp"
#include "rowstoch/analysis.hpp"
#include "rowstoch/digraph.hpp"
#include "rowstoch/errors.hpp"
#include "rowstoch/objectives.hpp"
#include "rowstoch/plot.hpp"
#include "rowstoch/spectral.hpp"
#include "rowstoch/trace_io.hpp"
#include "rowstoch/verify.hpp"

namespace rowstoch {

struct GraphGenSpec {
  int n = 10;
  double extra_edge_prob = 0.15;
  std::uint64_t seed = 1;
};

struct LogisticGenSpec {
  int n = 10;
  int m = 10;
  int p = 3;
  double beta = 1.0;
  std::uint64_t seed = 42;
  double flip_prob = 0.1;
};

struct QuadraticGenSpec {
  int n = 5;
  int p = 1;
  std::uint64_t seed = 5;
  double curv_lo = 1.0, curv_hi = 4.0;
  double shift_lo = -2.0, shift_hi = 2.0;
};

/// A fully described experiment: where the graph and objectives come from,
/// which algorithm runs, and with what step size and horizon. Exactly one
/// graph source and one objective source must be set. alpha = NaN means
/// "half the certified upper bound, resolved once the instance is built".
struct ExperimentConfig {
  std::string graph_file;
  std::optional<GraphGenSpec> graph_gen = GraphGenSpec{};
  std::string objective_manifest;
  std::optional<LogisticGenSpec> logistic = LogisticGenSpec{};
  std::optional<QuadraticGenSpec> quadratic;
  std::string algorithm = "proposed";
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double push_sum_step = 1.0;
  long max_iters = 1000;
  long record_every = 1;
  std::uint64_t seed = 42;
  double target_rel_residual = 0.0;
  std::string out = "out";
};

inline void validate_config(const ExperimentConfig& cfg) {
  const int graph_sources = (cfg.graph_file.empty() ? 0 : 1) + (cfg.graph_gen ? 1 : 0);
  if (graph_sources != 1) {
    throw BadIndex("config: exactly one graph source must be given");
  }
  const int obj_sources = (cfg.objective_manifest.empty() ? 0 : 1) +
                          (cfg.logistic ? 1 : 0) + (cfg.quadratic ? 1 : 0);
  if (obj_sources != 1) {
    throw BadIndex("config: exactly one objective source must be given");
  }
  if (cfg.algorithm != "proposed" && cfg.algorithm != "centralized_gd" &&
      cfg.algorithm != "subgradient_push") {
    throw BadIndex("config: unknown algorithm '" + cfg.algorithm + "'");
  }
  if (!std::isnan(cfg.alpha) && !(cfg.alpha > 0.0)) {
    throw StepSizeOutOfRange("config: alpha must be positive");
  }
  if (!(cfg.push_sum_step > 0.0)) {
    throw StepSizeOutOfRange("config: push_sum_step must be positive");
  }
  if (cfg.max_iters < 1) throw BadIndex("config: max_iters must be at least 1");
  if (cfg.record_every < 1) throw BadIndex("config: record_every must be at least 1");
  if (cfg.target_rel_residual < 0.0) {
    throw BadIndex("config: target_rel_residual must be nonnegative");
  }
}

// ---------------------------------------------------------------------------
// config JSON

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  if (!cfg.graph_file.empty()) {
    j["graph"] = {{"file", cfg.graph_file}};
  } else if (cfg.graph_gen) {
    j["graph"] = {{"generator",
                   {{"n", cfg.graph_gen->n},
                    {"extra_edge_prob", cfg.graph_gen->extra_edge_prob},
                    {"seed", cfg.graph_gen->seed}}}};
  }
  if (!cfg.objective_manifest.empty()) {
    j["objective"] = {{"manifest", cfg.objective_manifest}};
  } else if (cfg.logistic) {
    j["objective"] = {{"logistic",
                       {{"n", cfg.logistic->n},
                        {"m", cfg.logistic->m},
                        {"p", cfg.logistic->p},
                        {"beta", cfg.logistic->beta},
                        {"seed", cfg.logistic->seed},
                        {"flip_prob", cfg.logistic->flip_prob}}}};
  } else if (cfg.quadratic) {
    j["objective"] = {{"quadratic",
                       {{"n", cfg.quadratic->n},
                        {"p", cfg.quadratic->p},
                        {"seed", cfg.quadratic->seed},
                        {"curv_lo", cfg.quadratic->curv_lo},
                        {"curv_hi", cfg.quadratic->curv_hi},
                        {"shift_lo", cfg.quadratic->shift_lo},
                        {"shift_hi", cfg.quadratic->shift_hi}}}};
  }
  j["algorithm"] = cfg.algorithm;
  if (std::isnan(cfg.alpha)) {
    j["alpha"] = nullptr;
  } else {
    j["alpha"] = cfg.alpha;
  }
  j["push_sum_step"] = cfg.push_sum_step;
  j["max_iters"] = cfg.max_iters;
  j["record_every"] = cfg.record_every;
  j["seed"] = cfg.seed;
  j["target_rel_residual"] = cfg.target_rel_residual;
  j["out"] = cfg.out;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.graph_gen.reset();
  cfg.logistic.reset();
  if (!j.is_object()) throw BadIndex("config: top level must be a JSON object");
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    if (g.contains("file")) cfg.graph_file = g.at("file").get<std::string>();
    if (g.contains("generator")) {
      const auto& gg = g.at("generator");
      GraphGenSpec spec;
      spec.n = gg.at("n").get<int>();
      spec.extra_edge_prob = gg.value("extra_edge_prob", spec.extra_edge_prob);
      spec.seed = gg.value("seed", spec.seed);
      cfg.graph_gen = spec;
    }
  }
  if (j.contains("objective")) {
    const auto& o = j.at("objective");
    if (o.contains("manifest")) {
      cfg.objective_manifest = o.at("manifest").get<std::string>();
    }
    if (o.contains("logistic")) {
      const auto& lg = o.at("logistic");
      LogisticGenSpec spec;
      spec.n = lg.at("n").get<int>();
      spec.m = lg.at("m").get<int>();
      spec.p = lg.at("p").get<int>();
      spec.beta = lg.value("beta", spec.beta);
      spec.seed = lg.value("seed", spec.seed);
      spec.flip_prob = lg.value("flip_prob", spec.flip_prob);
      cfg.logistic = spec;
    }
    if (o.contains("quadratic")) {
      const auto& q = o.at("quadratic");
      QuadraticGenSpec spec;
      spec.n = q.at("n").get<int>();
      spec.p = q.value("p", spec.p);
      spec.seed = q.value("seed", spec.seed);
      spec.curv_lo = q.value("curv_lo", spec.curv_lo);
      spec.curv_hi = q.value("curv_hi", spec.curv_hi);
      spec.shift_lo = q.value("shift_lo", spec.shift_lo);
      spec.shift_hi = q.value("shift_hi", spec.shift_hi);
      cfg.quadratic = spec;
    }
  }
  cfg.algorithm = j.value("algorithm", cfg.algorithm);
  if (j.contains("alpha") && !j.at("alpha").is_null()) {
    cfg.alpha = j.at("alpha").get<double>();
  }
  cfg.push_sum_step = j.value("push_sum_step", cfg.push_sum_step);
  cfg.max_iters = j.value("max_iters", cfg.max_iters);
  cfg.record_every = j.value("record_every", cfg.record_every);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.target_rel_residual = j.value("target_rel_residual", cfg.target_rel_residual);
  cfg.out = j.value("out", cfg.out);
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadIndex("config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

/// Named built-in configurations. "paper-logistic" is the default experiment:
/// ten agents on a random strongly connected digraph, each holding ten
/// three-feature logistic-regression examples, step size 0.008.
/// "quad5" is a small five-agent scalar quadratic instance whose step size
/// defaults to half the certified upper bound.
inline ExperimentConfig preset_config(const std::string& name) {
  if (name == "paper-logistic") {
    ExperimentConfig cfg;
    cfg.graph_gen = GraphGenSpec{10, 0.15, 1};
    cfg.logistic = LogisticGenSpec{10, 10, 3, 1.0, 42, 0.1};
    cfg.quadratic.reset();
    cfg.algorithm = "proposed";
    cfg.alpha = 0.008;
    cfg.max_iters = 50000;
    cfg.record_every = 1;
    cfg.seed = 42;
    return cfg;
  }
  if (name == "quad5") {
    ExperimentConfig cfg;
    cfg.graph_gen = GraphGenSpec{5, 0.3, 2};
    cfg.logistic.reset();
    cfg.quadratic = QuadraticGenSpec{};
    cfg.algorithm = "proposed";
    cfg.alpha = std::numeric_limits<double>::quiet_NaN();  // half the certified bound
    cfg.max_iters = 200;
    cfg.record_every = 1;
    cfg.seed = 42;
    return cfg;
  }
  throw BadIndex("unknown preset '" + name + "' (available: paper-logistic, quad5)");
}

/// CLI flags that override whatever the preset or config file specified.
struct ConfigOverrides {
  std::optional<std::string> algorithm;
  std::optional<double> alpha;
  std::optional<double> push_sum_step;
  std::optional<long> max_iters;
  std::optional<long> record_every;
  std::optional<std::uint64_t> seed;
  std::optional<double> target_rel_residual;
  std::optional<std::string> out;
};

inline ExperimentConfig resolve_config(const std::string& config_path,
                                       const std::string& preset,
                                       const ConfigOverrides& ov) {
  if (!config_path.empty() && !preset.empty()) {
    throw BadIndex("give either --config or --preset, not both");
  }
  ExperimentConfig cfg = !config_path.empty() ? load_config_file(config_path)
                         : preset_config(preset.empty() ? "paper-logistic" : preset);
  if (ov.algorithm) cfg.algorithm = *ov.algorithm;
  if (ov.alpha) cfg.alpha = *ov.alpha;
  if (ov.push_sum_step) cfg.push_sum_step = *ov.push_sum_step;
  if (ov.max_iters) cfg.max_iters = *ov.max_iters;
  if (ov.record_every) cfg.record_every = *ov.record_every;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.target_rel_residual) cfg.target_rel_residual = *ov.target_rel_residual;
  if (ov.out) cfg.out = *ov.out;
  validate_config(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// instance construction

inline DirectedGraph build_graph_from_config(const ExperimentConfig& cfg) {
  if (!cfg.graph_file.empty()) return load_graph_file(cfg.graph_file);
  const GraphGenSpec& g = *cfg.graph_gen;
  return random_strongly_connected(g.n, g.extra_edge_prob, g.seed);
}

inline ObjectiveSuite build_suite_from_config(const ExperimentConfig& cfg) {
  if (!cfg.objective_manifest.empty()) {
    return logistic_suite(load_logistic_data(cfg.objective_manifest));
  }
  if (cfg.logistic) {
    const LogisticGenSpec& s = *cfg.logistic;
    return logistic_suite(
        make_logistic_data(s.n, s.m, s.p, s.beta, s.seed, s.flip_prob));
  }
  const QuadraticGenSpec& q = *cfg.quadratic;
  Rng rng(q.seed);
  std::vector<MatrixXd> Qs;
  std::vector<VectorXd> rs;
  for (int i = 0; i < q.n; ++i) {
    VectorXd curv(q.p), shift(q.p);
    for (int d = 0; d < q.p; ++d) curv[d] = rng.uniform(q.curv_lo, q.curv_hi);
    for (int d = 0; d < q.p; ++d) shift[d] = rng.uniform(q.shift_lo, q.shift_hi);
    Qs.push_back(MatrixXd(curv.asDiagonal()));
    rs.push_back(shift);
  }
  return quadratic_suite(Qs, rs);
}

/// Everything needed to run or verify one experiment, built once and shared
/// read-only by every series that uses it.
struct ExperimentInstance {
  DirectedGraph graph;
  WeightMatrix A;  // row stochastic
  WeightMatrix B;  // column stochastic
  ObjectiveSuite suite;
  BoundConstants constants;
  GlobalConstants globals;
  VectorXd x_star;
  double alpha_bar = 0.0;
  double alpha = 0.0;  // resolved step size
};

inline ExperimentInstance make_instance(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ExperimentInstance inst;
  inst.graph = build_graph_from_config(cfg);
  inst.A = row_stochastic_weights(inst.graph);
  inst.B = column_stochastic_weights(inst.graph);
  inst.suite = build_suite_from_config(cfg);
  if (inst.suite.n != inst.graph.n) {
    throw ShapeMismatch("config: objective has " + std::to_string(inst.suite.n) +
                        " agents but the graph has " + std::to_string(inst.graph.n));
  }
  inst.constants = network_constants(inst.A);
  inst.globals = global_constants(inst.suite);
  inst.x_star = inst.suite.closed_form_optimum ? *inst.suite.closed_form_optimum
                                               : global_optimum(inst.suite);
  inst.alpha_bar = alpha_upper_bound(inst.constants, inst.suite.n, inst.globals.l,
                                     inst.globals.s);
  inst.alpha = std::isnan(cfg.alpha) ? 0.5 * inst.alpha_bar : cfg.alpha;
  return inst;
}

inline ConvergenceTrace run_configured(const ExperimentInstance& inst,
                                       const ExperimentConfig& cfg,
                                       const std::string& algorithm, double alpha) {
  RunConfig rc;
  rc.alpha = alpha;
  rc.max_iters = cfg.max_iters;
  rc.record_every = cfg.record_every;
  rc.seed = cfg.seed;
  rc.target_rel_residual = cfg.target_rel_residual;
  if (algorithm == "proposed") {
    return run(rc, inst.A, inst.suite, inst.x_star, inst.constants);
  }
  if (algorithm == "centralized_gd") {
    return run_centralized_gd(rc, inst.suite, inst.x_star);
  }
  if (algorithm == "subgradient_push") {
    return run_subgradient_push(rc, inst.B, inst.suite, inst.x_star, inst.constants,
                                alpha);
  }
  throw BadIndex("unknown algorithm '" + algorithm + "'");
}

// ---------------------------------------------------------------------------
// subcommands

inline int cmd_run(const ExperimentConfig& cfg) {
  const ExperimentInstance inst = make_instance(cfg);
  const double step = cfg.algorithm == "subgradient_push" ? cfg.push_sum_step
                                                          : inst.alpha;
  const ConvergenceTrace trace = run_configured(inst, cfg, cfg.algorithm, step);
  const std::filesystem::path out(cfg.out);
  write_file_atomic(out / "trace.csv", emit_trace_csv(trace));
  nlohmann::json summary = summary_to_json(trace);
  summary["config"] = config_to_json(cfg);
  summary["alpha_bar"] = inst.alpha_bar;
  write_file_atomic(out / "summary.json", summary.dump(2) + "\n");
  std::printf("%s: %ld iterations, residual %.6g -> %.6g\n", cfg.algorithm.c_str(),
              trace.final_iter, trace.records.front().residual2,
              trace.final_residual2);
  std::printf("wrote %s and %s\n", (out / "trace.csv").c_str(),
              (out / "summary.json").c_str());
  return 0;
}

struct SweepSeries {
  std::string algorithm;
  double alpha = 0.0;
};

struct SweepSeriesResult {
  SweepSeries series;
  std::string label;
  bool ok = false;
  std::string error;
  ConvergenceTrace trace;
};

inline std::string series_label(const SweepSeries& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s@%g", s.algorithm.c_str(), s.alpha);
  return buf;
}

inline long sweep_thread_cap() {
  if (const char* env = std::getenv("ROWSTOCH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<long>(hc);
}

inline std::vector<SweepSeriesResult> run_sweep(const ExperimentInstance& inst,
                                                const ExperimentConfig& cfg,
                                                const std::vector<SweepSeries>& series_list) {
  std::vector<SweepSeriesResult> results(series_list.size());
  std::atomic<std::size_t> next{0};
  const long nthreads =
      std::min<long>(sweep_thread_cap(), static_cast<long>(series_list.size()));
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= series_list.size()) return;
      SweepSeriesResult& r = results[i];
      r.series = series_list[i];
      r.label = series_label(series_list[i]);
      try {
        r.trace = run_configured(inst, cfg, series_list[i].algorithm, series_list[i].alpha);
        r.ok = true;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (long t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

inline std::string sweep_comparison_csv(const std::vector<SweepSeriesResult>& results) {
  std::set<long> ks;
  std::vector<std::map<long, double>> lookup;
  std::vector<const SweepSeriesResult*> ok;
  for (const auto& r : results) {
    if (!r.ok) continue;
    ok.push_back(&r);
    std::map<long, double> m;
    for (const auto& rec : r.trace.records) {
      ks.insert(rec.k);
      m[rec.k] = rec.residual2;
    }
    lookup.push_back(std::move(m));
  }
  std::string csv = "# rowstoch-sweep v1\nk";
  for (const auto* r : ok) csv += "," + r->label;
  csv += "\n";
  for (long k : ks) {
    csv += std::to_string(k);
    for (std::size_t i = 0; i < ok.size(); ++i) {
      csv += ",";
      const auto it = lookup[i].find(k);
      if (it != lookup[i].end()) csv += detail::format_double(it->second);
    }
    csv += "\n";
  }
  return csv;
}

inline int cmd_sweep(const ExperimentConfig& cfg,
                     const std::vector<std::string>& algorithms,
                     const std::vector<double>& alphas) {
  if (algorithms.empty()) throw BadIndex("sweep: at least one algorithm required");
  if (alphas.empty()) throw BadIndex("sweep: at least one alpha required");
  for (const auto& a : algorithms) {
    if (a != "proposed" && a != "centralized_gd" && a != "subgradient_push") {
      throw BadIndex("sweep: unknown algorithm '" + a + "'");
    }
  }
  const ExperimentInstance inst = make_instance(cfg);
  std::vector<SweepSeries> series;
  for (const auto& a : algorithms) {
    for (double al : alphas) series.push_back({a, al});
  }
  const auto results = run_sweep(inst, cfg, series);

  const std::filesystem::path out(cfg.out);
  nlohmann::json jseries = nlohmann::json::array();
  std::vector<ConvergenceTrace> ok_traces;
  std::vector<std::string> ok_labels;
  int failed = 0;
  for (const auto& r : results) {
    nlohmann::json js;
    js["label"] = r.label;
    js["algorithm"] = r.series.algorithm;
    js["alpha"] = r.series.alpha;
    if (r.ok) {
      write_file_atomic(out / (r.label + ".trace.csv"), emit_trace_csv(r.trace));
      write_file_atomic(out / (r.label + ".summary.json"),
                        summary_to_json(r.trace).dump(2) + "\n");
      js["status"] = "ok";
      js["final_iter"] = r.trace.final_iter;
      js["final_residual2"] = r.trace.final_residual2;
      try {
        js["rate"] = rate_to_json(fit_linear_rate(r.trace));
      } catch (const Error&) {
        js["rate"] = nullptr;
      }
      ok_traces.push_back(r.trace);
      ok_labels.push_back(r.label);
    } else {
      ++failed;
      js["status"] = "error";
      js["error"] = r.error;
    }
    jseries.push_back(js);
  }
  write_file_atomic(out / "sweep.csv", sweep_comparison_csv(results));
  nlohmann::json jsummary;
  jsummary["series"] = jseries;
  jsummary["failed"] = failed;
  jsummary["alpha_bar"] = inst.alpha_bar;
  write_file_atomic(out / "sweep_summary.json", jsummary.dump(2) + "\n");
  if (!ok_traces.empty()) {
    write_file_atomic(out / "sweep.svg",
                      render_convergence_svg(ok_traces, ok_labels));
  }
  for (const auto& r : results) {
    if (r.ok) {
      std::printf("%-28s final residual %.6g\n", r.label.c_str(),
                  r.trace.final_residual2);
    } else {
      std::printf("%-28s FAILED: %s\n", r.label.c_str(), r.error.c_str());
    }
  }
  std::printf("wrote %s\n", (out / "sweep.csv").c_str());
  return failed == 0 ? 0 : 1;
}

inline int cmd_verify(const ExperimentConfig& cfg, double perturb_weights,
                      const VerifyOptions& opts_in = {}) {
  const DirectedGraph graph = build_graph_from_config(cfg);
  WeightMatrix A = row_stochastic_weights(graph);
  const ObjectiveSuite suite = build_suite_from_config(cfg);
  if (suite.n != graph.n) {
    throw ShapeMismatch("config: objective/graph agent-count mismatch");
  }
  double alpha = cfg.alpha;
  if (std::isnan(alpha)) {
    const BoundConstants bc = network_constants(A);
    const GlobalConstants gc = global_constants(suite);
    alpha = 0.5 * alpha_upper_bound(bc, suite.n, gc.l, gc.s);
  }
  if (perturb_weights != 0.0) {
    A.entries *= (1.0 + perturb_weights);
  }
  const VerificationReport report = run_verification(&graph, A, suite, alpha, opts_in);

  int passed = 0, failedc = 0, inapplicable = 0;
  for (const auto& c : report.checks) {
    switch (c.status) {
      case CheckStatus::pass: ++passed; break;
      case CheckStatus::fail: ++failedc; break;
      case CheckStatus::inapplicable: ++inapplicable; break;
    }
    std::printf("[%-12s] %-26s worst slack %11.4g%s%s\n", to_string(c.status),
                c.name.c_str(), c.worst_slack, c.detail.empty() ? "" : "  ",
                c.detail.c_str());
  }
  std::printf("verification: %d passed, %d failed, %d inapplicable\n", passed,
              failedc, inapplicable);

  nlohmann::json j = report_to_json(report);
  j["constants"] =
      report.constants ? constants_to_json(*report.constants) : nlohmann::json();
  write_file_atomic(std::filesystem::path(cfg.out) / "verify.json",
                    j.dump(2) + "\n");
  return report.exit_code();
}

struct AlphaProbe {
  double alpha = 0.0;
  double final_over_initial = 0.0;
  bool converged = false;
};

struct EmpiricalAlphaResult {
  double alpha = 0.0;         // largest probe that still decayed
  double first_failed = 0.0;  // smallest probe that did not (0 if none failed)
  std::vector<AlphaProbe> probes;
};

/// Doubling search for the largest step size that still shrinks the residual
/// in practice, starting from the certified bound. Each probe runs the full
/// budget (no early stop, so a transient dip cannot masquerade as
/// convergence) and counts as converged when the final residual is at most
/// decay_factor times the initial one. The result is an observation about
/// these runs only; unlike alpha_bar it certifies nothing.
inline EmpiricalAlphaResult empirical_alpha_search(const ExperimentInstance& inst,
                                                   long budget_iters = 20000,
                                                   double decay_factor = 0.9,
                                                   int max_doublings = 60) {
  if (budget_iters < 1) throw BadIndex("empirical_alpha_search: bad budget");
  if (!(decay_factor > 0.0) || !(decay_factor < 1.0)) {
    throw BadIndex("empirical_alpha_search: decay_factor must be in (0,1)");
  }
  RunConfig rc;
  rc.max_iters = budget_iters;
  rc.record_every = budget_iters;
  EmpiricalAlphaResult res;
  double alpha = inst.alpha_bar;
  for (int j = 0; j < max_doublings; ++j, alpha *= 2.0) {
    rc.alpha = alpha;
    AlphaProbe probe;
    probe.alpha = alpha;
    try {
      const ConvergenceTrace t = run(rc, inst.A, inst.suite, inst.x_star,
                                     inst.constants);
      const double r0 = t.records.front().residual2;
      probe.final_over_initial =
          r0 > 0.0 ? t.final_residual2 / r0 : t.final_residual2;
      probe.converged = std::isfinite(t.final_residual2) &&
                        t.final_residual2 <= decay_factor * r0;
    } catch (const Error&) {
      probe.final_over_initial = std::numeric_limits<double>::infinity();
      probe.converged = false;
    }
    res.probes.push_back(probe);
    if (!probe.converged) {
      res.first_failed = alpha;
      break;
    }
    res.alpha = alpha;
  }
  return res;
}

inline int cmd_spectral(const ExperimentConfig& cfg) {
  const ExperimentInstance inst = make_instance(cfg);
  nlohmann::json j = constants_to_json(inst.constants);
  j["alpha_bar"] = inst.alpha_bar;
  j["alpha"] = inst.alpha;
  j["strong_convexity"] = inst.globals.s;
  j["lipschitz"] = inst.globals.l;
  j["eta"] = eta(inst.alpha, inst.suite.n, inst.globals.l, inst.globals.s);
  j["rho_G"] = spectral_radius_3x3(
      build_G(inst.constants, inst.alpha, inst.suite.n, inst.globals.l,
              inst.globals.s));
  const EmpiricalAlphaResult ea = empirical_alpha_search(inst);
  nlohmann::json je;
  je["value"] = ea.alpha;
  je["first_failed"] = ea.first_failed > 0.0 ? nlohmann::json(ea.first_failed)
                                             : nlohmann::json();
  je["method"] = "doubling search from alpha_bar, 20000-iteration probes";
  je["note"] = "empirical observation from probe runs, not a certificate";
  nlohmann::json jp = nlohmann::json::array();
  for (const AlphaProbe& p : ea.probes) {
    jp.push_back({{"alpha", p.alpha},
                  {"final_over_initial", p.final_over_initial},
                  {"converged", p.converged}});
  }
  je["probes"] = jp;
  j["alpha_empirical"] = je;
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(std::filesystem::path(cfg.out) / "spectral.json", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

inline int cmd_plot(const std::vector<std::string>& trace_paths,
                    const std::string& out_file, const std::string& title) {
  if (trace_paths.empty()) throw MalformedTrace("plot: no trace files given");
  std::vector<ConvergenceTrace> traces;
  for (const auto& p : trace_paths) traces.push_back(load_trace_csv(p));
  write_file_atomic(out_file, render_convergence_svg(traces, {}, title));
  std::printf("wrote %s\n", out_file.c_str());
  return 0;
}

}  // namespace rowstoch
