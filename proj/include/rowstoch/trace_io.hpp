#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "rowstoch/analysis.hpp"
#include "rowstoch/errors.hpp"

namespace rowstoch {

inline constexpr const char* kTraceVersionLine = "# rowstoch-trace v1";
inline constexpr const char* kTraceHeaderLine =
    "k,residual2,consensus_err,opt_err,grad_track_err,grad_norm";

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Serializes the records to the versioned CSV format. Doubles are written
/// with 17 significant digits, so parsing reproduces them bit-exactly and
/// re-emitting reproduces the bytes.
inline std::string emit_trace_csv(const ConvergenceTrace& trace) {
  std::string out;
  out += kTraceVersionLine;
  out += '\n';
  out += kTraceHeaderLine;
  out += '\n';
  for (const auto& r : trace.records) {
    out += std::to_string(r.k);
    out += ',';
    out += detail::format_double(r.residual2);
    out += ',';
    out += detail::format_double(r.consensus_err);
    out += ',';
    out += detail::format_double(r.opt_err);
    out += ',';
    out += detail::format_double(r.grad_track_err);
    out += ',';
    out += detail::format_double(r.grad_norm);
    out += '\n';
  }
  return out;
}

/// Parses the versioned CSV format back into a trace (records only; the
/// run-configuration echo lives in the summary file, not the CSV).
inline ConvergenceTrace parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceVersionLine) {
    throw MalformedTrace("parse_trace_csv: missing or unknown version line");
  }
  if (!std::getline(in, line) || line != kTraceHeaderLine) {
    throw MalformedTrace("parse_trace_csv: missing column header");
  }
  ConvergenceTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) {
      throw MalformedTrace("parse_trace_csv: row does not have 6 columns");
    }
    TraceRecord r;
    char* end = nullptr;
    r.k = std::strtol(cells[0].c_str(), &end, 10);
    if (end == cells[0].c_str() || *end != '\0') {
      throw MalformedTrace("parse_trace_csv: bad iteration index");
    }
    double* fields[5] = {&r.residual2, &r.consensus_err, &r.opt_err,
                         &r.grad_track_err, &r.grad_norm};
    for (int c = 0; c < 5; ++c) {
      const std::string& s = cells[static_cast<std::size_t>(c + 1)];
      end = nullptr;
      *fields[c] = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0' || !std::isfinite(*fields[c])) {
        throw MalformedTrace("parse_trace_csv: bad numeric field");
      }
    }
    trace.records.push_back(r);
  }
  if (!trace.records.empty()) {
    trace.final_iter = trace.records.back().k;
    trace.final_residual2 = trace.records.back().residual2;
  }
  return trace;
}

inline ConvergenceTrace load_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedTrace("load_trace_csv: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trace_csv(ss.str());
}

/// Writes a file atomically: contents land under the final name completely
/// or not at all (write to a sibling temp file, then rename).
inline void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw MalformedTrace("write_file_atomic: cannot open " + tmp.string());
    out << content;
    if (!out) throw MalformedTrace("write_file_atomic: write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

// --- JSON views --------------------------------------------------------------

inline nlohmann::json constants_to_json(const BoundConstants& bc) {
  nlohmann::json norm;
  norm["depth"] = bc.norm.depth();
  norm["theta"] = bc.norm.theta();
  const MatrixXd& B = bc.norm.base();
  nlohmann::json base = nlohmann::json::array();
  for (long i = 0; i < B.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (long j = 0; j < B.cols(); ++j) row.push_back(B(i, j));
    base.push_back(row);
  }
  norm["base"] = base;

  nlohmann::json pi = nlohmann::json::array();
  for (long i = 0; i < bc.pi.size(); ++i) pi.push_back(bc.pi[i]);

  nlohmann::json decay = nlohmann::json::array();
  for (const auto& [k, dev] : bc.decay) decay.push_back({k, dev});

  return nlohmann::json{
      {"tau", bc.tau},     {"epsilon", bc.epsilon}, {"sigma", bc.sigma},
      {"y", bc.y},         {"y_tilde", bc.y_tilde}, {"c", bc.c},
      {"d", bc.d},         {"gamma1", bc.gamma1},   {"T", bc.T},
      {"T_tilde", bc.T_tilde}, {"norm", norm},      {"pi", pi},
      {"decay", decay}};
}

inline nlohmann::json rate_to_json(const RateEstimate& est) {
  return nlohmann::json{{"mu_hat", est.mu_hat},
                        {"M_hat", est.M_hat},
                        {"r_squared", est.r_squared},
                        {"window_first_k", est.window_first_k},
                        {"window_last_k", est.window_last_k},
                        {"window_size", est.window_size}};
}

/// Summary of one run: final residuals, the fitted rate when available,
/// the configuration echo and the constants echo.
inline nlohmann::json summary_to_json(const ConvergenceTrace& trace) {
  nlohmann::json j;
  j["algorithm"] = trace.algorithm;
  j["alpha"] = trace.alpha;
  j["max_iters"] = trace.max_iters;
  j["record_every"] = trace.record_every;
  j["seed"] = trace.seed;
  j["n"] = trace.n;
  j["p"] = trace.p;
  j["final_iter"] = trace.final_iter;
  j["final_residual2"] = trace.final_residual2;
  j["initial_residual2"] =
      trace.records.empty() ? 0.0 : trace.records.front().residual2;
  j["identity_errors"] = {{"tracking", trace.max_track_identity_err},
                          {"average_step", trace.max_average_step_err}};
  try {
    j["rate"] = rate_to_json(fit_linear_rate(trace));
  } catch (const InsufficientData&) {
    j["rate"] = nullptr;
  }
  if (trace.constants_echo.has_value()) {
    j["constants"] = constants_to_json(*trace.constants_echo);
  } else {
    j["constants"] = nullptr;
  }
  return j;
}

}  // namespace rowstoch
