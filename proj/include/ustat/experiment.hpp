#pragma once

// Declarative experiment configs and the batch runner behind the CLI.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ustat/verify.hpp"

namespace ustat {

struct ExperimentConfig {
  std::string check;
  std::size_t atoms = 2;      // |Omega|
  std::size_t n = 2;          // coordinates / variables
  std::size_t m = 2;          // arity
  std::size_t I = 2;          // weighted: |I|
  std::size_t J = 1;          // weighted: |J|
  std::size_t value_dim = 0;  // Hilbert value axis (0 = scalar)
  std::size_t level = 1;      // M for square function / subspace level
  double p = 2.0;
  std::optional<double> q;  // unset: 0.5 for decoupling, 2 otherwise
  double kappa = 1.0;
  double eps = 0.0;
  double theta = 0.5;
  double t = 1.0;
  bool binary = true;
  bool uniform = false;  // uniform base space; random weights otherwise
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::uint64_t mc_samples = 0;  // 0 = exact
  unsigned threads = 1;
  double tol = 1e-8;
  std::size_t max_iters = 20000;
  std::size_t patience = 200;
  double cap = 0.0;  // 0 = pipeline default
  std::size_t budget = 1;
  std::string out;
  std::string format = "jsonl";
  bool timing = false;

  /// Throws BadConfig when a value is outside its documented range.
  void validate() const;
  SolverOptions solver() const;
  double q_value() const;
};

/// Flat JSON object; nested values, unknown keys and wrong types are BadConfig.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void apply_config_value(ExperimentConfig& cfg, const std::string& key, const nlohmann::json& value);
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

/// Names accepted by run_instance.
const std::vector<std::string>& known_checks();

/// Instance k of the batch, drawn from CounterRng(instance_seed(seed, k)).
/// Library errors become a failed, unasserted report carrying the error kind.
CheckReport run_instance(const ExperimentConfig& cfg, std::size_t k);

struct RunSummary {
  std::vector<CheckReport> reports;
  std::size_t asserted = 0;
  std::size_t failed = 0;  // asserted and not passing
  std::size_t errors = 0;

  int exit_code() const { return failed == 0 ? 0 : 1; }
};

/// Runs `count` instances on `threads` workers; reports are kept in instance
/// order. Writes the reports to cfg.out (or stdout) in cfg.format.
RunSummary run(const ExperimentConfig& cfg, std::ostream* out = nullptr);

/// Writes reports in the configured format: "jsonl", "csv" or "both". With a
/// path, "both" writes <path>.jsonl and <path>.csv.
void emit_reports(const std::vector<CheckReport>& reports, const std::string& format, const std::string& path,
                  std::ostream& fallback);

}  // namespace ustat
