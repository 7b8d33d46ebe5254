#ifndef FACSENS_DRIVER_HPP
#define FACSENS_DRIVER_HPP

#include <string>

#include "facsens/estimation.hpp"
#include "facsens/ncnumeric.hpp"
#include "facsens/negcontrol.hpp"
#include "facsens/simulation.hpp"

namespace facsens {

inline constexpr const char* kVersion = "0.1.0";

struct EstimandConfig {
  Vector a;
  TreatmentContrast contrast;
};

// Parsed, validated analyze configuration.  `echo` holds the canonical
// serialized form embedded in every result record, so a record can be
// re-run from its own echo and reproduce itself exactly.
struct AnalysisConfig {
  int m = -1;               // fixed factor count; -1 means auto
  std::string m_method;     // selection method name when m < 0
  EstimandConfig estimand;
  bool has_nc = false;
  NegativeControlSpec nc;
  SweepConfig sweep;
  RegressOptions regress;
  FaOptions fa;
  unsigned long long seed = 1;
  bool sweep_seed_given = false;  // config pinned the sweep seed explicitly
  std::string out_record;  // from the config; flags may override
  std::string out_grid;
  std::string echo;
};

AnalysisConfig parse_analysis_config(const std::string& json_text);

// Apply a command-line seed so the embedded echo still reproduces the
// record: the echo's seed is rewritten to the effective value.
void override_seed(AnalysisConfig& cfg, unsigned long long seed);

struct AnalyzeOutput {
  std::string record_json;  // deterministic serialization
  bool has_grid = false;
  std::string grid_csv;  // cos-theta grid diagnostics when a sweep ran
};

// Full pipeline: factor counts, treatment/outcome model fits, the
// worst-case interval, and (when controls are present) the analytic and
// numeric refinements.
AnalyzeOutput run_analyze(const AnalysisConfig& cfg, const Dataset& data);

// ---------------------------------------------------------------------------

struct SimulateConfig {
  long n = 1000;
  unsigned long long seed = 1;
  TrueModel model;
  bool has_estimand = false;
  EstimandConfig estimand;  // optional: adds true bias/effect to the sidecar
  std::string echo;
};

SimulateConfig parse_simulate_config(const std::string& json_text);

void override_seed(SimulateConfig& cfg, unsigned long long seed);

// Writes T.csv, Y.csv and truth.json into out_dir.
void run_simulate(const SimulateConfig& cfg, const std::string& out_dir);

// ---------------------------------------------------------------------------

// Factor-count report for one data matrix; method is a selection-method
// name or "all".  Returns the printable report.
std::string run_nfactors(const Matrix& data, const std::string& method,
                         unsigned long long seed);

}  // namespace facsens

#endif  // FACSENS_DRIVER_HPP
