// Command-line front end: simulate | analyze | nfactors.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numerical failure.

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "facsens/driver.hpp"
#include "facsens/errors.hpp"
#include "facsens/io.hpp"

namespace {

enum class Stage { config, data, analysis, output };

int exit_code_for(Stage stage) {
  switch (stage) {
    case Stage::config: return 2;
    case Stage::data: return 3;
    case Stage::analysis: return 4;
    case Stage::output: return 3;
  }
  return 4;
}

struct CommonFlags {
  std::string config_path;
  std::string treatments_path;
  std::string outcomes_path;
  std::string out_path;
  std::string method = "all";
  long long seed = -1;  // < 0 means "keep the config seed"
  int threads = 1;
  bool emit_grid = false;
};

int run_simulate_cmd(const CommonFlags& flags) {
  Stage stage = Stage::config;
  try {
    facsens::SimulateConfig cfg =
        facsens::parse_simulate_config(facsens::read_text_file(flags.config_path));
    if (flags.seed >= 0) {
      facsens::override_seed(cfg,
                             static_cast<unsigned long long>(flags.seed));
    }
    stage = Stage::output;
    const std::string dir = flags.out_path.empty() ? "." : flags.out_path;
    facsens::run_simulate(cfg, dir);
    std::cerr << "wrote " << dir << "/T.csv, " << dir << "/Y.csv, " << dir
              << "/truth.json\n";
    return 0;
  } catch (const facsens::ConfigParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const facsens::UnsupportedMethod& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(stage);
  }
}

int run_analyze_cmd(const CommonFlags& flags) {
  Stage stage = Stage::config;
  try {
    facsens::AnalysisConfig cfg =
        facsens::parse_analysis_config(facsens::read_text_file(flags.config_path));
    if (flags.seed >= 0) {
      facsens::override_seed(cfg,
                             static_cast<unsigned long long>(flags.seed));
    }

    stage = Stage::data;
    const facsens::CsvTable t = facsens::read_csv(flags.treatments_path);
    const facsens::CsvTable y = facsens::read_csv(flags.outcomes_path);
    facsens::Dataset data;
    data.T = t.values;
    data.Y = y.values;
    data.validate();

    stage = Stage::analysis;
    const facsens::AnalyzeOutput out = facsens::run_analyze(cfg, data);

    stage = Stage::output;
    const std::string record_path =
        !flags.out_path.empty() ? flags.out_path : cfg.out_record;
    if (record_path.empty()) {
      std::cout << out.record_json;
    } else {
      facsens::write_text_file(record_path, out.record_json);
      std::cerr << "wrote " << record_path << "\n";
    }
    const bool want_grid = flags.emit_grid || !cfg.out_grid.empty();
    if (want_grid) {
      if (!out.has_grid) {
        std::cerr << "note: no negative controls, so no sweep grid was "
                     "produced\n";
      } else {
        std::string grid_path = cfg.out_grid;
        if (grid_path.empty()) {
          grid_path = record_path.empty() ? "grid.csv"
                                          : record_path + ".grid.csv";
        }
        facsens::write_text_file(grid_path, out.grid_csv);
        std::cerr << "wrote " << grid_path << "\n";
      }
    }
    return 0;
  } catch (const facsens::ConfigParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const facsens::UnsupportedMethod& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(stage);
  }
}

int run_nfactors_cmd(const CommonFlags& flags) {
  Stage stage = Stage::config;
  try {
    const bool have_t = !flags.treatments_path.empty();
    const bool have_y = !flags.outcomes_path.empty();
    if (have_t == have_y) {
      throw facsens::ConfigParseError(
          "nfactors: pass exactly one of --treatments or --outcomes");
    }
    stage = Stage::data;
    const facsens::CsvTable table =
        facsens::read_csv(have_t ? flags.treatments_path
                                 : flags.outcomes_path);

    stage = Stage::analysis;
    const unsigned long long seed =
        flags.seed >= 0 ? static_cast<unsigned long long>(flags.seed) : 0;
    std::cout << facsens::run_nfactors(table.values, flags.method, seed);
    return 0;
  } catch (const facsens::ConfigParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const facsens::UnsupportedMethod& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(stage);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "facsens: partial identification of multi-treatment causal effects "
      "under factor-structured unmeasured confounding"};
  app.require_subcommand(1);

  CommonFlags flags;

  CLI::App* sim = app.add_subcommand(
      "simulate", "Generate a synthetic dataset and a ground-truth sidecar");
  sim->add_option("--config", flags.config_path, "JSON simulation config")
      ->required();
  sim->add_option("--out", flags.out_path, "Output directory (default '.')");
  sim->add_option("--seed", flags.seed, "Override the config seed");
  sim->add_option("--threads", flags.threads,
                  "Reserved; all computation is sequential");

  CLI::App* ana = app.add_subcommand(
      "analyze", "Compute identification regions from treatment/outcome CSVs");
  ana->add_option("--config", flags.config_path, "JSON analysis config")
      ->required();
  ana->add_option("--treatments", flags.treatments_path,
                  "CSV of treatments (header row required)")
      ->required();
  ana->add_option("--outcomes", flags.outcomes_path,
                  "CSV of outcomes (header row required)")
      ->required();
  ana->add_option("--out", flags.out_path,
                  "Result record path (default: config output.record, else "
                  "stdout)");
  ana->add_flag("--emit-grid", flags.emit_grid,
                "Also write the feasibility sweep grid as CSV");
  ana->add_option("--seed", flags.seed, "Override the config seed");
  ana->add_option("--threads", flags.threads,
                  "Reserved; all computation is sequential");

  CLI::App* nf = app.add_subcommand(
      "nfactors", "Report how many latent factors a data matrix supports");
  nf->add_option("--treatments", flags.treatments_path, "CSV matrix");
  nf->add_option("--outcomes", flags.outcomes_path, "CSV matrix");
  nf->add_option("--method", flags.method,
                 "eigen, parallel, bic, or all (default)");
  nf->add_option("--seed", flags.seed,
                 "Seed for the resampling-based method (default 0)");
  nf->add_option("--threads", flags.threads,
                 "Reserved; all computation is sequential");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (flags.threads < 1) {
    std::cerr << "error: --threads must be at least 1\n";
    return 2;
  }

  if (sim->parsed()) return run_simulate_cmd(flags);
  if (ana->parsed()) return run_analyze_cmd(flags);
  return run_nfactors_cmd(flags);
}
