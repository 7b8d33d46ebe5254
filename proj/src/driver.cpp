#include "facsens/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"

#include "facsens/bounds.hpp"
#include "facsens/errors.hpp"
#include "facsens/io.hpp"

namespace facsens {

namespace {

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& msg) {
  throw ConfigParseError("config: " + msg);
}

json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    bad_config(std::string("not valid JSON: ") + e.what());
  }
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad_config(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) bad_config(where + ": unknown key '" + it.key() + "'");
  }
}

const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) bad_config(where + ": missing required key '" + key + "'");
  return *it;
}

double num_from(const json& j, const std::string& where) {
  if (!j.is_number()) bad_config(where + ": expected a number");
  return j.get<double>();
}

long int_from(const json& j, const std::string& where) {
  if (!j.is_number_integer()) bad_config(where + ": expected an integer");
  return j.get<long>();
}

unsigned long long seed_from(const json& j, const std::string& where) {
  if (!(j.is_number_unsigned() ||
        (j.is_number_integer() && j.get<long long>() >= 0))) {
    bad_config(where + ": expected a nonnegative integer seed");
  }
  return j.get<unsigned long long>();
}

Vector vec_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    bad_config(where + ": expected a nonempty array of numbers");
  }
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) =
        num_from(j[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

Matrix mat_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    bad_config(where + ": expected a nonempty array of rows");
  }
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  Matrix M;
  for (std::size_t r = 0; r < rows; ++r) {
    const Vector row = vec_from(j[r], where + "[" + std::to_string(r) + "]");
    if (r == 0) {
      cols = static_cast<std::size_t>(row.size());
      M.resize(rows, cols);
    } else if (static_cast<std::size_t>(row.size()) != cols) {
      bad_config(where + ": ragged rows");
    }
    M.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return M;
}

json json_from_vector(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json json_from_matrix(const Matrix& M) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    arr.push_back(json_from_vector(M.row(r).transpose()));
  }
  return arr;
}

EstimandConfig estimand_from(const json& j, const std::string& where) {
  check_keys(j, where, {"a", "t1", "t2"});
  EstimandConfig est;
  est.a = vec_from(require(j, "a", where), where + ".a");
  est.contrast.t1 = vec_from(require(j, "t1", where), where + ".t1");
  est.contrast.t2 = vec_from(require(j, "t2", where), where + ".t2");
  if (est.contrast.t1.size() != est.contrast.t2.size()) {
    bad_config(where + ": t1 and t2 have different lengths");
  }
  return est;
}

TreatmentContrast contrast_from(const json& j, const std::string& where) {
  check_keys(j, where, {"t1", "t2"});
  TreatmentContrast c;
  c.t1 = vec_from(require(j, "t1", where), where + ".t1");
  c.t2 = vec_from(require(j, "t2", where), where + ".t2");
  if (c.t1.size() != c.t2.size()) {
    bad_config(where + ": t1 and t2 have different lengths");
  }
  return c;
}

std::string kind_name(BiasRegion::Kind kind) {
  switch (kind) {
    case BiasRegion::Kind::no_nc: return "no_nc";
    case BiasRegion::Kind::analytic_nc: return "analytic_nc";
    case BiasRegion::Kind::numeric_nc: return "numeric_nc";
  }
  return "unknown";
}

json intervals_json(const BiasRegion& region) {
  json arr = json::array();
  for (const Interval& iv : region.intervals) {
    arr.push_back(json::array({iv.lo, iv.hi}));
  }
  return arr;
}

// Every reported region carries both frames: the bias scale the theory
// works in and the effect scale the user asked about.
json region_json(const BiasRegion& bias_frame, double naive) {
  json r;
  r["kind"] = kind_name(bias_frame.kind);
  r["bias"] = intervals_json(bias_frame);
  r["pate"] = intervals_json(pate_region_from_bias(bias_frame, naive));
  return r;
}

std::string grid_to_csv(const ThetaRegion& region) {
  std::ostringstream out;
  out << "cos_theta,bias_value,feasible,bridged,res1,res2_mean,objective\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (const SweepPoint& pt : region.grid) {
    put(pt.u);
    out << ',';
    put(pt.target_bias);
    out << ',' << (pt.accepted ? 1 : 0) << ',' << (pt.bridged ? 1 : 0) << ',';
    put(pt.res1);
    out << ',';
    put(pt.res2_mean);
    out << ',';
    put(pt.objective);
    out << '\n';
  }
  return out.str();
}

}  // namespace

AnalysisConfig parse_analysis_config(const std::string& json_text) {
  const json j = parse_json_text(json_text);
  check_keys(j, "analyze",
             {"m", "estimand", "negative_controls", "sweep", "regressor",
              "factor_analysis", "seed", "output", "threads"});

  AnalysisConfig cfg;
  if (auto it = j.find("seed"); it != j.end()) {
    cfg.seed = seed_from(*it, "analyze.seed");
  }

  const json& jm = require(j, "m", "analyze");
  if (jm.is_string()) {
    const std::string s = jm.get<std::string>();
    const std::string prefix = "auto:";
    if (s.rfind(prefix, 0) != 0) {
      bad_config("analyze.m: string form must be 'auto:<method>', got '" + s +
                 "'");
    }
    cfg.m = -1;
    cfg.m_method = s.substr(prefix.size());
    parse_factor_count_method(cfg.m_method);  // fail fast on bad names
  } else {
    cfg.m = static_cast<int>(int_from(jm, "analyze.m"));
    if (cfg.m < 1) bad_config("analyze.m: must be at least 1");
  }

  cfg.estimand = estimand_from(require(j, "estimand", "analyze"),
                               "analyze.estimand");

  if (auto it = j.find("negative_controls"); it != j.end()) {
    if (!it->is_array()) {
      bad_config("analyze.negative_controls: expected an array");
    }
    for (std::size_t e = 0; e < it->size(); ++e) {
      const std::string where =
          "analyze.negative_controls[" + std::to_string(e) + "]";
      const json& je = (*it)[e];
      check_keys(je, where, {"outcome", "contrasts"});
      NcEntry entry;
      // Config indices are 1-based, matching the CSV column names.
      entry.outcome =
          static_cast<int>(int_from(require(je, "outcome", where),
                                    where + ".outcome")) - 1;
      const json& jc = require(je, "contrasts", where);
      if (!jc.is_array() || jc.empty()) {
        bad_config(where + ".contrasts: expected a nonempty array");
      }
      for (std::size_t c = 0; c < jc.size(); ++c) {
        entry.contrasts.push_back(contrast_from(
            jc[c], where + ".contrasts[" + std::to_string(c) + "]"));
      }
      cfg.nc.entries.push_back(std::move(entry));
    }
    cfg.has_nc = !cfg.nc.entries.empty();
  }

  cfg.sweep.seed = cfg.seed;
  if (auto it = j.find("sweep"); it != j.end()) {
    const json& js = *it;
    check_keys(js, "analyze.sweep",
               {"grid_size", "delta", "restarts", "seed"});
    cfg.sweep_seed_given = js.find("seed") != js.end();
    if (auto f = js.find("grid_size"); f != js.end()) {
      cfg.sweep.grid_size =
          static_cast<int>(int_from(*f, "analyze.sweep.grid_size"));
    }
    if (auto f = js.find("delta"); f != js.end()) {
      cfg.sweep.delta = num_from(*f, "analyze.sweep.delta");
    }
    if (auto f = js.find("restarts"); f != js.end()) {
      cfg.sweep.restarts =
          static_cast<int>(int_from(*f, "analyze.sweep.restarts"));
    }
    if (auto f = js.find("seed"); f != js.end()) {
      cfg.sweep.seed = seed_from(*f, "analyze.sweep.seed");
    }
  }

  if (auto it = j.find("regressor"); it != j.end()) {
    const json& jr = *it;
    check_keys(jr, "analyze.regressor",
               {"method", "knots_per_treatment", "max_terms", "gcv_penalty",
                "min_improve_rel", "selection_subsample", "ridge"});
    if (auto f = jr.find("method"); f != jr.end()) {
      const std::string name = f->get<std::string>();
      if (name == "hinge") {
        cfg.regress.method = RegressMethod::hinge;
      } else if (name == "poly2") {
        cfg.regress.method = RegressMethod::poly2;
      } else {
        bad_config("analyze.regressor.method: unknown method '" + name +
                   "' (expected 'hinge' or 'poly2')");
      }
    }
    if (auto f = jr.find("knots_per_treatment"); f != jr.end()) {
      cfg.regress.knots_per_treatment = static_cast<int>(
          int_from(*f, "analyze.regressor.knots_per_treatment"));
    }
    if (auto f = jr.find("max_terms"); f != jr.end()) {
      cfg.regress.max_terms =
          static_cast<int>(int_from(*f, "analyze.regressor.max_terms"));
    }
    if (auto f = jr.find("gcv_penalty"); f != jr.end()) {
      cfg.regress.gcv_penalty = num_from(*f, "analyze.regressor.gcv_penalty");
    }
    if (auto f = jr.find("min_improve_rel"); f != jr.end()) {
      cfg.regress.min_improve_rel =
          num_from(*f, "analyze.regressor.min_improve_rel");
    }
    if (auto f = jr.find("selection_subsample"); f != jr.end()) {
      cfg.regress.selection_subsample = static_cast<int>(
          int_from(*f, "analyze.regressor.selection_subsample"));
    }
    if (auto f = jr.find("ridge"); f != jr.end()) {
      cfg.regress.ridge = num_from(*f, "analyze.regressor.ridge");
    }
  }

  if (auto it = j.find("factor_analysis"); it != j.end()) {
    const json& jf = *it;
    check_keys(jf, "analyze.factor_analysis",
               {"max_iters", "tol", "min_uniqueness"});
    if (auto f = jf.find("max_iters"); f != jf.end()) {
      cfg.fa.max_iters =
          static_cast<int>(int_from(*f, "analyze.factor_analysis.max_iters"));
    }
    if (auto f = jf.find("tol"); f != jf.end()) {
      cfg.fa.tol = num_from(*f, "analyze.factor_analysis.tol");
    }
    if (auto f = jf.find("min_uniqueness"); f != jf.end()) {
      cfg.fa.min_uniqueness =
          num_from(*f, "analyze.factor_analysis.min_uniqueness");
    }
  }

  if (auto it = j.find("output"); it != j.end()) {
    const json& jo = *it;
    check_keys(jo, "analyze.output", {"record", "grid"});
    if (auto f = jo.find("record"); f != jo.end()) {
      cfg.out_record = f->get<std::string>();
    }
    if (auto f = jo.find("grid"); f != jo.end()) {
      cfg.out_grid = f->get<std::string>();
    }
  }

  cfg.echo = j.dump();
  return cfg;
}

void override_seed(AnalysisConfig& cfg, unsigned long long seed) {
  cfg.seed = seed;
  if (!cfg.sweep_seed_given) cfg.sweep.seed = seed;
  json echo = parse_json_text(cfg.echo);
  echo["seed"] = seed;
  cfg.echo = echo.dump();
}

void override_seed(SimulateConfig& cfg, unsigned long long seed) {
  cfg.seed = seed;
  json echo = parse_json_text(cfg.echo);
  echo["seed"] = seed;
  cfg.echo = echo.dump();
}

AnalyzeOutput run_analyze(const AnalysisConfig& cfg, const Dataset& data) {
  data.validate();
  const int k = data.k();
  const int q = data.q();

  if (cfg.estimand.a.size() != q) {
    throw DimensionMismatch("analyze: estimand direction has " +
                            std::to_string(cfg.estimand.a.size()) +
                            " entries but the outcome data has " +
                            std::to_string(q) + " columns");
  }
  if (cfg.estimand.contrast.t1.size() != k) {
    throw DimensionMismatch("analyze: estimand treatment vectors have " +
                            std::to_string(cfg.estimand.contrast.t1.size()) +
                            " entries but the treatment data has " +
                            std::to_string(k) + " columns");
  }
  if (cfg.has_nc) {
    cfg.nc.validate(q, /*require_nonempty=*/true,
                    /*check_independence=*/true);
    for (const NcEntry& e : cfg.nc.entries) {
      for (const TreatmentContrast& c : e.contrasts) {
        if (c.t1.size() != k) {
          throw DimensionMismatch(
              "analyze: negative-control treatment vectors have " +
              std::to_string(c.t1.size()) + " entries but the data has " +
              std::to_string(k) + " columns");
        }
      }
    }
  }

  json rec;
  rec["version"] = kVersion;
  rec["seed"] = cfg.seed;
  rec["n"] = data.n();
  rec["k"] = k;
  rec["q"] = q;

  int m = cfg.m;
  json m_info;
  m_info["max_admissible_treatment_side"] = max_admissible_factors(k);
  m_info["max_admissible_outcome_side"] = max_admissible_factors(q);
  if (m < 0) {
    const FactorCountResult sel = select_num_factors(
        data.T, parse_factor_count_method(cfg.m_method), cfg.seed);
    m_info["requested"] = "auto:" + cfg.m_method;
    m_info["auto_raw"] = sel.raw;
    m_info["auto_clamped"] = sel.clamped;
    m = sel.selected;
    if (m < 1) {
      throw Error(
          "analyze: automatic selection found no factors; supply m "
          "explicitly if confounding adjustment is still wanted");
    }
  } else {
    m_info["requested"] = m;
  }
  m_info["selected"] = m;
  rec["m"] = m_info;

  const TreatmentModelFit tfit = fit_treatment_model(data, m, cfg.fa);
  const ConfounderConditional cond = conditional_moments(tfit.model);
  const OutcomeModelFit ofit = fit_outcome_model(data, m, cfg.regress, cfg.fa);

  const Vector& a = cfg.estimand.a;
  const TreatmentContrast& contrast = cfg.estimand.contrast;
  const double naive = naive_effect(ofit.model, a, contrast);
  const double bound = bias_bound(ofit.model, cond, a, contrast);
  const Vector d = contrast.t1 - contrast.t2;

  rec["naive_pate"] = naive;
  rec["bound"] = bound;
  rec["r2_treatment"] = partial_r2_treatment(tfit.model, d);
  rec["r2_outcome"] = partial_r2_outcome(ofit.model, a);

  BiasRegion no_nc_bias;
  no_nc_bias.kind = BiasRegion::Kind::no_nc;
  no_nc_bias.quantity = BiasRegion::Quantity::bias;
  no_nc_bias.intervals = {{-bound, bound}};
  no_nc_bias.validate();

  json regions = json::array();
  regions.push_back(region_json(no_nc_bias, naive));

  json diagnostics;
  diagnostics["heywood_treatment"] = tfit.fa.heywood;
  diagnostics["heywood_outcome"] = ofit.fa.heywood;
  diagnostics["fa_iterations_treatment"] = tfit.fa.iterations;
  diagnostics["fa_iterations_outcome"] = ofit.fa.iterations;
  diagnostics["surface_dropped_collinear"] = ofit.surface.dropped_collinear();

  json point_id;
  point_id["flag"] = false;
  point_id["reason"] = "";

  AnalyzeOutput out;

  if (cfg.has_nc) {
    const NCArtifacts artifacts =
        build_nc_artifacts(cfg.nc, ofit.model, cond, a, contrast);
    const std::vector<bool> compat = compatibility_check(artifacts);
    diagnostics["compatibility"] = json(compat);

    if (artifacts.J() < m) {
      const AnalyticInterval analytic = nc_interval_multiple(artifacts);
      json jr = region_json(analytic.region, naive);
      jr["center"] = analytic.center;
      jr["half_width"] = analytic.half_width;
      jr["compat_projected"] = analytic.compat_projected;
      regions.push_back(std::move(jr));
    } else {
      diagnostics["analytic_skipped"] =
          "pooled analytic interval needs fewer controls than factors (J=" +
          std::to_string(artifacts.J()) + ", m=" + std::to_string(m) +
          "); the numeric region below has no such limit";
    }

    SweepConfig sweep_cfg = cfg.sweep;
    if (sweep_cfg.delta <= 0.0) sweep_cfg.sample_size = data.n();
    const ThetaRegion sweep = sweep_theta(artifacts, ofit.model, sweep_cfg);
    json jr = region_json(sweep.bias_region, naive);
    jr["delta"] = sweep.delta;
    jr["grid_size"] = static_cast<int>(sweep.grid.size());
    jr["feasible_points"] = static_cast<int>(sweep.feasible_cos.size());
    jr["any_bridged"] = sweep.any_bridged;
    regions.push_back(std::move(jr));
    out.has_grid = true;
    out.grid_csv = grid_to_csv(sweep);

    const PointIdResult strict = detect_point_identification(artifacts);
    const PointIdResult screen = point_identification_screen(artifacts);
    point_id["flag"] = strict.flag || screen.flag;
    point_id["reason"] = strict.flag ? strict.reason : screen.reason;
    point_id["structural_rule"] = strict.flag;
    point_id["estimation_screen"] = screen.flag;
  }

  rec["regions"] = std::move(regions);
  rec["point_identified"] = std::move(point_id);
  rec["diagnostics"] = std::move(diagnostics);
  rec["config_echo"] = parse_json_text(cfg.echo);

  out.record_json = rec.dump(2) + "\n";
  return out;
}

SimulateConfig parse_simulate_config(const std::string& json_text) {
  const json j = parse_json_text(json_text);
  check_keys(j, "simulate", {"n", "seed", "model", "estimand"});

  SimulateConfig cfg;
  cfg.n = int_from(require(j, "n", "simulate"), "simulate.n");
  if (cfg.n < 1) bad_config("simulate.n: must be at least 1");
  if (auto it = j.find("seed"); it != j.end()) {
    cfg.seed = seed_from(*it, "simulate.seed");
  }

  const json& jm = require(j, "model", "simulate");
  if (jm.is_string()) {
    if (jm.get<std::string>() != "default") {
      bad_config("simulate.model: unknown model '" + jm.get<std::string>() +
                 "' (expected 'default' or an object)");
    }
    cfg.model = default_true_model();
  } else {
    check_keys(jm, "simulate.model",
               {"B", "Gamma", "sigma2_t", "sigma2_y", "g"});
    cfg.model.B = mat_from(require(jm, "B", "simulate.model"),
                           "simulate.model.B");
    cfg.model.Gamma = mat_from(require(jm, "Gamma", "simulate.model"),
                               "simulate.model.Gamma");
    if (auto f = jm.find("sigma2_t"); f != jm.end()) {
      cfg.model.sigma2_t = num_from(*f, "simulate.model.sigma2_t");
    }
    if (auto f = jm.find("sigma2_y"); f != jm.end()) {
      cfg.model.sigma2_y = num_from(*f, "simulate.model.sigma2_y");
    }
    std::string gname = "zero";
    if (auto f = jm.find("g"); f != jm.end()) gname = f->get<std::string>();
    if (gname == "zero") {
      const int q = cfg.model.q();
      cfg.model.g = [q](const Vector&) { return Vector::Zero(q).eval(); };
    } else if (gname == "default") {
      if (cfg.model.k() != 10 || cfg.model.q() != 7) {
        bad_config(
            "simulate.model.g: the built-in outcome function needs 10 "
            "treatments and 7 outcomes");
      }
      cfg.model.g = default_outcome_function;
    } else {
      bad_config("simulate.model.g: unknown function '" + gname +
                 "' (expected 'zero' or 'default')");
    }
    try {
      cfg.model.validate();
    } catch (const Error& e) {
      bad_config(std::string("simulate.model: ") + e.what());
    }
  }

  if (auto it = j.find("estimand"); it != j.end()) {
    cfg.has_estimand = true;
    cfg.estimand = estimand_from(*it, "simulate.estimand");
    if (cfg.estimand.a.size() != cfg.model.q() ||
        cfg.estimand.contrast.t1.size() != cfg.model.k()) {
      bad_config("simulate.estimand: dimensions do not match the model");
    }
  }

  cfg.echo = j.dump();
  return cfg;
}

void run_simulate(const SimulateConfig& cfg, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("simulate: cannot create output directory '" + out_dir +
                  "': " + ec.message());
  }

  const Dataset ds = generate_dataset(cfg.model, cfg.n, cfg.seed);
  const std::filesystem::path dir(out_dir);
  write_csv((dir / "T.csv").string(), ds.T, numbered_header("t", ds.k()));
  write_csv((dir / "Y.csv").string(), ds.Y, numbered_header("y", ds.q()));

  json truth;
  truth["version"] = kVersion;
  truth["n"] = cfg.n;
  truth["seed"] = cfg.seed;
  truth["k"] = cfg.model.k();
  truth["q"] = cfg.model.q();
  truth["m"] = cfg.model.m();
  truth["B"] = json_from_matrix(cfg.model.B);
  truth["Gamma"] = json_from_matrix(cfg.model.Gamma);
  truth["sigma2_t"] = cfg.model.sigma2_t;
  truth["sigma2_y"] = cfg.model.sigma2_y;
  if (cfg.has_estimand) {
    json est;
    est["a"] = json_from_vector(cfg.estimand.a);
    est["t1"] = json_from_vector(cfg.estimand.contrast.t1);
    est["t2"] = json_from_vector(cfg.estimand.contrast.t2);
    truth["estimand"] = std::move(est);
    truth["true_bias"] = true_bias(cfg.model, cfg.estimand.a,
                                   cfg.estimand.contrast);
    truth["true_pate"] = true_pate(cfg.model, cfg.estimand.a,
                                   cfg.estimand.contrast);
    const Vector s =
        scaled_mean_shift(true_conditional(cfg.model), cfg.estimand.contrast);
    truth["true_bound"] =
        (cfg.estimand.a.transpose() * cfg.model.Gamma).norm() * s.norm();
  }
  truth["config_echo"] = parse_json_text(cfg.echo);
  write_text_file((dir / "truth.json").string(), truth.dump(2) + "\n");
}

std::string run_nfactors(const Matrix& data, const std::string& method,
                         unsigned long long seed) {
  std::vector<std::string> methods;
  if (method == "all" || method.empty()) {
    methods = {"eigen", "parallel", "bic"};
  } else {
    parse_factor_count_method(method);  // UnsupportedMethod on bad names
    methods = {method};
  }

  std::ostringstream out;
  out << "rows: " << data.rows() << "\n";
  out << "columns: " << data.cols() << "\n";
  out << "max admissible factors: "
      << max_admissible_factors(static_cast<int>(data.cols())) << "\n";
  for (const std::string& name : methods) {
    const FactorCountResult r =
        select_num_factors(data, parse_factor_count_method(name), seed);
    out << "method " << name << ": " << r.selected;
    if (r.clamped) out << " (clamped from " << r.raw << ")";
    out << "\n";
    if (r.selected == 0) {
      out << "warning: method " << name
          << " retained no factors (no eigenvalue above its threshold)\n";
    }
  }
  return out.str();
}

}  // namespace facsens
