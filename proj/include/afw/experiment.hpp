#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "afw/data_io.hpp"
#include "afw/diagnostics.hpp"
#include "afw/solvers.hpp"
#include "afw/spaces.hpp"
#include "afw/synthetic.hpp"

namespace afw {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kConfig = 2;
inline constexpr int kIo = 3;
}  // namespace exit_code

inline constexpr int kSummarySchemaVersion = 1;
/// Subtracted from reference-run optima so that every recorded gap stays positive.
inline constexpr double kReferenceMargin = 1e-10;

struct ProblemConfig {
  std::string type;  // quadratic | logistic | logistic_synthetic | matcomp | matcomp_synthetic
  Index dim = 0;
  double center_norm = 0.0;
  double scale = 1.0;
  std::optional<std::uint64_t> center_seed;
  std::string path;
  std::optional<Index> feature_dim;
  Index samples = 0;
  Index features = 0;
  Index rows = 0;
  Index cols = 0;
  Index rank = 0;
  double observed_fraction = 0.0;
  RatingScale rating_scale;
};

struct ConstraintConfig {
  std::string type;  // l2 | l1 | lp | nuclear | none
  double radius = 0.0;
  bool radius_from_truth = false;  // matcomp_synthetic: R = true nuclear norm
  double p = 2.0;
};

struct FstarPolicy {
  std::string type;  // analytic | reference_run | value | none; empty = analytic if available
  std::int64_t iters = 0;
  double value = 0.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ProblemConfig problem;
  ConstraintConfig constraint;
  std::vector<std::string> algorithms;
  std::int64_t iters = 0;  // 0 = desk-scale default
  Seed seed{};
  std::string output_dir = "afw_output";
  bool diagnostics = false;
  bool record_wall_time = false;
  FstarPolicy fstar;
  std::string start;  // random | zero; empty = problem default
  double power_tol = 1e-10;
  int power_max_iter = 200;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
  }
}

template <class T>
T get_field(const json& obj, const std::string& where, const char* key) {
  const std::string field = where.empty() ? key : where + "." + key;
  if (!obj.contains(key)) throw ConfigError(field, "required field is missing");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(field, "has the wrong type");
  }
}

template <class T>
std::optional<T> get_optional(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) return std::nullopt;
  return get_field<T>(obj, where, key);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::get_field;
  using detail::get_optional;
  check_keys(j, "",
             {"name", "problem", "constraint", "algorithms", "iters", "seed", "output_dir",
              "diagnostics", "record_wall_time", "fstar_policy", "start", "power_tol",
              "power_max_iter"});
  ExperimentConfig c;
  c.name = get_optional<std::string>(j, "", "name").value_or(c.name);

  if (!j.contains("problem")) throw ConfigError("problem", "required field is missing");
  const auto& p = j.at("problem");
  check_keys(p, "problem",
             {"type", "dim", "center_norm", "scale", "center_seed", "path", "feature_dim",
              "samples", "features", "rows", "cols", "rank", "observed_fraction", "rating_min",
              "rating_max"});
  auto& pc = c.problem;
  pc.type = get_field<std::string>(p, "problem", "type");
  if (pc.type == "quadratic") {
    pc.dim = get_field<Index>(p, "problem", "dim");
    pc.center_norm = get_field<double>(p, "problem", "center_norm");
    pc.scale = get_optional<double>(p, "problem", "scale").value_or(1.0);
    pc.center_seed = get_optional<std::uint64_t>(p, "problem", "center_seed");
    if (pc.dim < 1) throw ConfigError("problem.dim", "must be >= 1");
    if (!(pc.center_norm >= 0.0)) throw ConfigError("problem.center_norm", "must be >= 0");
    if (!(pc.scale > 0.0)) throw ConfigError("problem.scale", "must be > 0");
  } else if (pc.type == "logistic") {
    pc.path = get_field<std::string>(p, "problem", "path");
    pc.feature_dim = get_optional<Index>(p, "problem", "feature_dim");
  } else if (pc.type == "logistic_synthetic") {
    pc.samples = get_field<Index>(p, "problem", "samples");
    pc.features = get_field<Index>(p, "problem", "features");
    if (pc.samples < 1) throw ConfigError("problem.samples", "must be >= 1");
    if (pc.features < 1) throw ConfigError("problem.features", "must be >= 1");
  } else if (pc.type == "matcomp") {
    pc.path = get_field<std::string>(p, "problem", "path");
    pc.rating_scale.min = get_optional<double>(p, "problem", "rating_min").value_or(1.0);
    pc.rating_scale.max = get_optional<double>(p, "problem", "rating_max").value_or(5.0);
  } else if (pc.type == "matcomp_synthetic") {
    pc.rows = get_field<Index>(p, "problem", "rows");
    pc.cols = get_field<Index>(p, "problem", "cols");
    pc.rank = get_field<Index>(p, "problem", "rank");
    pc.observed_fraction = get_field<double>(p, "problem", "observed_fraction");
    if (pc.rows < 1) throw ConfigError("problem.rows", "must be >= 1");
    if (pc.cols < 1) throw ConfigError("problem.cols", "must be >= 1");
    if (pc.rank < 1) throw ConfigError("problem.rank", "must be >= 1");
    if (!(pc.observed_fraction > 0.0 && pc.observed_fraction <= 1.0)) {
      throw ConfigError("problem.observed_fraction", "must lie in (0, 1]");
    }
  } else {
    throw ConfigError("problem.type", "unknown problem type '" + pc.type + "'");
  }

  if (!j.contains("constraint")) throw ConfigError("constraint", "required field is missing");
  const auto& s = j.at("constraint");
  check_keys(s, "constraint", {"type", "radius", "p"});
  auto& cc = c.constraint;
  cc.type = get_field<std::string>(s, "constraint", "type");
  if (cc.type != "l2" && cc.type != "l1" && cc.type != "lp" && cc.type != "nuclear" &&
      cc.type != "none") {
    throw ConfigError("constraint.type", "unknown constraint type '" + cc.type + "'");
  }
  if (cc.type != "none") {
    if (!s.contains("radius")) throw ConfigError("constraint.radius", "required field is missing");
    if (s.at("radius").is_string() && s.at("radius").get<std::string>() == "true_nuclear_norm") {
      if (pc.type != "matcomp_synthetic" || cc.type != "nuclear") {
        throw ConfigError("constraint.radius",
                          "'true_nuclear_norm' needs a matcomp_synthetic problem and a nuclear ball");
      }
      cc.radius_from_truth = true;
    } else {
      cc.radius = get_field<double>(s, "constraint", "radius");
      if (!(cc.radius > 0.0) || !std::isfinite(cc.radius)) {
        throw ConfigError("constraint.radius", "must be > 0");
      }
    }
  }
  if (cc.type == "lp") {
    cc.p = get_field<double>(s, "constraint", "p");
    if (!(cc.p > 1.0) || !std::isfinite(cc.p)) throw ConfigError("constraint.p", "must be > 1");
  }
  const bool matrix_problem = pc.type == "matcomp" || pc.type == "matcomp_synthetic";
  if (matrix_problem && cc.type != "nuclear") {
    throw ConfigError("constraint.type", "matrix completion needs a nuclear ball");
  }
  if (!matrix_problem && cc.type == "nuclear") {
    throw ConfigError("constraint.type", "nuclear ball needs a matrix completion problem");
  }

  c.algorithms = get_field<std::vector<std::string>>(j, "", "algorithms");
  if (c.algorithms.empty()) throw ConfigError("algorithms", "at least one algorithm is required");
  std::set<std::string> seen;
  for (const auto& a : c.algorithms) {
    if (a != "fw" && a != "afw" && a != "agm" && a != "agm_sc" && a != "pgd") {
      throw ConfigError("algorithms", "unknown algorithm '" + a + "'");
    }
    if (!seen.insert(a).second) throw ConfigError("algorithms", "duplicate algorithm '" + a + "'");
    const bool projectable = cc.type == "l1" || cc.type == "l2";
    if ((a == "fw" || a == "afw") && cc.type == "none") {
      throw ConfigError("algorithms", a + " needs a compact constraint set");
    }
    if (a == "agm" && !(projectable || cc.type == "none")) {
      throw ConfigError("algorithms", "agm needs an l1/l2 ball or no constraint");
    }
    if (a == "pgd" && !projectable) throw ConfigError("algorithms", "pgd needs an l1/l2 ball");
    if (a == "agm_sc" && (cc.type != "none" || pc.type != "quadratic")) {
      throw ConfigError("algorithms", "agm_sc needs an unconstrained quadratic problem");
    }
  }

  c.iters = get_optional<std::int64_t>(j, "", "iters").value_or(pc.type == "matcomp" ? 300 : 10000);
  if (c.iters < 1) throw ConfigError("iters", "must be >= 1");
  c.seed = Seed{get_optional<std::uint64_t>(j, "", "seed").value_or(0)};
  c.output_dir = get_optional<std::string>(j, "", "output_dir").value_or(c.output_dir);
  c.diagnostics = get_optional<bool>(j, "", "diagnostics").value_or(false);
  c.record_wall_time = get_optional<bool>(j, "", "record_wall_time").value_or(false);
  c.start = get_optional<std::string>(j, "", "start").value_or("");
  if (!c.start.empty() && c.start != "random" && c.start != "zero") {
    throw ConfigError("start", "must be 'random' or 'zero'");
  }
  if (matrix_problem && !c.start.empty()) {
    throw ConfigError("start", "matrix completion always starts from R p q^T");
  }
  c.power_tol = get_optional<double>(j, "", "power_tol").value_or(c.power_tol);
  c.power_max_iter = get_optional<int>(j, "", "power_max_iter").value_or(c.power_max_iter);
  if (!(c.power_tol > 0.0)) throw ConfigError("power_tol", "must be > 0");
  if (c.power_max_iter < 1) throw ConfigError("power_max_iter", "must be >= 1");

  if (j.contains("fstar_policy")) {
    const auto& f = j.at("fstar_policy");
    check_keys(f, "fstar_policy", {"type", "iters", "value"});
    c.fstar.type = get_field<std::string>(f, "fstar_policy", "type");
    if (c.fstar.type == "reference_run") {
      c.fstar.iters = get_field<std::int64_t>(f, "fstar_policy", "iters");
      if (c.fstar.iters < 1) throw ConfigError("fstar_policy.iters", "must be >= 1");
    } else if (c.fstar.type == "value") {
      c.fstar.value = get_field<double>(f, "fstar_policy", "value");
    } else if (c.fstar.type != "analytic" && c.fstar.type != "none") {
      throw ConfigError("fstar_policy.type", "unknown policy '" + c.fstar.type + "'");
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Everything a run needs after data loading and problem generation.
struct BuiltExperiment {
  std::string problem;
  std::optional<Objective> objective;
  std::optional<FeasibleSet> set;
  std::optional<NuclearSpace> space;
  DenseVector x0;
  std::optional<FactoredMatrix> X0;
  std::optional<DenseVector> x_star;
  std::optional<double> f_star_analytic;
  std::string constraint;
};

inline BuiltExperiment build_experiment(const ExperimentConfig& c) {
  BuiltExperiment b;
  const auto& pc = c.problem;
  const auto& cc = c.constraint;
  std::ostringstream desc;
  desc.precision(17);
  Index dim = 0;

  auto make_set = [&](Index d) -> std::optional<FeasibleSet> {
    if (cc.type == "l2") return FeasibleSet::l2_ball(cc.radius, d);
    if (cc.type == "l1") return FeasibleSet::l1_ball(cc.radius, d);
    if (cc.type == "lp") return FeasibleSet::lp_ball(cc.radius, cc.p, d);
    return std::nullopt;
  };

  if (pc.type == "quadratic") {
    const std::uint64_t cseed = pc.center_seed.value_or(c.seed.value);
    const DenseVector center = random_center(pc.dim, pc.center_norm, derive_seed(Seed{cseed}, 1));
    b.objective = quadratic_objective(center, pc.scale);
    dim = pc.dim;
    desc << "quadratic(dim=" << pc.dim << ",center_norm=" << pc.center_norm
         << ",scale=" << pc.scale << ",center_seed=" << cseed << ")";
    b.set = make_set(dim);
    if (cc.type == "none") {
      b.x_star = center;
    } else if (cc.type == "l2") {
      b.x_star = project_l2(center, cc.radius);
    } else if (cc.type == "l1") {
      b.x_star = project_l1(center, cc.radius);
    }
    if (b.x_star) b.f_star_analytic = b.objective->value(*b.x_star);
  } else if (pc.type == "logistic" || pc.type == "logistic_synthetic") {
    if (pc.type == "logistic") {
      const auto data = parse_libsvm(std::filesystem::path(pc.path), pc.feature_dim);
      b.objective = logistic_objective(data.problem(), c.seed);
      desc << "logistic(path=" << pc.path << ",n=" << data.features.rows()
           << ",d=" << data.features.cols() << ")";
    } else {
      const auto problem = random_logistic_problem(pc.samples, pc.features, c.seed);
      b.objective = logistic_objective(problem, c.seed);
      desc << "logistic_synthetic(n=" << pc.samples << ",d=" << pc.features
           << ",seed=" << c.seed.value << ")";
    }
    dim = b.objective->dim();
    b.set = make_set(dim);
  } else {
    PowerOptions power{c.power_tol, c.power_max_iter, derive_seed(c.seed, 3)};
    double radius = cc.radius;
    if (pc.type == "matcomp") {
      const auto data = parse_movielens(std::filesystem::path(pc.path), pc.rating_scale);
      b.space.emplace(data.problem(), radius, power);
      desc << "matcomp(path=" << pc.path << ",m=" << data.n_users << ",n=" << data.n_items
           << ",observed=" << data.ratings.nnz() << ")";
    } else {
      const auto inst = random_low_rank_completion(pc.rows, pc.cols, pc.rank,
                                                   pc.observed_fraction, c.seed);
      if (cc.radius_from_truth) radius = inst.nuclear_norm;
      b.space.emplace(inst.problem, radius, power);
      if (radius >= inst.nuclear_norm) b.f_star_analytic = 0.0;
      desc << "matcomp_synthetic(m=" << pc.rows << ",n=" << pc.cols << ",rank=" << pc.rank
           << ",observed_fraction=" << pc.observed_fraction << ",seed=" << c.seed.value << ")";
    }
    b.X0 = b.space->initial_point();
    b.problem = desc.str();
    b.constraint = b.space->describe();
    return b;
  }

  b.problem = desc.str();
  b.constraint = b.set ? b.set->describe() : "unconstrained";
  const std::string start = c.start.empty() ? (pc.type == "quadratic" ? "random" : "zero") : c.start;
  if (start == "zero" || !b.set) {
    b.x0 = DenseVector::Zero(dim);
    if (start == "random" && !b.set) {
      Rng rng = make_rng(derive_seed(c.seed, 2));
      b.x0 = random_gaussian(dim, rng);
    }
  } else {
    Rng rng = make_rng(derive_seed(c.seed, 2));
    b.x0 = random_feasible_point(*b.set, rng);
  }
  return b;
}

inline SolverTrace run_cell(const ExperimentConfig& c, const BuiltExperiment& b,
                            const std::string& algorithm, std::int64_t iters) {
  StoppingRule stop;
  stop.max_iters = iters;
  TraceOptions opts;
  opts.diagnostics = c.diagnostics;
  opts.wall_time = c.record_wall_time;
  opts.rank_samples = b.space.has_value();
  opts.problem = b.problem;
  opts.seed = c.seed.value;
  opts.x_star = b.x_star;
  if (b.space) {
    if (algorithm == "fw") return run_fw(*b.space, *b.X0, Schedule::fw_classic(), stop, opts);
    return run_afw(*b.space, *b.X0, Schedule::afw_shifted(), stop, opts);
  }
  if (algorithm == "fw") return run_fw(*b.objective, *b.set, b.x0, Schedule::fw_classic(), stop, opts);
  if (algorithm == "afw") {
    return run_afw(*b.objective, *b.set, b.x0, Schedule::afw_shifted(), stop, opts);
  }
  if (algorithm == "agm") {
    SolverTrace t = run_agm(*b.objective, b.x0, stop, b.set ? &*b.set : nullptr, opts);
    t.meta.problem = b.problem;
    return t;
  }
  if (algorithm == "agm_sc") return run_agm_sc(*b.objective, b.x0, stop, opts);
  return run_projected_gd(*b.objective, *b.set, b.x0, stop, opts);
}

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  bool quiet = false;
};

namespace detail {

inline nlohmann::json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline double min_f(const SolverTrace& t) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : t.rows) m = std::min(m, r.f_value);
  return m;
}

}  // namespace detail

/// Runs every algorithm cell of the config (concurrently), writes one trace
/// per cell and summary.json. Returns an exit code.
inline int cmd_run(ExperimentConfig config, const RunOverrides& overrides, std::ostream& log,
                   std::ostream& err) {
  if (overrides.seed) config.seed = Seed{*overrides.seed};
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  try {
    const BuiltExperiment built = build_experiment(config);

    std::string policy = config.fstar.type;
    if (policy.empty()) policy = built.f_star_analytic ? "analytic" : "none";
    if (policy == "analytic" && !built.f_star_analytic) {
      throw ConfigError("fstar_policy.type", "no analytic optimum for " + built.problem + " on " +
                                                 built.constraint);
    }
    if (policy == "reference_run" && built.space && !built.f_star_analytic) {
      // reference runs for matrix problems use AFW below
    }

    std::vector<std::future<SolverTrace>> futures;
    for (const auto& a : config.algorithms) {
      futures.push_back(std::async(std::launch::async, [&, a] {
        return run_cell(config, built, a, config.iters);
      }));
    }
    std::optional<std::future<SolverTrace>> reference;
    if (policy == "reference_run") {
      const std::string ref_algorithm =
          (built.set && built.set->has_projection()) || (!built.set && !built.space) ? "agm"
                                                                                    : "afw";
      reference = std::async(std::launch::async, [&, ref_algorithm] {
        return run_cell(config, built, ref_algorithm, config.fstar.iters);
      });
    }
    std::vector<SolverTrace> traces;
    for (auto& f : futures) traces.push_back(f.get());

    std::optional<double> f_star;
    if (policy == "analytic") f_star = built.f_star_analytic;
    if (policy == "value") f_star = config.fstar.value;
    if (policy == "reference_run") {
      double m = detail::min_f(reference->get());
      for (const auto& t : traces) m = std::min(m, detail::min_f(t));
      f_star = m - kReferenceMargin;
    }

    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + config.output_dir + "'");

    nlohmann::json cells = nlohmann::json::array();
    bool rank_ok = true;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const auto& t = traces[i];
      const auto& a = config.algorithms[i];
      const std::string file = a + ".csv";
      write_trace(t, std::filesystem::path(config.output_dir) / file);

      nlohmann::json cell;
      cell["algorithm"] = a;
      cell["trace"] = file;
      cell["rows"] = t.rows.size();
      cell["final_k"] = t.last_k();
      cell["final_f"] = detail::number_or_null(t.rows.back().f_value);
      cell["final_fw_gap"] = detail::number_or_null(t.rows.back().fw_gap);
      cell["stationary"] = t.stationary;
      cell["wall_time_ns"] = t.rows.back().wall_time_ns;
      cell["final_gap"] = nullptr;
      cell["rate"] = nullptr;
      cell["rate_error"] = nullptr;
      cell["zigzag"] = nullptr;
      if (f_star) {
        cell["final_gap"] = detail::number_or_null(t.rows.back().f_value - *f_star);
        const RateWindow window = default_rate_window(t.last_k());
        try {
          cell["rate"] = to_json(estimate_rate(t, *f_star, window));
        } catch (const Error& e) {
          cell["rate_error"] = e.what();
        }
        cell["zigzag"] = detail::number_or_null(zigzag_dispersion(t, window));
      }
      if (built.space) {
        nlohmann::json ranks = nlohmann::json::array();
        bool ok = true;
        for (const auto& s : t.rank_samples) {
          const bool holds = s.rank <= s.k + 1 && static_cast<std::int64_t>(s.atoms) <= s.k + 1;
          ok = ok && holds;
          ranks.push_back({{"k", s.k}, {"rank", s.rank}, {"atoms", s.atoms}, {"bound_holds", holds}});
        }
        cell["rank_samples"] = ranks;
        cell["rank_bound_holds"] = ok;
        rank_ok = rank_ok && ok;
      }
      cells.push_back(cell);

      if (!overrides.quiet) {
        log << std::setw(7) << std::left << a << " k=" << t.last_k()
            << " f=" << format_double(t.rows.back().f_value);
        if (f_star) log << " gap=" << format_double(t.rows.back().f_value - *f_star);
        if (cell["rate"].is_object()) log << " slope=" << cell["rate"]["slope"].get<double>();
        if (built.space) log << " rank_bound=" << (cell["rank_bound_holds"].get<bool>() ? "ok" : "VIOLATED");
        log << '\n';
      }
    }

    nlohmann::json summary;
    summary["schema_version"] = kSummarySchemaVersion;
    summary["name"] = config.name;
    summary["problem"] = built.problem;
    summary["constraint"] = built.constraint;
    summary["seed"] = config.seed.value;
    summary["iters"] = config.iters;
    summary["f_star"] = f_star ? detail::number_or_null(*f_star) : nlohmann::json(nullptr);
    summary["f_star_source"] = policy;
    summary["cells"] = cells;
    const auto summary_path = std::filesystem::path(config.output_dir) / "summary.json";
    std::ofstream out(summary_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + summary_path.string() + "'");
    out << summary.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + summary_path.string() + "'");
    if (!rank_ok) {
      err << "rank(X_k) <= k+1 violated at a log point\n";
      return exit_code::kFailure;
    }
    return exit_code::kOk;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return exit_code::kConfig;
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return exit_code::kIo;
  } catch (const MalformedLine& e) {
    err << e.what() << '\n';
    return exit_code::kIo;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code::kFailure;
  }
}

inline int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides,
                   std::ostream& log, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return exit_code::kConfig;
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return exit_code::kIo;
  }
  return cmd_run(std::move(config), overrides, log, err);
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

/// Checkpoints 1, 10, 100, ... up to the shortest trace, plus its last k.
inline std::vector<std::int64_t> comparison_checkpoints(std::int64_t k_max) {
  std::vector<std::int64_t> ks;
  for (std::int64_t k = 1; k <= k_max; k *= 10) ks.push_back(k);
  if (ks.empty() || ks.back() != k_max) ks.push_back(k_max);
  return ks;
}

/// Gap-at-k, ratio-to-first, iterations-to-tolerance and slope for traces
/// over the same problem. Throws MetadataMismatch otherwise.
inline nlohmann::json compare_traces(const std::vector<SolverTrace>& traces,
                                     const std::vector<std::string>& names, double f_star,
                                     double tol) {
  if (traces.size() < 2) throw InvalidArgument("compare needs at least two traces");
  for (std::size_t i = 1; i < traces.size(); ++i) {
    if (traces[i].meta.problem != traces[0].meta.problem ||
        traces[i].meta.constraint != traces[0].meta.constraint) {
      throw MetadataMismatch("'" + names[i] + "' (" + traces[i].meta.problem + " on " +
                             traces[i].meta.constraint + ") does not match '" + names[0] + "' (" +
                             traces[0].meta.problem + " on " + traces[0].meta.constraint + ")");
    }
  }
  std::int64_t k_max = std::numeric_limits<std::int64_t>::max();
  for (const auto& t : traces) {
    if (t.rows.empty()) throw InvalidArgument("compare: empty trace");
    k_max = std::min(k_max, t.last_k());
  }
  const auto ks = comparison_checkpoints(k_max);

  auto gap_at = [&](const SolverTrace& t, std::int64_t k) {
    for (const auto& r : t.rows) {
      if (r.k == k) return r.f_value - f_star;
    }
    return std::numeric_limits<double>::quiet_NaN();
  };

  nlohmann::json out;
  out["f_star"] = f_star;
  out["tolerance"] = tol;
  out["checkpoints"] = ks;
  out["problem"] = traces[0].meta.problem;
  out["constraint"] = traces[0].meta.constraint;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    nlohmann::json row;
    row["name"] = names[i];
    row["algorithm"] = t.meta.algorithm;
    nlohmann::json gaps = nlohmann::json::array();
    nlohmann::json ratios = nlohmann::json::array();
    for (auto k : ks) {
      const double g = gap_at(t, k);
      const double ref = gap_at(traces[0], k);
      gaps.push_back(detail::number_or_null(g));
      if (ref == g) {
        ratios.push_back(1.0);
      } else {
        ratios.push_back(detail::number_or_null(g / ref));
      }
    }
    row["gap_at_k"] = gaps;
    row["ratio_to_first"] = ratios;
    row["iterations_to_tolerance"] = nullptr;
    for (const auto& r : t.rows) {
      if (r.f_value - f_star <= tol) {
        row["iterations_to_tolerance"] = r.k;
        break;
      }
    }
    row["slope"] = nullptr;
    try {
      row["slope"] = estimate_rate(t, f_star, default_rate_window(t.last_k())).slope;
    } catch (const Error&) {
    }
    rows.push_back(row);
  }
  out["traces"] = rows;
  return out;
}

inline void print_comparison(const nlohmann::json& cmp, std::ostream& out) {
  auto fmt = [](const nlohmann::json& v) -> std::string {
    if (v.is_null()) return "-";
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    std::ostringstream s;
    s << std::setprecision(4) << v.get<double>();
    return s.str();
  };
  out << "f* = " << format_double(cmp["f_star"].get<double>())
      << ", tolerance = " << fmt(cmp["tolerance"]) << '\n';
  out << std::left << std::setw(16) << "trace";
  for (const auto& k : cmp["checkpoints"]) out << std::setw(12) << ("gap@" + fmt(k));
  for (const auto& k : cmp["checkpoints"]) out << std::setw(12) << ("ratio@" + fmt(k));
  out << std::setw(10) << "iters_tol" << "slope\n";
  for (const auto& row : cmp["traces"]) {
    out << std::setw(16) << row["name"].get<std::string>();
    for (const auto& g : row["gap_at_k"]) out << std::setw(12) << fmt(g);
    for (const auto& r : row["ratio_to_first"]) out << std::setw(12) << fmt(r);
    out << std::setw(10) << fmt(row["iterations_to_tolerance"]) << fmt(row["slope"]) << '\n';
  }
}

struct CompareOptions {
  std::vector<std::filesystem::path> traces;
  std::optional<double> f_star;
  std::optional<std::filesystem::path> summary;  // reads its f_star
  double tolerance = 1e-4;
  std::optional<std::filesystem::path> json_out;
  bool quiet = false;
};

inline int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (opts.traces.size() < 2) throw ConfigError("traces", "compare needs at least two traces");
    std::vector<SolverTrace> traces;
    std::vector<std::string> names;
    for (const auto& p : opts.traces) {
      traces.push_back(read_trace(p));
      names.push_back(p.stem().string());
    }
    double f_star = 0.0;
    if (opts.f_star) {
      f_star = *opts.f_star;
    } else if (opts.summary) {
      std::ifstream in(*opts.summary);
      if (!in) throw IoError("cannot open summary '" + opts.summary->string() + "'");
      nlohmann::json s;
      try {
        in >> s;
      } catch (const nlohmann::json::exception& e) {
        throw SchemaMismatch(opts.summary->string() + ": " + e.what());
      }
      if (!s.contains("f_star") || !s["f_star"].is_number()) {
        throw ConfigError("summary.f_star", "summary has no numeric f_star");
      }
      f_star = s["f_star"].get<double>();
    } else {
      f_star = std::numeric_limits<double>::infinity();
      for (const auto& t : traces) f_star = std::min(f_star, detail::min_f(t));
      f_star -= kReferenceMargin;
    }
    const auto cmp = compare_traces(traces, names, f_star, opts.tolerance);
    if (!opts.quiet) print_comparison(cmp, out);
    if (opts.json_out) {
      std::ofstream j(*opts.json_out, std::ios::binary | std::ios::trunc);
      if (!j) throw IoError("cannot write '" + opts.json_out->string() + "'");
      j << cmp.dump(2) << '\n';
    }
    return exit_code::kOk;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return exit_code::kConfig;
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return exit_code::kIo;
  } catch (const SchemaMismatch& e) {
    err << e.what() << '\n';
    return exit_code::kIo;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code::kFailure;
  }
}

}  // namespace afw
