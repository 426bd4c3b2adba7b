// mcurv: radial Minkowski mean-curvature solver front end.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "mcurv/continuation.hpp"
#include "mcurv/io.hpp"
#include "mcurv/regularization.hpp"
#include "mcurv/shooting.hpp"
#include "mcurv/spectrum.hpp"

namespace fs = std::filesystem;
using namespace mcurv;
using json = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0, kUsage = 1, kNumeric = 2, kHypothesis = 3;

struct RunConfig {
  std::string problem;
  std::string out = ".";
  int k = 1;
  std::string nu;
  double lambda = 0.0;
  double lambda_min = 0.0, lambda_max = 0.0;
  int lambda_steps = 16;
  int d_grid = 160;
  double tol_rel = 1e-10, tol_abs = 1e-12;
  int workers = 1;
  std::string format = "csv";
};

struct HypothesisViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ShootingOptions shooting_options(const RunConfig& c) {
  ShootingOptions o;
  o.integrator.tol = {c.tol_rel, c.tol_abs};
  o.workers = c.workers;
  return o;
}

std::vector<Sign> signs(const RunConfig& c) {
  if (c.nu.empty()) return {Sign::Plus, Sign::Minus};
  return {c.nu == "-" ? Sign::Minus : Sign::Plus};
}

Sign one_sign(const RunConfig& c) { return c.nu == "-" ? Sign::Minus : Sign::Plus; }

HypothesisReport require_a1(const ProblemSpec& spec) {
  const auto rep = validate_hypotheses(spec);
  if (!rep.a1) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "sign condition f(r,s)s > 0 fails at r=%.6g s=%.6g", rep.worst_r,
                  rep.worst_s);
    throw HypothesisViolation(buf);
  }
  return rep;
}

void emit(const RunConfig& c, const std::string& stem, const Table& t, const Provenance& prov,
          const json& summary = json()) {
  const fs::path dir(c.out);
  if (c.format == "json") {
    json data;
    data["rows"] = table_json(t);
    if (!summary.is_null()) data["summary"] = summary;
    write_text(dir / (stem + ".json"), render_json(data, prov));
  } else {
    write_text(dir / (stem + ".csv"), render_csv(t, prov));
    if (!summary.is_null()) write_text(dir / (stem + "_summary.json"), render_json(summary, prov));
  }
}

Provenance prov_for(const RunConfig& c, const std::string& cmd, const ProblemSpec& spec) {
  auto p = make_provenance(cmd, spec, c.tol_rel, c.tol_abs, c.workers);
  p.extra["k"] = c.k;
  p.extra["nu"] = c.nu.empty() ? "both" : c.nu;
  p.extra["d_grid"] = c.d_grid;
  return p;
}

int run_spectrum(const RunConfig& c) {
  const auto spec = parse_problem(c.problem);
  const auto rep = require_a1(spec);
  if (!rep.a2_usable() || !spec.f.has_linear_weight())
    throw HypothesisViolation("the linearization weight m is unavailable or degenerate");
  const int count = std::max(1, c.k);
  Table t{{"k", "lambda", "zeros", "method", "residual"}, {}};
  std::vector<EigenSet> sets{eigen_prufer(spec, count)};
  if (spec.inner_radius > 0.0) {
    const Nonlinearity f = spec.f;
    sets.push_back(eigen_nystrom([f](double r) { return *f.linear_weight(r); }, spec.dimension,
                                 spec.inner_radius, spec.outer_radius, count));
  }
  for (const auto& s : sets)
    for (const auto& e : s.values)
      t.add({std::to_string(e.k), fmt17(e.lambda), std::to_string(e.zeros), to_string(e.method),
             fmt17(e.residual)});
  emit(c, "spectrum", t, prov_for(c, "spectrum", spec));
  return kOk;
}

int run_solve(const RunConfig& c) {
  const auto spec = parse_problem(c.problem);
  require_a1(spec);
  const double lambda = c.lambda > 0.0 ? c.lambda : spec.lambda;
  if (!(lambda > 0.0)) throw Error(ErrorCode::Malformed, "solve needs --lambda or lambda in the problem file");
  const auto opt = shooting_options(c);
  const auto grid = default_amplitude_grid(spec, c.d_grid);
  Table meta{{"lambda", "k", "nu", "d", "sup_u", "sup_du", "c1_norm", "terminal", "zeros"}, {}};
  Table prof{{"solution", "r", "u", "du"}, {}};
  json failures = json::array();
  std::vector<SolutionProfile> all;
  for (Sign nu : signs(c)) {
    const auto res = solve_all(lambda, spec, NodalSignature(c.k, nu), grid, opt);
    for (const auto& f : res.failures) failures.push_back(f);
    all.insert(all.end(), res.solutions.begin(), res.solutions.end());
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.d < b.d; });
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& p = all[i];
    std::string zs;
    for (double z : p.zeros) zs += (zs.empty() ? "" : ";") + fmt17(z);
    meta.add({fmt17(p.lambda), std::to_string(p.signature.k), std::string(1, to_char(p.signature.nu)),
              fmt17(p.d), fmt17(p.sup_u), fmt17(p.sup_du), fmt17(p.c1_norm), fmt17(p.terminal), zs});
    for (std::size_t j = 0; j < p.r.size(); ++j)
      prof.add({std::to_string(i), fmt17(p.r[j]), fmt17(p.u[j]), fmt17(p.du[j])});
  }
  auto prov = prov_for(c, "solve", spec);
  prov.extra["lambda"] = lambda;
  json summary;
  summary["solutions"] = all.size();
  summary["failures"] = failures;
  emit(c, "solutions", meta, prov, summary);
  emit(c, "profiles", prof, prov);
  return kOk;
}

int run_branch(const RunConfig& c) {
  const auto spec = parse_problem(c.problem);
  const auto rep = require_a1(spec);
  ContinuationOptions copt;
  copt.shooting = shooting_options(c);
  copt.shooting.workers = 1;
  if (c.lambda_max > 0.0) copt.lambda_cap = c.lambda_max;
  const NodalSignature target(c.k, one_sign(c));

  Branch br;
  if (rep.a2_usable() && spec.f.has_linear_weight()) {
    const auto seed = seed_from_eigenvalue(spec, c.k, target.nu, 0.0, copt.shooting);
    br = continue_branch(seed.point, spec, copt, BranchOrigin::EigenvalueBifurcation, seed.eigenvalue);
  } else {
    const double lambda = c.lambda > 0.0 ? c.lambda : (spec.lambda > 0.0 ? spec.lambda : 1.0);
    const auto res = solve_all(lambda, spec, target, default_amplitude_grid(spec, c.d_grid), copt.shooting);
    if (res.solutions.empty())
      throw Error(ErrorCode::SeedFailure, "no " + target.str() + " solution at lambda " + fmt17(lambda));
    const auto seed = std::min_element(res.solutions.begin(), res.solutions.end(), [](const auto& a, const auto& b) {
      return std::abs(a.d) < std::abs(b.d);
    });
    if (rep.a3) {
      copt.lambda_floor = 1e-4 * lambda;
      br = trace_both_ways(to_branch_point(*seed), spec, copt, BranchOrigin::ZeroLambdaOrigin, 0.0);
    } else {
      br = trace_both_ways(to_branch_point(*seed), spec, copt, BranchOrigin::UserSeed, 0.0);
    }
  }
  Table t{{"index", "lambda", "d", "sup_u", "sup_du", "k", "nu", "fold"}, {}};
  for (std::size_t i = 0; i < br.points.size(); ++i) {
    const auto& p = br.points[i];
    t.add({std::to_string(i), fmt17(p.lambda), fmt17(p.d), fmt17(p.sup_u), fmt17(p.sup_du),
           std::to_string(p.signature.k), std::string(1, to_char(p.signature.nu)), p.fold ? "1" : "0"});
  }
  json summary;
  summary["origin"] = to_string(br.origin);
  summary["origin_lambda"] = br.origin_lambda;
  summary["termination"] = to_string(br.termination);
  if (br.start_termination) summary["start_termination"] = to_string(*br.start_termination);
  summary["lambda_star"] = lambda_star(br);
  summary["proj_lambda"] = {br.lambda_min, br.lambda_max};
  json folds = json::array();
  for (const auto& f : br.folds) folds.push_back({{"index", f.index}, {"lambda", f.lambda}, {"d", f.d}});
  summary["folds"] = folds;
  summary["points"] = br.points.size();
  summary["log"] = br.log;
  emit(c, "branch", t, prov_for(c, "branch", spec), summary);
  return kOk;
}

int run_sweep(const RunConfig& c) {
  const auto spec = parse_problem(c.problem);
  require_a1(spec);
  if (!(c.lambda_min > 0.0 && c.lambda_max > c.lambda_min) || c.lambda_steps < 8)
    throw Error(ErrorCode::Malformed, "sweep needs 0 < --lambda-min < --lambda-max and --lambda-steps >= 8");
  std::vector<double> grid;
  for (int i = 0; i < c.lambda_steps; ++i)
    grid.push_back(c.lambda_min + (c.lambda_max - c.lambda_min) * i / (c.lambda_steps - 1));
  std::vector<NodalSignature> sigs;
  for (Sign nu : signs(c)) sigs.emplace_back(c.k, nu);
  const auto cells = sweep_diagram(spec, grid, sigs, default_amplitude_grid(spec, c.d_grid), shooting_options(c));
  Table counts{{"lambda", "k", "nu", "count"}, {}};
  Table sols{{"lambda", "k", "nu", "d", "sup_u", "sup_du", "c1_norm"}, {}};
  json errors = json::array();
  for (const auto& cell : cells) {
    const std::string k = std::to_string(cell.signature.k), nu(1, to_char(cell.signature.nu));
    counts.add({fmt17(cell.lambda), k, nu, std::to_string(cell.count())});
    for (const auto& s : cell.solutions)
      sols.add({fmt17(cell.lambda), k, nu, fmt17(s.d), fmt17(s.sup_u), fmt17(s.sup_du), fmt17(s.c1_norm)});
    for (const auto& e : cell.errors) errors.push_back({{"lambda", cell.lambda}, {"signature", cell.signature.str()}, {"error", e}});
  }
  auto prov = prov_for(c, "sweep", spec);
  prov.extra["lambda_grid"] = grid;
  emit(c, "sweep_counts", counts, prov, json{{"errors", errors}});
  emit(c, "sweep_solutions", sols, prov);
  return kOk;
}

int run_limits(const RunConfig& c) {
  const auto spec = parse_problem(c.problem);
  const auto rep = require_a1(spec);
  auto prov = prov_for(c, "limits", spec);
  bool any = false;
  if (rep.a3) {
    any = true;
    const double lambda = c.lambda > 0.0 ? c.lambda : 1.0;
    const int n_max = std::max(c.k, 4);
    const auto st = limit_study_nodal_families(spec, lambda, n_max, default_amplitude_grid(spec, c.d_grid),
                                            shooting_options(c));
    Table t{{"n", "nu", "count", "d", "sup_u", "sup_du", "c1_norm", "error"}, {}};
    for (const auto& r : st.rows)
      t.add({std::to_string(r.n), std::string(1, to_char(r.nu)), std::to_string(r.count), fmt17(r.d),
             fmt17(r.sup_u), fmt17(r.sup_du), fmt17(r.c1_norm), r.error});
    json summary{{"lambda", lambda},
                 {"n_max", n_max},
                 {"eventually_decreasing", {st.eventually_decreasing_plus, st.eventually_decreasing_minus}},
                 {"last_over_first", {st.ratio_plus, st.ratio_minus}}};
    emit(c, "limits_nodal_families", t, prov, summary);

    ContinuationOptions copt;
    copt.shooting = shooting_options(c);
    copt.shooting.workers = 1;
    const std::vector<int> ladder{4, 16, 64, 256};
    const auto rows = limit_study_slope_cap(spec, 1, one_sign(c), ladder, copt, c.workers);
    Table t2{{"n", "eigenvalue", "seed_lambda", "branch_min_lambda", "branch_points", "error"}, {}};
    for (const auto& r : rows)
      t2.add({std::to_string(r.n), fmt17(r.eigenvalue), fmt17(r.seed_lambda), fmt17(r.branch_min_lambda),
              std::to_string(r.branch_points), r.error});
    emit(c, "limits_slope_cap", t2, prov, json{{"ladder", ladder}});
  }
  if (rep.a2_usable() && spec.f.has_linear_weight() && spec.inner_radius == 0.0) {
    any = true;
    const Nonlinearity f = spec.f;
    const std::vector<int> ladder{4, 16, 64, 256, 1024};
    Table t{{"n", "k", "eigenvalue", "difference"}, {}};
    for (int k = 1; k <= std::max(1, c.k); ++k) {
      const auto rows = shift_family_ladder([f](double r) { return *f.linear_weight(r); }, spec.dimension,
                                            spec.outer_radius, k, ladder);
      for (const auto& r : rows)
        t.add({std::to_string(r.n), std::to_string(k), fmt17(r.eigenvalue), fmt17(r.difference)});
    }
    emit(c, "limits_shift", t, prov, json{{"ladder", ladder}});
  }
  if (!any) throw HypothesisViolation("neither a usable linearization weight on a ball nor f/phi1 -> infinity");
  return kOk;
}

/// Invariant suite over the built-in stock problems.
int run_verify(const RunConfig& c) {
  Table t{{"check", "status", "value"}, {}};
  bool ok = true;
  auto record = [&](const std::string& name, bool pass, double value) {
    ok = ok && pass;
    t.add({name, pass ? "PASS" : "FAIL", fmt17(value)});
  };
  const auto opt = shooting_options(c);
  ProblemSpec cubic;
  cubic.f = Nonlinearity::linear_plus_cubic(Weight::constant(1), 1);
  const double pi2 = std::numbers::pi * std::numbers::pi;

  const auto eig = eigen_prufer(cubic, 3);
  double worst = 0.0;
  for (int k = 1; k <= 3; ++k) worst = std::max(worst, std::abs(eig[k - 1] / (k * k * pi2) - 1.0));
  record("ball_spectrum_closed_form", worst < 1e-8, worst);

  const auto trivial = shoot(0.0, 30.0, cubic, opt);
  record("trivial_shot", trivial.trajectory.sup_abs_u < 1e-14, trivial.trajectory.sup_abs_u);

  const auto grid = default_amplitude_grid(cubic, c.d_grid);
  const auto p = solve_all(1.3 * pi2, cubic, NodalSignature(1, Sign::Plus), grid, opt);
  const auto m = solve_all(1.3 * pi2, cubic, NodalSignature(1, Sign::Minus), grid, opt);
  double mirror = kInfinity;
  if (!p.solutions.empty() && !m.solutions.empty())
    mirror = std::abs(p.solutions.front().d + m.solutions.back().d);
  record("odd_symmetry", mirror < 1e-8, mirror);

  std::size_t accepted = 0, violations = 0;
  for (const auto* set : {&p, &m})
    for (const auto& s : set->solutions) {
      ++accepted;
      if (!(s.sup_du < 1.0 && s.sup_u < cubic.span())) ++violations;
    }
  record("a_priori_bounds", accepted > 0 && violations == 0, static_cast<double>(violations));

  const auto below = time_map_scan(0.5 * pi2, cubic, grid, NodalSignature(1, Sign::Plus), opt);
  record("no_solution_below_threshold", below.empty(), static_cast<double>(below.brackets.size()));

  ContinuationOptions copt;
  copt.shooting = opt;
  copt.shooting.workers = 1;
  const auto seed = seed_from_eigenvalue(cubic, 2, Sign::Plus, 0.0, copt.shooting);
  const auto br = continue_branch(seed.point, cubic, copt, BranchOrigin::EigenvalueBifurcation, seed.eigenvalue);
  record("nodal_invariance", branch_invariants_hold(br, cubic.span()), static_cast<double>(br.points.size()));

  const RunConfig& cfg = c;
  write_text(fs::path(cfg.out) / "verify.csv",
             render_csv(t, make_provenance("verify", cubic, c.tol_rel, c.tol_abs, c.workers)));
  for (const auto& row : t.rows) std::cout << row[1] << " " << row[0] << " " << row[2] << "\n";
  return ok ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial Minkowski mean-curvature bifurcation toolkit"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub, bool needs_problem) {
    auto* opt = sub->add_option("--problem", cfg.problem, "problem file (key = value lines)");
    if (needs_problem) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--k", cfg.k, "nodal index k (or eigenvalue count / n_max)")->check(CLI::PositiveNumber);
    sub->add_option("--nu", cfg.nu, "sign of the first arch")->check(CLI::IsMember({"+", "-"}));
    sub->add_option("--lambda", cfg.lambda, "lambda for solve, branch seeds and limits")->check(CLI::PositiveNumber);
    sub->add_option("--lambda-min", cfg.lambda_min, "sweep lower lambda");
    sub->add_option("--lambda-max", cfg.lambda_max, "sweep upper lambda / branch lambda cap");
    sub->add_option("--lambda-steps", cfg.lambda_steps, "sweep lambda grid size (>= 8)");
    sub->add_option("--d-grid", cfg.d_grid, "amplitude grid size (>= 32)")->check(CLI::Range(32, 100000));
    sub->add_option("--tol-rel", cfg.tol_rel, "integrator relative tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--tol-abs", cfg.tol_abs, "integrator absolute tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--workers", cfg.workers, "worker threads")->check(CLI::Range(1, 256));
    sub->add_option("--format", cfg.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  };

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&);
    bool needs_problem;
  };
  const Cmd cmds[] = {
      {"solve", "all nodal solutions at fixed lambda", run_solve, true},
      {"spectrum", "weighted eigenvalues of the linearization", run_spectrum, true},
      {"branch", "continue a nodal branch in (lambda, d)", run_branch, true},
      {"sweep", "solution counts over a lambda grid", run_sweep, true},
      {"limits", "regularization limit studies", run_limits, true},
      {"verify", "invariant suite on stock problems", run_verify, false},
  };
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub, cmd.needs_problem);
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    try {
      return cmd->fn(cfg);
    } catch (const HypothesisViolation& e) {
      std::cerr << "hypothesis violation: " << e.what() << "\n";
      return kHypothesis;
    } catch (const Error& e) {
      std::cerr << e.what() << "\n";
      if (e.is_usage()) return kUsage;
      if (e.code() == ErrorCode::WeightVanishes) return kHypothesis;
      return kNumeric;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kNumeric;
    }
  }
  return kUsage;
}
