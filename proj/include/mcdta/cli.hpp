#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcdta/artifacts.hpp"
#include "mcdta/core.hpp"
#include "mcdta/optimality.hpp"
#include "mcdta/recover.hpp"
#include "mcdta/relax.hpp"
#include "mcdta/scenario.hpp"
#include "mcdta/sim.hpp"
#include "mcdta/solve.hpp"

namespace mcdta {

// Certification thresholds used by optimize and verify.
inline constexpr double kTightStateTol = 1e-7;
inline constexpr double kTightGammaTol = 1e-9;
inline constexpr double kTightCostTol = 1e-7;

namespace cli_detail {

inline int exit_code(const ScenarioError& e) {
  std::cerr << "[" << (e.kind() == ScenarioError::Kind::Parse      ? "parse"
                       : e.kind() == ScenarioError::Kind::Semantic ? "semantic"
                                                                   : "cfl")
            << "] " << e.what() << "\n";
  switch (e.kind()) {
    case ScenarioError::Kind::Parse: return 1;
    case ScenarioError::Kind::Semantic: return 2;
    case ScenarioError::Kind::Cfl: return 3;
  }
  return 2;
}

inline ControlSequence uncontrolled(const Scenario& sc) {
  return ControlSequence::constant(
      CellCommodityMatrix(sc.net.num_cells(), sc.net.num_commodities(), 1.0),
      sc.default_routing);
}

inline std::vector<double> total_volume_series(
    const Network& net, const std::vector<CellCommodityMatrix>& x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& m : x) {
    double s = 0.0;
    for (CommodityId k = 0; k < net.num_commodities(); ++k)
      for (CellId i : net.cells_of(k)) s += m(i, k);
    out.push_back(s);
  }
  return out;
}

inline std::vector<double> time_grid(const Scenario& sc, std::size_t count) {
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) t[i] = i * sc.cfg.h;
  return t;
}

inline std::string join_path(const std::string& dir,
                             const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace cli_detail

inline int cmd_validate(const std::string& scenario_path) {
  Scenario sc;
  try {
    sc = load_scenario_file(scenario_path);
  } catch (const ScenarioError& e) {
    return cli_detail::exit_code(e);
  }
  std::cout << "scenario ok: " << sc.net.num_cells() << " cells, "
            << sc.net.num_commodities() << " commodities, "
            << sc.net.total_arcs() << " arcs, " << sc.cfg.steps
            << " steps of h=" << sc.cfg.h << "\n";
  return 0;
}

inline int cmd_simulate(const std::string& scenario_path,
                        const std::string& controls_path, bool uncontrolled,
                        const std::string& out_dir) {
  Scenario sc;
  ControlSequence controls;
  try {
    sc = load_scenario_file(scenario_path);
    if (uncontrolled || controls_path.empty()) {
      controls = cli_detail::uncontrolled(sc);
    } else {
      std::ifstream in(controls_path);
      if (!in) {
        std::cerr << "[parse] cannot open controls file '" << controls_path
                  << "'\n";
        return 1;
      }
      Json doc;
      try {
        doc = Json::parse(in);
      } catch (const Json::exception& e) {
        std::cerr << "[parse] " << e.what() << "\n";
        return 1;
      }
      controls = controls_from_json(sc, doc);
      if (static_cast<int>(controls.alpha.size()) != sc.cfg.steps &&
          controls.alpha.size() != 1) {
        std::cerr << "[semantic] controls cover "
                  << controls.alpha.size() << " steps, scenario has "
                  << sc.cfg.steps << "\n";
        return 2;
      }
    }
  } catch (const ScenarioError& e) {
    return cli_detail::exit_code(e);
  }

  Trajectory traj;
  try {
    traj = simulate(sc.net, sc.fd, sc.x0, controls, sc.inflow, sc.cfg);
  } catch (const CflViolation& e) {
    std::cerr << "[cfl] " << e.what() << "\n";
    return 3;
  }
  double J = cost_of_trajectory(sc.net, sc.cost, traj);

  std::filesystem::create_directories(out_dir);
  write_states_csv(cli_detail::join_path(out_dir, "states.csv"), sc, traj.x,
                   total_outflows(sc.net, traj));
  write_flows_csv(cli_detail::join_path(out_dir, "flows.csv"), sc, traj);

  auto totals = cli_detail::total_volume_series(sc.net, traj.x);
  auto times = cli_detail::time_grid(sc, totals.size());
  {
    auto out = detail::open_out(cli_detail::join_path(out_dir, "volume.csv"));
    out << "step,time,total_volume\n";
    for (std::size_t t = 0; t < totals.size(); ++t)
      out << t << ',' << fmt_double(times[t]) << ',' << fmt_double(totals[t])
          << '\n';
  }
  write_svg_chart(cli_detail::join_path(out_dir, "volume.svg"),
                  "total volume", {{"simulated", "#1f77b4", times, totals}});
  std::cout << "J = " << fmt_double(J) << "\n";
  return 0;
}

inline int cmd_optimize(const std::string& scenario_path,
                        const std::string& out_dir, double tol, int max_iters,
                        const std::string& plot_cell,
                        const std::string& lp_dump) {
  Scenario sc;
  try {
    sc = load_scenario_file(scenario_path);
  } catch (const ScenarioError& e) {
    return cli_detail::exit_code(e);
  }

  ProgramIR ir = discretize(sc.net, sc.fd, sc.cost, sc.x0, sc.inflow, sc.cfg);
  if (!lp_dump.empty()) write_text_file(lp_dump, dump_program(ir));

  SolverOptions sopts;
  sopts.tol = tol;
  sopts.max_iters = max_iters;
  Solution sol = solve(ir.lp, sopts);
  if (sol.outcome != SolveOutcome::Optimal) {
    std::cerr << "solver: " << to_string(sol.outcome) << " after "
              << sol.iterations << " iterations\n";
    if (sol.outcome == SolveOutcome::Infeasible) {
      double worth = 0.0;
      for (std::size_t r = 0; r < sol.eq_dual.size(); ++r)
        worth += ir.lp.eq_rhs[r] * sol.eq_dual[r];
      for (std::size_t r = 0; r < sol.le_dual.size(); ++r)
        worth += ir.lp.le_rhs[r] * sol.le_dual[r];
      std::cerr << "certificate value " << fmt_double(worth)
                << " (negative proves no feasible point)\n";
    }
    return 4;
  }

  RelaxedSolution rs = from_vector(ir, sc.net, sol.v);
  RecoveredControls rec;
  try {
    rec = recover_controls(sc.net, sc.fd, ir, rs);
  } catch (const RecoverError& e) {
    std::cerr << "control recovery failed: " << e.what() << "\n";
    return 5;
  }
  TightnessReport tight = verify_tightness(sc.net, sc.fd, sc.cost, sc.inflow,
                                           sc.cfg, rs, rec.controls);
  KktReport kkt = kkt_residuals(ir, sol);

  Trajectory unc = simulate(sc.net, sc.fd, sc.x0, cli_detail::uncontrolled(sc),
                            sc.inflow, sc.cfg);
  double J_unc = cost_of_trajectory(sc.net, sc.cost, unc);

  std::filesystem::create_directories(out_dir);
  std::vector<std::string> manifest;
  auto emit = [&](const std::string& name) {
    manifest.push_back(name);
    return cli_detail::join_path(out_dir, name);
  };

  write_states_csv(emit("states.csv"), sc, rs.x, total_outflows(sc.net, rs));
  write_flows_csv(emit("flows.csv"), sc, rs.arc, rs.exit);
  {
    auto out = detail::open_out(emit("controls.json"));
    out << controls_to_json(sc, rec.controls, sc.cfg.steps).dump(1) << "\n";
  }

  auto controlled = cli_detail::total_volume_series(sc.net, tight.trajectory.x);
  auto baseline = cli_detail::total_volume_series(sc.net, unc.x);
  auto times = cli_detail::time_grid(sc, controlled.size());
  write_svg_chart(emit("volume.svg"), "total volume",
                  {{"uncontrolled", "#1f77b4", times, baseline},
                   {"optimized", "#d62728", times, controlled}});

  CellId pc = 0;
  if (!plot_cell.empty()) {
    pc = sc.cell_id(plot_cell);
  } else if (sc.cell_ids.count("2")) {
    pc = sc.cell_ids.at("2");
  }
  std::vector<SvgSeries> outflow_series;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#8c564b", "#e377c2"};
  auto step_times = cli_detail::time_grid(sc, sc.cfg.steps);
  for (CommodityId k = 0; k < sc.net.num_commodities(); ++k) {
    if (!sc.net.utilizable(k, pc)) continue;
    std::vector<double> z(sc.cfg.steps);
    for (int t = 0; t < sc.cfg.steps; ++t)
      z[t] = tight.trajectory.flows[t].total_out(pc, k);
    outflow_series.push_back({"commodity " + sc.commodity_names[k],
                              palette[k % 6], step_times, std::move(z)});
  }
  write_svg_chart(emit("outflow.svg"),
                  "outflow of cell " + sc.cell_names[pc], outflow_series);

  bool tight_ok = tight.tight(kTightStateTol, kTightGammaTol, kTightCostTol);
  Json summary = {
      {"objective",
       {{"uncontrolled", J_unc},
        {"relaxed", rs.objective},
        {"recovered", tight.cost_simulated}}},
      {"tightness",
       {{"max_state_dev", tight.max_state_dev},
        {"max_gamma_dev", tight.max_gamma_dev},
        {"cost_gap", tight.cost_gap()},
        {"max_alpha_clip", rec.max_alpha_clip},
        {"pass", tight_ok}}},
      {"kkt",
       {{"stationarity", kkt.stationarity},
        {"complementarity", kkt.complementarity},
        {"primal_feasibility", kkt.primal_feas},
        {"dual_feasibility", kkt.dual_feas},
        {"duality_gap", kkt.duality_gap},
        {"terminal_costate", kkt.terminal_costate}}},
      {"solver",
       {{"outcome", to_string(sol.outcome)},
        {"iterations", sol.iterations},
        {"rel_primal_res", sol.rel_primal_res},
        {"rel_dual_res", sol.rel_dual_res},
        {"rel_gap", sol.rel_gap},
        {"tol", tol},
        {"max_iters", max_iters}}},
      {"lp",
       {{"variables", ir.lp.num_vars},
        {"equalities", ir.lp.num_eq()},
        {"inequalities", ir.lp.num_le()}}},
      {"total_volume",
       {{"time", times},
        {"uncontrolled", baseline},
        {"controlled", controlled}}},
  };
  if (!lp_dump.empty()) summary["lp"]["dump"] = lp_dump;
  manifest.push_back("summary.json");
  summary["manifest"] = manifest;
  {
    auto out =
        detail::open_out(cli_detail::join_path(out_dir, "summary.json"));
    out << summary.dump(1) << "\n";
  }

  std::cout << "relaxed objective  " << fmt_double(rs.objective) << "\n"
            << "recovered cost     " << fmt_double(tight.cost_simulated)
            << "\n"
            << "uncontrolled cost  " << fmt_double(J_unc) << "\n"
            << "tightness          state " << fmt_double(tight.max_state_dev)
            << "  gamma " << fmt_double(tight.max_gamma_dev) << "  cost gap "
            << fmt_double(tight.cost_gap()) << (tight_ok ? "  [ok]" : "  [FAIL]")
            << "\n"
            << "kkt residual       " << fmt_double(kkt.max_abs())
            << "  terminal costate " << fmt_double(kkt.terminal_costate)
            << "\n";
  if (!tight_ok) {
    std::cerr << "tightness certificate failed\n";
    return 5;
  }
  return 0;
}

inline int cmd_verify(const std::string& scenario_path,
                      const std::string& traj_dir, double tol,
                      int max_iters) {
  Scenario sc;
  try {
    sc = load_scenario_file(scenario_path);
  } catch (const ScenarioError& e) {
    return cli_detail::exit_code(e);
  }

  std::vector<CellCommodityMatrix> x;
  FlowTable flows;
  try {
    x = read_states_csv(cli_detail::join_path(traj_dir, "states.csv"), sc);
    flows = read_flows_csv(cli_detail::join_path(traj_dir, "flows.csv"), sc);
  } catch (const IoError& e) {
    std::cerr << "[parse] " << e.what() << "\n";
    return 1;
  } catch (const ScenarioError& e) {
    return cli_detail::exit_code(e);
  }
  if (static_cast<int>(x.size()) != sc.cfg.steps + 1 ||
      static_cast<int>(flows.arc.size()) != sc.cfg.steps) {
    std::cerr << "[semantic] trajectory has " << x.size() << " states and "
              << flows.arc.size() << " flow steps, scenario needs "
              << sc.cfg.steps + 1 << " and " << sc.cfg.steps << "\n";
    return 2;
  }

  ProgramIR ir = discretize(sc.net, sc.fd, sc.cost, sc.x0, sc.inflow, sc.cfg);
  std::vector<double> v(ir.lp.num_vars, 0.0);
  for (int t = 0; t <= ir.steps; ++t)
    for (CommodityId k = 0; k < sc.net.num_commodities(); ++k)
      for (CellId i : sc.net.cells_of(k))
        v[ir.volume_col(t, k, i)] = x[t](i, k);
  for (int t = 0; t < ir.steps; ++t)
    for (CommodityId k = 0; k < sc.net.num_commodities(); ++k) {
      for (std::size_t a = 0; a < sc.net.arcs(k).size(); ++a)
        v[ir.flow_col_of(t, k, static_cast<int>(a))] = flows.arc[t][k][a];
      for (CellId i : sc.net.offramps_of(k))
        v[ir.exit_col_of(t, k, i)] = flows.exit[t](i, k);
    }

  // Feasibility with row attribution.
  double worst = 0.0;
  std::string worst_where = "none";
  for (std::size_t r = 0; r < ir.lp.eq_rows.size(); ++r) {
    double s = -ir.lp.eq_rhs[r];
    for (const auto& [col, a] : ir.lp.eq_rows[r]) s += a * v[col];
    if (std::abs(s) > worst) {
      worst = std::abs(s);
      const RowInfo& info = ir.eq_info[r];
      worst_where =
          (info.kind == RowInfo::Kind::Initial ? "initial" : "dynamics");
      worst_where += " row t=" + std::to_string(info.t) +
                     " cell=" + sc.cell_names[info.cell] +
                     " commodity=" + sc.commodity_names[info.k];
    }
  }
  for (std::size_t r = 0; r < ir.lp.le_rows.size(); ++r) {
    double s = -ir.lp.le_rhs[r];
    for (const auto& [col, a] : ir.lp.le_rows[r]) s += a * v[col];
    if (s > worst) {
      worst = s;
      const RowInfo& info = ir.le_info[r];
      worst_where = (info.kind == RowInfo::Kind::DemandCap
                         ? "demand cap t=" + std::to_string(info.t) +
                               " cell=" + sc.cell_names[info.cell] +
                               " commodity=" + sc.commodity_names[info.k]
                         : "supply cap t=" + std::to_string(info.t) +
                               " cell=" + sc.cell_names[info.cell]) +
                    " piece=" + std::to_string(info.piece);
    }
  }
  for (double e : v) worst = std::max(worst, -e);

  bool feasible = worst <= tol;
  Json report;
  report["feasibility"] = {{"max_residual", worst},
                           {"worst_row", worst_where},
                           {"tol", tol},
                           {"pass", feasible}};
  if (!feasible) {
    std::cout << report.dump(1) << "\n";
    std::cerr << "feasibility failed: residual " << fmt_double(worst)
              << " at " << worst_where << "\n";
    return 5;
  }

  RelaxedSolution rs = from_vector(ir, sc.net, v);
  RecoveredControls rec;
  try {
    rec = recover_controls(sc.net, sc.fd, ir, rs);
  } catch (const RecoverError& e) {
    std::cerr << "control recovery failed: " << e.what() << "\n";
    return 5;
  }
  TightnessReport tight = verify_tightness(sc.net, sc.fd, sc.cost, sc.inflow,
                                           sc.cfg, rs, rec.controls);
  bool tight_ok = tight.tight(kTightStateTol, kTightGammaTol, kTightCostTol);

  SolverOptions sopts;
  sopts.tol = std::min(tol, 1e-8);
  sopts.max_iters = max_iters;
  Solution sol = solve(ir.lp, sopts);
  KktReport kkt{};
  double opt_gap = kInf;
  if (sol.outcome == SolveOutcome::Optimal) {
    kkt = kkt_residuals(ir, sol);
    opt_gap = rs.objective - sol.objective;
  }

  report["tightness"] = {{"max_state_dev", tight.max_state_dev},
                         {"max_gamma_dev", tight.max_gamma_dev},
                         {"cost_gap", tight.cost_gap()},
                         {"relaxed_objective", rs.objective},
                         {"recovered_cost", tight.cost_simulated},
                         {"pass", tight_ok}};
  report["optimality"] = {
      {"solver_outcome", to_string(sol.outcome)},
      {"own_optimum", sol.outcome == SolveOutcome::Optimal
                          ? Json(sol.objective)
                          : Json(nullptr)},
      {"objective_excess", std::isfinite(opt_gap) ? Json(opt_gap)
                                                  : Json(nullptr)},
      {"kkt",
       {{"stationarity", kkt.stationarity},
        {"complementarity", kkt.complementarity},
        {"primal_feasibility", kkt.primal_feas},
        {"dual_feasibility", kkt.dual_feas},
        {"duality_gap", kkt.duality_gap},
        {"terminal_costate", kkt.terminal_costate}}}};
  std::cout << report.dump(1) << "\n";
  if (!tight_ok) {
    std::cerr << "tightness certificate failed\n";
    return 5;
  }
  return 0;
}

inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"multi-commodity traffic assignment: simulate, relax, "
               "optimize, certify"};
  app.require_subcommand(1);

  std::string scenario, out_dir = ".", controls_path, plot_cell, lp_dump;
  std::string traj_dir;
  bool uncontrolled = false;
  double tol = 1e-8;
  double verify_tol = 1e-6;
  int max_iters = 200;

  auto* validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("--scenario", scenario, "scenario JSON")->required();

  auto* simulate = app.add_subcommand("simulate", "run the dynamics");
  simulate->add_option("--scenario", scenario, "scenario JSON")->required();
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_option("--controls", controls_path, "controls JSON");
  simulate->add_flag("--uncontrolled", uncontrolled,
                     "alpha = 1 and the scenario's default routing");

  auto* optimize = app.add_subcommand("optimize", "solve the relaxation and "
                                                  "recover controls");
  optimize->add_option("--scenario", scenario, "scenario JSON")->required();
  optimize->add_option("--out", out_dir, "output directory");
  optimize->add_option("--tol", tol, "solver tolerance");
  optimize->add_option("--max-iters", max_iters, "solver iteration cap");
  optimize->add_option("--plot-cell", plot_cell, "cell label for outflow.svg");
  optimize->add_option("--lp-dump", lp_dump, "write the program to a file");

  auto* verify = app.add_subcommand("verify", "certify a relaxed trajectory");
  verify->add_option("--scenario", scenario, "scenario JSON")->required();
  verify
      ->add_option("trajectory", traj_dir,
                   "directory with states.csv and flows.csv")
      ->required();
  verify->add_option("--tol", verify_tol, "certification tolerance");
  verify->add_option("--max-iters", max_iters, "solver iteration cap");

  std::vector<const char*> argv;
  argv.push_back("mcdta");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (validate->parsed()) return cmd_validate(scenario);
    if (simulate->parsed())
      return cmd_simulate(scenario, controls_path, uncontrolled, out_dir);
    if (optimize->parsed())
      return cmd_optimize(scenario, out_dir, tol, max_iters, plot_cell,
                          lp_dump);
    if (verify->parsed())
      return cmd_verify(scenario, traj_dir, verify_tol, max_iters);
  } catch (const ScenarioError& e) {
    return cli_detail::exit_code(e);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace mcdta
