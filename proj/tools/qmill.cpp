// Command-line driver: steady-state reports, trajectories, parameter sweeps,
// rectification scans, collision-model verification and truncation checks.
// Configuration comes from a JSON file (see configs/ and the README); outputs
// are CSV files with a JSON metadata sidecar carrying the resolved parameters.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qmill/qmill.hpp"

using namespace qmill;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

int thread_budget(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return int(std::max(1u, std::thread::hardware_concurrency()));
}

void write_sidecar(const std::string& out_path, const Params& p, const Json& extra = {}) {
  Json meta{{"params", params_to_json(p)}};
  for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  std::ofstream f(out_path + ".meta.json");
  f << meta.dump(2) << "\n";
}

DenseMat initial_state(const Config& cfg, const SpaceSpec& space) {
  const Params& p = cfg.params;
  SparseMat b1(2, 2), b2(2, 2);
  std::vector<Triplet> t1{{0, 0, p.B1}, {1, 1, -p.B1}}, t2{{0, 0, p.B2}, {1, 1, -p.B2}};
  b1.setFromTriplets(t1.begin(), t1.end());
  b2.setFromTriplets(t2.begin(), t2.end());
  DenseMat qq = Eigen::kroneckerProduct(gibbs_state(b1, p.beta1), gibbs_state(b2, p.beta2)).eval();
  const int nr = space.n_rotor();
  DenseMat rot = DenseMat::Zero(nr, nr);
  if (cfg.evolve.initial_state == "rotor-ground") {
    rot(-p.l_min, -p.l_min) = 1.0;  // |l = 0>
  } else if (cfg.evolve.initial_state == "product-gibbs") {
    double z = 0;
    for (int k = 0; k < nr; ++k) {
      const double lv = p.l_min + k;
      rot(k, k) = std::exp(-p.beta_r * lv * lv / (2 * p.inertia));
      z += rot(k, k).real();
    }
    rot /= z;
  } else {
    throw ConfigError("unknown initial_state: " + cfg.evolve.initial_state);
  }
  return Eigen::kroneckerProduct(qq, rot).eval();
}

std::vector<double> emit_grid(double t_end, int points, bool log_grid) {
  std::vector<double> g;
  g.push_back(0.0);
  if (log_grid) {
    const double t0 = std::min(0.1, t_end / points);
    for (int k = 0; k < points; ++k)
      g.push_back(t0 * std::pow(t_end / t0, double(k) / double(points - 1)));
  } else {
    for (int k = 1; k <= points; ++k) g.push_back(t_end * double(k) / points);
  }
  return g;
}

EvolveOptions evolve_options(const Config& cfg) {
  EvolveOptions o;
  o.tol = cfg.params.ode_tol;
  o.method = cfg.evolve.method == "explicit"
                 ? EvolveMethod::Explicit
                 : (cfg.evolve.method == "implicit" ? EvolveMethod::Implicit : EvolveMethod::Auto);
  return o;
}

std::string classification_str(const ThermoReport& r) { return to_string(r.classification); }

int cmd_steady(const Config& cfg, const std::string& model, const std::string& out) {
  const SpaceSpec space = cfg.params.space();
  Liouvillian l = model == "global" ? assemble_global_liouvillian(cfg.params, space)
                                    : assemble_local_liouvillian(cfg.params, space);
  SteadyOptions so;
  so.tol = cfg.params.steady_tol;
  auto ss = steady_state(l.total, space, so);
  if (!ss.warning.empty()) std::cerr << "warning: " << ss.warning << "\n";
  auto rep = thermo_report(ss.rho, l, cfg.params);
  CsvWriter csv(out, {"model", "q1", "q2", "qr", "w_q", "w_r", "u_dot", "first_law_residual",
                      "classification", "efficiency", "cop", "eta_carnot", "cop_carnot",
                      "steady_residual", "min_eigenvalue"});
  csv.row({model, csv_num(rep.q1), csv_num(rep.q2), csv_num(rep.qr), csv_num(rep.w_q),
           csv_num(rep.w_r), csv_num(rep.u_dot), csv_num(rep.first_law_residual),
           classification_str(rep), rep.efficiency ? csv_num(*rep.efficiency) : "",
           rep.cop ? csv_num(*rep.cop) : "", csv_num(rep.carnot_efficiency),
           csv_num(rep.carnot_cop), csv_num(ss.residual), csv_num(ss.min_eigenvalue)});
  write_sidecar(out, cfg.params, Json{{"command", "steady"}, {"model", model}});
  std::cout << "steady: " << classification_str(rep) << " q1=" << rep.q1 << " q2=" << rep.q2
            << " w_q=" << rep.w_q << "\n";
  return 0;
}

int cmd_evolve(const Config& cfg, const std::string& model, const std::string& out) {
  const SpaceSpec space = cfg.params.space();
  Liouvillian l = model == "global" ? assemble_global_liouvillian(cfg.params, space)
                                    : assemble_local_liouvillian(cfg.params, space);
  DenseMat rho0 = initial_state(cfg, space);
  auto grid = emit_grid(cfg.evolve.t_end, cfg.evolve.emit_points, cfg.evolve.log_grid);
  auto traj = evolve(l.total, space, rho0, grid, evolve_options(cfg));
  CsvWriter csv(out, {"time", "w_kin", "w_int", "q_ba", "w_net"});
  for (const auto& pt : traj) {
    auto pw = rotor_powers(pt.rho, l, cfg.params, pt.t);
    csv.row({csv_num(pt.t), csv_num(pw.w_kin), csv_num(pw.w_int), csv_num(pw.q_ba),
             csv_num(pw.w_net)});
  }
  write_sidecar(out, cfg.params, Json{{"command", "evolve"}, {"model", model}});
  return 0;
}

int cmd_sweep(const Config& cfg, const std::string& param, double from, double to, int points,
              const std::string& out, int threads) {
  if (param != "beta2_over_beta1") {
    std::cerr << "error: unsupported sweep parameter \"" << param << "\"\n";
    return kExitUsage;
  }
  const SpaceSpec space = cfg.params.space();
  struct Row {
    double r;
    ThermoReport rep;
    SubsystemErgotropies erg;
    bool failed = false;
    std::string error;
  };
  std::vector<Row> rows(points);
  std::atomic<size_t> next{0};
  const int nthreads = std::min(thread_budget(threads), points);
  auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= rows.size()) return;
      const double r = from + (to - from) * double(i) / double(points - 1);
      rows[i].r = r;
      try {
        Params p = cfg.params;
        p.beta2 = r * p.beta1;
        Liouvillian l = assemble_local_liouvillian(p, space);
        SteadyOptions so;
        so.tol = p.steady_tol;
        so.check_uniqueness = false;
        auto ss = steady_state(l.total, space, so);
        rows[i].rep = thermo_report(ss.rho, l, p);
        rows[i].erg = subsystem_ergotropies(
            ss.rho, p, space,
            cfg.ergotropy.two_qubit_hamiltonian == "interacting"
                ? SubsystemHamiltonian::Interacting
                : SubsystemHamiltonian::Free);
      } catch (const std::exception& e) {
        rows[i].failed = true;
        rows[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  CsvWriter csv(out, {"beta2_over_beta1", "q1", "q2", "qr", "w_q", "w_r", "classification",
                      "efficiency", "cop", "eta_carnot", "cop_carnot", "erg_total", "erg_qubits",
                      "erg_rotor"});
  int failures = 0;
  for (const auto& row : rows) {
    if (row.failed) {
      ++failures;
      std::cerr << "point " << row.r << " failed: " << row.error << "\n";
      continue;
    }
    csv.row({csv_num(row.r), csv_num(row.rep.q1), csv_num(row.rep.q2), csv_num(row.rep.qr),
             csv_num(row.rep.w_q), csv_num(row.rep.w_r), classification_str(row.rep),
             row.rep.efficiency ? csv_num(*row.rep.efficiency) : "",
             row.rep.cop ? csv_num(*row.rep.cop) : "", csv_num(row.rep.carnot_efficiency),
             csv_num(row.rep.carnot_cop), csv_num(row.erg.total), csv_num(row.erg.two_qubits),
             csv_num(row.erg.rotor)});
  }
  write_sidecar(out, cfg.params,
                Json{{"command", "sweep"},
                     {"param", param},
                     {"from", from},
                     {"to", to},
                     {"points", points},
                     {"failed_points", failures}});
  return failures == points ? kExitNumerical : 0;
}

int cmd_rectify(const Config& cfg, int grid_points, const std::vector<double>& alphas,
                const std::string& out, int threads, bool angular) {
  auto grid = default_chi_grid(grid_points);
  auto res = sweep_chi(cfg.params, grid, alphas, thread_budget(threads));
  std::vector<std::string> header;
  if (!angular) {
    header = {"chi", "q_fwd", "q_swap", "R", "J"};
  } else {
    header = {"chi", "lz_fwd", "lz_swap", "R_angular", "J_angular"};
  }
  for (double a : alphas) header.push_back("gamma_" + std::to_string(a).substr(0, 4));
  CsvWriter csv(out, header);
  for (const auto& pt : res.points) {
    if (pt.heat.failed) {
      std::cerr << "chi=" << pt.heat.chi << " failed: " << pt.heat.error << "\n";
      continue;
    }
    std::vector<std::string> row;
    if (!angular) {
      row = {csv_num(pt.heat.chi), csv_num(pt.heat.q_fwd), csv_num(pt.heat.q_swap),
             csv_num(pt.heat.r), csv_num(pt.heat.j)};
      for (double gv : pt.heat.gammas) row.push_back(csv_num(gv));
    } else {
      row = {csv_num(pt.angular.chi), csv_num(pt.angular.lz_fwd), csv_num(pt.angular.lz_swap),
             csv_num(pt.angular.r_angular), csv_num(pt.angular.j_angular)};
      for (double gv : pt.angular.gammas) row.push_back(csv_num(gv));
    }
    csv.row(row);
  }
  Json dots = Json::array();
  const auto& argmax = angular ? res.argmax_angular : res.argmax_heat;
  for (size_t a = 0; a < alphas.size(); ++a) {
    if (argmax[a] >= res.points.size()) continue;
    const auto& pt = res.points[argmax[a]];
    if (!angular) {
      dots.push_back(Json{{"alpha", alphas[a]},
                          {"chi", pt.heat.chi},
                          {"R", pt.heat.r},
                          {"J", pt.heat.j}});
    } else {
      dots.push_back(Json{{"alpha", alphas[a]},
                          {"chi", pt.angular.chi},
                          {"R_angular", pt.angular.r_angular},
                          {"J_angular", pt.angular.j_angular}});
    }
  }
  write_sidecar(out, cfg.params,
                Json{{"command", angular ? "rectify-angular" : "rectify"},
                     {"grid", grid_points},
                     {"alphas", alphas},
                     {"argmax", dots}});
  std::cout << (angular ? "rectify-angular" : "rectify") << ": argmax dots " << dots.dump()
            << "\n";
  return 0;
}

int cmd_ergotropy(const Config& cfg, const std::string& model, const std::string& out) {
  const SpaceSpec space = cfg.params.space();
  Liouvillian l = model == "global" ? assemble_global_liouvillian(cfg.params, space)
                                    : assemble_local_liouvillian(cfg.params, space);
  SteadyOptions so;
  so.tol = cfg.params.steady_tol;
  so.check_uniqueness = false;
  auto ss = steady_state(l.total, space, so);
  auto erg = subsystem_ergotropies(ss.rho, cfg.params, space,
                                   cfg.ergotropy.two_qubit_hamiltonian == "interacting"
                                       ? SubsystemHamiltonian::Interacting
                                       : SubsystemHamiltonian::Free);
  CsvWriter csv(out, {"erg_total", "erg_qubits", "erg_rotor", "erg_qubit1", "erg_qubit2"});
  csv.row({csv_num(erg.total), csv_num(erg.two_qubits), csv_num(erg.rotor), csv_num(erg.qubit1),
           csv_num(erg.qubit2)});
  write_sidecar(out, cfg.params, Json{{"command", "ergotropy"}, {"model", model}});
  return 0;
}

int cmd_collision_verify(const Config& cfg, const std::vector<double>& taus, double t_end,
                         const std::string& out) {
  const SpaceSpec space = cfg.params.space();
  Liouvillian l = assemble_local_liouvillian(cfg.params, space);
  auto sz1 = embed_qubit_op(1, PauliKind::Z, space).mat;
  auto sz2 = embed_qubit_op(2, PauliKind::Z, space).mat;
  auto lz = angular_momentum(space).mat;

  Config icfg = cfg;
  icfg.evolve.initial_state = "rotor-ground";
  DenseMat rho0 = initial_state(icfg, space);

  struct TauResult {
    double tau;
    double err_sz1, err_sz2, err_lz;
    double q1_rate, q2_rate, w_rate;
  };
  std::vector<TauResult> results;
  for (double tau : taus) {
    CollisionConfig ccfg = cfg.collision;
    ccfg.tau = tau;
    ccfg.steps = int(std::round(t_end / tau));
    auto traj = run_collisions(rho0, ccfg, cfg.params, space);
    std::vector<double> times;
    for (const auto& rec : traj) times.push_back(rec.t);
    auto ref = evolve(l.total, space, rho0, times, {cfg.params.ode_tol});
    double e1 = 0, e2 = 0, el = 0;
    for (size_t k = 0; k < traj.size(); ++k) {
      e1 = std::max(e1, std::abs(detail::real_trace_prod(sz1, traj[k].rho) -
                                 detail::real_trace_prod(sz1, ref[k].rho)));
      e2 = std::max(e2, std::abs(detail::real_trace_prod(sz2, traj[k].rho) -
                                 detail::real_trace_prod(sz2, ref[k].rho)));
      el = std::max(el, std::abs(detail::real_trace_prod(lz, traj[k].rho) -
                                 detail::real_trace_prod(lz, ref[k].rho)));
    }
    results.push_back({tau, e1, e2, el, traj.back().q1_rate, traj.back().q2_rate,
                       traj.back().w_rate});
  }
  CsvWriter csv(out, {"tau", "err_sz1", "err_sz2", "err_lz", "order_sz1", "order_sz2", "order_lz",
                      "q1_rate", "q1_lme", "q2_rate", "q2_lme", "w_rate", "w_lme"});
  // LME reference rates at the trajectory end state
  auto ref_end = evolve(l.total, space, rho0, {t_end}, {cfg.params.ode_tol});
  auto f = heat_flows_local(ref_end.back().rho, l, cfg.params);
  auto w = work_flows_local(ref_end.back().rho, l, cfg.params);
  for (size_t k = 0; k < results.size(); ++k) {
    auto order = [&](auto proj) {
      if (k == 0) return 0.0;
      return std::log2(proj(results[k - 1]) / proj(results[k])) /
             std::log2(results[k - 1].tau / results[k].tau);
    };
    csv.row({csv_num(results[k].tau), csv_num(results[k].err_sz1), csv_num(results[k].err_sz2),
             csv_num(results[k].err_lz),
             csv_num(order([](const TauResult& r) { return r.err_sz1; })),
             csv_num(order([](const TauResult& r) { return r.err_sz2; })),
             csv_num(order([](const TauResult& r) { return r.err_lz; })),
             csv_num(results[k].q1_rate), csv_num(f.q1), csv_num(results[k].q2_rate),
             csv_num(f.q2), csv_num(results[k].w_rate), csv_num(w.w_q)});
  }
  write_sidecar(out, cfg.params,
                Json{{"command", "collision-verify"}, {"taus", taus}, {"t_end", t_end}});
  return 0;
}

int cmd_converge(const Config& cfg, int widen_step, const std::string& out) {
  const Params& p = cfg.params;
  const SpaceSpec space = p.space();
  const int nr = space.n_rotor();

  if (p.gamma == 0.0) {
    // no load: the rotor runs away; track the most populated level in time
    Liouvillian l = assemble_local_liouvillian(p, space);
    Config icfg = cfg;
    icfg.evolve.initial_state = "rotor-ground";
    DenseMat rho0 = initial_state(icfg, space);
    auto grid = emit_grid(cfg.evolve.t_end, cfg.evolve.emit_points, true);
    auto traj = evolve(l.total, space, rho0, grid, evolve_options(cfg));
    CsvWriter csv(out, {"time", "mode_l", "boundary_leak"});
    bool hit_boundary = false;
    for (const auto& pt : traj) {
      DenseMat rot = partial_trace(pt.rho, space, {false, false, true});
      int mode = 0;
      for (int k = 1; k < nr; ++k)
        if (rot(k, k).real() > rot(mode, mode).real()) mode = k;
      const double leak =
          (rot(0, 0) + rot(1, 1) + rot(nr - 2, nr - 2) + rot(nr - 1, nr - 1)).real();
      csv.row({csv_num(pt.t), std::to_string(p.l_min + mode), csv_num(leak)});
      if (mode <= 1 || mode >= nr - 2) hit_boundary = true;
    }
    write_sidecar(out, p,
                  Json{{"command", "converge"},
                       {"converged", false},
                       {"reason", hit_boundary ? "mode reached the window boundary"
                                               : "gamma = 0: no steady state by design"}});
    std::cout << "converge: NOT converged (gamma = 0)\n";
    return 0;
  }

  auto solve = [&](const SpaceSpec& sp) {
    Liouvillian l = assemble_local_liouvillian(p, sp);
    SteadyOptions so;
    so.tol = p.steady_tol;
    so.check_uniqueness = false;
    auto ss = steady_state(l.total, sp, so);
    auto f = heat_flows_local(ss.rho, l, p);
    const double lzv = detail::real_trace_prod(angular_momentum(sp).mat, ss.rho);
    return std::tuple<DenseMat, HeatFlows, double>{ss.rho, f, lzv};
  };
  auto [rho, flows, lzv] = solve(space);
  DenseMat rot = partial_trace(rho, space, {false, false, true});
  const double leak = (rot(0, 0) + rot(1, 1) + rot(nr - 2, nr - 2) + rot(nr - 1, nr - 1)).real();
  int mode = 0;
  for (int k = 1; k < nr; ++k)
    if (rot(k, k).real() > rot(mode, mode).real()) mode = k;

  SpaceSpec wide = make_space(p.l_min - widen_step, p.l_max + widen_step);
  auto [rho_w, flows_w, lzv_w] = solve(wide);
  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30});
  };
  const double drift_q1 = rel(flows.q1, flows_w.q1);
  const double drift_q2 = rel(flows.q2, flows_w.q2);
  const double drift_lz = rel(lzv, lzv_w);
  const bool converged =
      leak < 1e-6 && drift_q1 < 1e-4 && drift_q2 < 1e-4 && drift_lz < 1e-4;

  CsvWriter csv(out, {"l", "population"});
  for (int k = 0; k < nr; ++k)
    csv.row({std::to_string(p.l_min + k), csv_num(rot(k, k).real())});
  write_sidecar(out, p,
                Json{{"command", "converge"},
                     {"converged", converged},
                     {"boundary_leak", leak},
                     {"mode_l", p.l_min + mode},
                     {"mode_interior", mode > 1 && mode < nr - 2},
                     {"widen_step", widen_step},
                     {"drift_q1", drift_q1},
                     {"drift_q2", drift_q2},
                     {"drift_lz", drift_lz}});
  std::cout << "converge: " << (converged ? "converged" : "NOT converged") << " leak=" << leak
            << " mode_l=" << p.l_min + mode << " drift_q1=" << drift_q1 << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-qubit/quantum-rotor thermal machine simulator"};
  app.require_subcommand(1);

  std::string config_path, out = "out.csv", model = "local", param = "beta2_over_beta1";
  double from = 0.05, to = 0.89, t_end = 2.0;
  int points = 85, grid = 101, threads = 0, widen = 4;
  std::vector<double> alphas{0.0, 0.5, 1.0}, taus{0.1, 0.05, 0.025};

  auto add_common = [&](CLI::App* cmd, bool with_model = true) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--out", out, "output CSV path");
    if (with_model) cmd->add_option("--model", model, "local | global");
  };

  auto* steady = app.add_subcommand("steady", "steady-state thermodynamic report");
  add_common(steady);
  auto* evolve_cmd = app.add_subcommand("evolve", "rotor power trajectory");
  add_common(evolve_cmd);
  auto* sweep = app.add_subcommand("sweep", "steady-state sweep over beta2/beta1");
  add_common(sweep, false);
  sweep->add_option("--param", param, "sweep parameter (beta2_over_beta1)");
  sweep->add_option("--from", from, "lower end");
  sweep->add_option("--to", to, "upper end");
  sweep->add_option("--points", points, "grid size");
  sweep->add_option("--threads", threads, "worker threads (default QM_THREADS or hardware)");
  auto* rectify = app.add_subcommand("rectify", "heat rectification chi-sweep (GME)");
  add_common(rectify, false);
  rectify->add_option("--grid", grid, "chi grid size");
  rectify->add_option("--alphas", alphas, "Gamma_alpha weights")->delimiter(',');
  rectify->add_option("--threads", threads, "worker threads");
  auto* rect_ang = app.add_subcommand("rectify-angular", "angular-momentum rectification (GME)");
  add_common(rect_ang, false);
  rect_ang->add_option("--grid", grid, "chi grid size");
  rect_ang->add_option("--alphas", alphas, "Gamma_alpha weights")->delimiter(',');
  rect_ang->add_option("--threads", threads, "worker threads");
  auto* erg = app.add_subcommand("ergotropy", "steady-state subsystem ergotropies");
  add_common(erg);
  auto* cver = app.add_subcommand("collision-verify", "finite-tau collision model vs the LME");
  add_common(cver, false);
  cver->add_option("--taus", taus, "collision durations")->delimiter(',');
  cver->add_option("--t-end", t_end, "trajectory horizon");
  auto* conv = app.add_subcommand("converge", "rotor truncation convergence report");
  add_common(conv, false);
  conv->add_option("--widen", widen, "ladder widening step");

  CLI11_PARSE(app, argc, argv);

  try {
    const Config cfg = load_config(config_path);
    if (model != "local" && model != "global") {
      std::cerr << "error: --model must be local or global\n";
      return kExitUsage;
    }
    if (steady->parsed()) return cmd_steady(cfg, model, out);
    if (evolve_cmd->parsed()) return cmd_evolve(cfg, model, out);
    if (sweep->parsed()) return cmd_sweep(cfg, param, from, to, points, out, threads);
    if (rectify->parsed()) return cmd_rectify(cfg, grid, alphas, out, threads, false);
    if (rect_ang->parsed()) return cmd_rectify(cfg, grid, alphas, out, threads, true);
    if (erg->parsed()) return cmd_ergotropy(cfg, model, out);
    if (cver->parsed()) return cmd_collision_verify(cfg, taus, t_end, out);
    if (conv->parsed()) return cmd_converge(cfg, widen, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
