#pragma once

#include <optional>

#include "qmill/liouvillian.hpp"
#include "qmill/operators.hpp"

namespace qmill {

enum class Operation { Engine, Refrigerator, Accelerator, Other };

inline const char* to_string(Operation op) {
  switch (op) {
    case Operation::Engine: return "Engine";
    case Operation::Refrigerator: return "Refrigerator";
    case Operation::Accelerator: return "Accelerator";
    case Operation::Other: return "Other";
  }
  return "Other";
}

/// Heat currents, work rates, first law, classification and performance
/// metrics at a given state. Sign convention: positive = into the system.
struct ThermoReport {
  double q1 = 0, q2 = 0, qr = 0;  // per-bath heat currents
  double w_q = 0;                 // hidden collision work (zero under the GME)
  double w_r = 0;                 // load work correction
  double u_dot = 0;               // d Tr[H_S rho]/dt
  double first_law_residual = 0;  // u_dot - (q1+q2+qr+w_q+w_r)
  Operation classification = Operation::Other;
  std::optional<double> efficiency;  // engine regime only
  std::optional<double> cop;         // refrigerator regime only
  double carnot_efficiency = 0;
  double carnot_cop = 0;
  ModelKind model = ModelKind::Local;
};

struct PowerReport {
  double w_kin = 0;  // d<Lz^2>/dt / (2I)
  double w_int = 0;  // coherent (working-medium) part
  double q_ba = 0;   // angular-momentum diffusion part
  double w_net = 0;  // d(<Lz>^2)/dt / (2I)
  double time = 0;
};

struct HeatFlows {
  double q1, q2, qr;
};

/// Local heat currents Tr[H_{S,0} L_i rho]; the qubit currents are
/// cross-checked against the explicit expectation-value formula
/// 2 B_i g_i^2 (n_i <s- s+> - (n_i+1) <s+ s->).
inline HeatFlows heat_flows_local(const DenseMat& rho, const Liouvillian& l, const Params& p,
                                  double cross_check_tol = 1e-10) {
  if (l.model != ModelKind::Local)
    throw std::invalid_argument("heat_flows_local: generator is not the local model");
  const SparseMat& h0 = l.h.h0.mat;
  HeatFlows f{detail::real_trace_prod(h0, l.bath1.apply(rho)),
              detail::real_trace_prod(h0, l.bath2.apply(rho)),
              detail::real_trace_prod(h0, l.load.apply(rho))};
  // independent route
  auto explicit_q = [&](int which, double B, double gi, double beta) {
    const SparseMat sp = embed_qubit_op(which, PauliKind::Plus, l.space).mat;
    const SparseMat sm = embed_qubit_op(which, PauliKind::Minus, l.space).mat;
    const double n = thermal_occupation(beta, B);
    const double up = detail::real_trace_prod(SparseMat(sm * sp), rho);   // <s- s+>
    const double dn = detail::real_trace_prod(SparseMat(sp * sm), rho);   // <s+ s->
    return 2.0 * B * gi * gi * (n * up - (n + 1.0) * dn);
  };
  const double e1 = explicit_q(1, p.B1, p.g1(), p.beta1);
  const double e2 = explicit_q(2, p.B2, p.g2(), p.beta2);
  const double scale = std::max({std::abs(f.q1), std::abs(f.q2), 1e-30});
  if (std::abs(f.q1 - e1) > cross_check_tol * std::max(scale, 1.0) ||
      std::abs(f.q2 - e2) > cross_check_tol * std::max(scale, 1.0)) {
    throw NumericalError("heat_flows_local: superoperator and explicit routes disagree");
  }
  return f;
}

struct WorkFlows {
  double w_q, w_r;
};

/// Hidden collision work Tr[H_{S,I}(L_1+L_2) rho] (checked against the
/// explicit correlator form) and the load correction Tr[H_{S,I} L_r rho].
inline WorkFlows work_flows_local(const DenseMat& rho, const Liouvillian& l, const Params& p,
                                  double cross_check_tol = 1e-10) {
  if (l.model != ModelKind::Local)
    throw std::invalid_argument("work_flows_local: generator is not the local model");
  const SparseMat& hi = l.h.hi.mat;
  WorkFlows w{detail::real_trace_prod(hi, DenseMat(l.bath1.apply(rho) + l.bath2.apply(rho))),
              detail::real_trace_prod(hi, l.load.apply(rho))};
  const double n1 = thermal_occupation(p.beta1, p.B1);
  const double n2 = thermal_occupation(p.beta2, p.B2);
  // <H_{S,I}> = lambda(<s1+ s2- e^{i phi}> + h.c.)
  const double corr = detail::real_trace_prod(hi, rho);
  const double w_explicit =
      -0.5 * (p.g1() * p.g1() * (2 * n1 + 1) + p.g2() * p.g2() * (2 * n2 + 1)) * corr;
  const double scale = std::max(std::abs(w.w_q), 1.0);
  if (std::abs(w.w_q - w_explicit) > cross_check_tol * scale)
    throw NumericalError("work_flows_local: superoperator and correlator routes disagree");
  return w;
}

/// Global heat currents Tr[H_S L_i^{(glob)} rho] (full H_S, not H_{S,0}).
inline HeatFlows heat_flows_global(const DenseMat& rho, const Liouvillian& l) {
  if (l.model != ModelKind::Global)
    throw std::invalid_argument("heat_flows_global: generator is not the global model");
  const SparseMat& hs = l.h.hs.mat;
  return {detail::real_trace_prod(hs, l.bath1.apply(rho)),
          detail::real_trace_prod(hs, l.bath2.apply(rho)),
          detail::real_trace_prod(l.h.h0.mat, l.load.apply(rho))};
}

/// Kinetic/intrinsic/net rotor power and back-action heat at a state.
/// w_kin = w_int + q_ba holds exactly by construction.
inline PowerReport rotor_powers(const DenseMat& rho, const Liouvillian& l, const Params& p,
                                double time = 0.0) {
  const SparseMat lz = angular_momentum(l.space).mat;
  const SparseMat lz2 = SparseMat(lz * lz);
  const DenseMat drho_h = l.hamiltonian.apply(rho);
  const DenseMat drho_d =
      l.bath1.apply(rho) + l.bath2.apply(rho) + l.load.apply(rho);
  PowerReport r;
  r.time = time;
  const double i2 = 2.0 * p.inertia;
  r.w_int = detail::real_trace_prod(lz2, drho_h) / i2;
  r.q_ba = detail::real_trace_prod(lz2, drho_d) / i2;
  r.w_kin = r.w_int + r.q_ba;
  const double lz_mean = detail::real_trace_prod(lz, rho);
  const double lz_dot = detail::real_trace_prod(lz, DenseMat(drho_h + drho_d));
  r.w_net = lz_mean * lz_dot / p.inertia;
  return r;
}

/// Maximum unitarily extractable work: Tr[rho H] minus the passive-state
/// energy (descending populations against ascending levels).
inline double ergotropy(const DenseMat& rho, const DenseMat& h) {
  Eigen::SelfAdjointEigenSolver<DenseMat> er(rho, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<DenseMat> eh(h, Eigen::EigenvaluesOnly);
  RealVec r = er.eigenvalues();  // ascending
  const RealVec& e = eh.eigenvalues();
  double passive = 0.0;
  const Index n = r.size();
  for (Index k = 0; k < n; ++k) passive += r(n - 1 - k) * e(k);
  return (rho * h).trace().real() - passive;
}

enum class SubsystemHamiltonian { Free, Interacting };

struct SubsystemErgotropies {
  double total, two_qubits, rotor;
  double qubit1, qubit2;
};

/// Steady-state ergotropy of the full system and its reduced parts. The
/// two-qubit Hamiltonian is free by default; the Interacting option adds
/// the rotor-averaged mill term.
inline SubsystemErgotropies subsystem_ergotropies(const DenseMat& rho, const Params& p,
                                                  const SpaceSpec& space,
                                                  SubsystemHamiltonian mode = SubsystemHamiltonian::Free) {
  auto h = build_hamiltonians(p, space);
  SubsystemErgotropies out{};
  out.total = ergotropy(rho, DenseMat(h.hs.mat));

  const DenseMat rho_qq = partial_trace(rho, space, {true, true, false});
  DenseMat sz = DenseMat::Zero(2, 2);
  sz(0, 0) = 1;
  sz(1, 1) = -1;
  DenseMat id2 = DenseMat::Identity(2, 2);
  DenseMat h_qq = p.B1 * Eigen::kroneckerProduct(sz, id2) + p.B2 * Eigen::kroneckerProduct(id2, sz);
  if (mode == SubsystemHamiltonian::Interacting) {
    // rotor-averaged mill term: lambda (s1+ s2- <e^{i phi}> + h.c.)
    const DenseMat rho_r = partial_trace(rho, space, {false, false, true});
    const DenseMat e_r = DenseMat(rotor_shift(space).mat)
                             .block(0, 0, space.n_rotor(), space.n_rotor());
    const Complex e_mean = (e_r * rho_r).trace();
    DenseMat sp = DenseMat::Zero(2, 2), sm = DenseMat::Zero(2, 2);
    sp(0, 1) = 1;
    sm(1, 0) = 1;
    DenseMat mill = p.lambda * e_mean * Eigen::kroneckerProduct(sp, sm);
    h_qq += mill + mill.adjoint();
  }
  out.two_qubits = ergotropy(rho_qq, h_qq);

  const DenseMat rho_r = partial_trace(rho, space, {false, false, true});
  const int nr = space.n_rotor();
  DenseMat h_r = DenseMat::Zero(nr, nr);
  for (int k = 0; k < nr; ++k) {
    const double lv = p.l_min + k;
    h_r(k, k) = lv * lv / (2.0 * p.inertia);
  }
  out.rotor = ergotropy(rho_r, h_r);

  out.qubit1 = ergotropy(partial_trace(rho, space, {true, false, false}), p.B1 * sz);
  out.qubit2 = ergotropy(partial_trace(rho, space, {false, true, false}), p.B2 * sz);
  return out;
}

/// Table-1 sign patterns with a dead-band below which a flow counts as zero.
inline Operation classify_operation(double q1, double q2, double w_q,
                                    double dead_band_rel = 1e-12) {
  const double eps = dead_band_rel * std::max({std::abs(q1), std::abs(q2), std::abs(w_q), 1e-300});
  auto sgn = [eps](double v) { return v > eps ? 1 : (v < -eps ? -1 : 0); };
  const int s1 = sgn(q1), s2 = sgn(q2), sw = sgn(w_q);
  if (s1 < 0 && s2 > 0 && sw < 0) return Operation::Engine;
  if (s1 > 0 && s2 < 0 && sw > 0) return Operation::Refrigerator;
  if (s1 < 0 && s2 > 0 && sw > 0) return Operation::Accelerator;
  return Operation::Other;
}

/// Efficiency / COP with their Carnot bounds; metrics are only defined in
/// their operating regime, and a dead-band-zero denominator yields an
/// unset optional instead of a division blow-up.
inline void performance_metrics(ThermoReport& rep, const Params& p) {
  rep.carnot_efficiency = 1.0 - p.beta2 / p.beta1;
  rep.carnot_cop = p.beta1 / (p.beta1 - p.beta2);
  rep.efficiency.reset();
  rep.cop.reset();
  const double eps = 1e-12 * std::max({std::abs(rep.q1), std::abs(rep.q2), std::abs(rep.w_q), 1e-300});
  if (rep.classification == Operation::Engine && std::abs(rep.q2) > eps)
    rep.efficiency = -rep.w_q / rep.q2;
  if (rep.classification == Operation::Refrigerator && std::abs(rep.w_q) > eps)
    rep.cop = rep.q1 / rep.w_q;
}

/// Full report (currents, work, first law, classification, metrics) at a
/// state under the given generator.
inline ThermoReport thermo_report(const DenseMat& rho, const Liouvillian& l, const Params& p) {
  ThermoReport rep;
  rep.model = l.model;
  if (l.model == ModelKind::Local) {
    auto f = heat_flows_local(rho, l, p);
    auto w = work_flows_local(rho, l, p);
    rep.q1 = f.q1;
    rep.q2 = f.q2;
    rep.qr = f.qr;
    rep.w_q = w.w_q;
    rep.w_r = w.w_r;
  } else {
    auto f = heat_flows_global(rho, l);
    rep.q1 = f.q1;
    rep.q2 = f.q2;
    rep.qr = f.qr;
    rep.w_q = 0.0;
    rep.w_r = detail::real_trace_prod(l.h.hi.mat, l.load.apply(rho));
  }
  rep.u_dot = detail::real_trace_prod(l.h.hs.mat, l.apply(rho));
  rep.first_law_residual = rep.u_dot - (rep.q1 + rep.q2 + rep.qr + rep.w_q + rep.w_r);
  rep.classification = classify_operation(rep.q1, rep.q2, rep.w_q);
  performance_metrics(rep, p);
  return rep;
}

}  // namespace qmill
