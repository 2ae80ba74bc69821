#pragma once

#include <cmath>
#include <vector>

#include "qmill/liouvillian.hpp"
#include "qmill/model.hpp"
#include "qmill/superop.hpp"

namespace qmill {

struct Eigenoperator {
  double omega;   // epsilon' - epsilon for the transitions collected here
  SparseMat op;   // Pi(eps) A Pi(eps'), summed over the cluster, product basis
};

struct EigenoperatorSet {
  int bath = 0;
  double cluster_tol = 0.0;
  std::vector<Eigenoperator> ops;

  SparseMat sum() const {
    if (ops.empty()) return SparseMat(0, 0);
    SparseMat s = ops.front().op;
    for (size_t k = 1; k < ops.size(); ++k) s += ops[k].op;
    return s;
  }
};

/// Decompose a coupling operator over the H_S eigenbasis into frequency
/// components A(omega); frequencies within the absolute tolerance are merged
/// (secular grouping of near-degenerate transitions).
inline EigenoperatorSet eigenoperators(const QOperator& a, const Spectrum& spec, double tol) {
  if (tol <= 0) throw std::invalid_argument("eigenoperators: tol must be positive");
  const Index n = spec.eigenvalues.size();
  const DenseMat at = spec.eigenvectors.adjoint() * DenseMat(a.mat) * spec.eigenvectors;
  const double elem_tol = 1e-13 * std::max(at.cwiseAbs().maxCoeff(), 1e-300);

  struct Elem {
    double omega;
    Index k, kp;
  };
  std::vector<Elem> elems;
  for (Index kp = 0; kp < n; ++kp) {
    for (Index k = 0; k < n; ++k) {
      if (std::abs(at(k, kp)) > elem_tol)
        elems.push_back({spec.eigenvalues(kp) - spec.eigenvalues(k), k, kp});
    }
  }
  std::sort(elems.begin(), elems.end(), [](const Elem& x, const Elem& y) { return x.omega < y.omega; });

  EigenoperatorSet set;
  set.cluster_tol = tol;
  size_t i = 0;
  while (i < elems.size()) {
    size_t j = i + 1;
    while (j < elems.size() && elems[j].omega - elems[j - 1].omega <= tol) ++j;
    double omega = 0.0;
    std::vector<Triplet> t;
    for (size_t e = i; e < j; ++e) omega += elems[e].omega;
    omega /= double(j - i);
    // op = sum over cluster of at(k,kp) |v_k><v_kp|
    DenseMat op = DenseMat::Zero(n, n);
    for (size_t e = i; e < j; ++e) {
      op.noalias() += at(elems[e].k, elems[e].kp) *
                      (spec.eigenvectors.col(elems[e].k) * spec.eigenvectors.col(elems[e].kp).adjoint());
    }
    SparseMat sp = op.sparseView(1.0, 1e-14);
    set.ops.push_back({omega, std::move(sp)});
    i = j;
  }
  return set;
}

/// Ohmic-bath rates at a (possibly negative or zero) transition frequency:
/// heating multiplies A†(w) rho A(w), cooling multiplies A(w) rho A†(w).
/// J(w) = g^2 w W^2/(w^2+W^2), n(w) = 1/(e^{bw}-1); w*n(w) -> 1/b at w=0,
/// so both rates stay finite and nonnegative on the whole real line.
inline std::pair<double, double> bath_rates(double omega, double g_squared, double beta,
                                            double cutoff) {
  const double shape = g_squared * cutoff * cutoff / (omega * omega + cutoff * cutoff);
  const double wn = omega == 0.0 ? 1.0 / beta : omega / std::expm1(beta * omega);
  return {shape * wn, shape * (wn + omega)};
}

/// Cached frequency decomposition: everything that does not depend on the
/// bath temperatures or the coupling split. One cache serves a whole
/// chi-sweep including the temperature-swapped solves.
struct GmeTermCache {
  SpaceSpec space;
  Hamiltonians h;
  double omega_max = 0.0;
  struct Term {
    int bath;       // 1 or 2
    double omega;
    SparseMat d_a;      // D[A(omega)]
    SparseMat d_adag;   // D[A†(omega)]
  };
  std::vector<Term> terms;
  SparseMat ham_part;

  double cutoff(const Params& p) const {
    return p.omega_cutoff_mode == CutoffMode::Fixed ? p.omega_cutoff_value : omega_max;
  }

  Liouvillian assemble(const Params& p) const {
    p.validate();
    const double cut = cutoff(p);
    if (cut <= 0) throw std::invalid_argument("gme: cutoff must be positive");
    const Index n2 = space.dim() * space.dim();
    std::vector<Triplet> t1, t2;
    for (const auto& term : terms) {
      if (p.gme_drop_zero_freq && std::abs(term.omega) <= 2.0 * p.eigencluster_tol * omega_max)
        continue;
      const double gi = term.bath == 1 ? p.g1() : p.g2();
      const double beta = term.bath == 1 ? p.beta1 : p.beta2;
      auto [heat, cool] = bath_rates(term.omega, gi * gi, beta, cut);
      auto& dst = term.bath == 1 ? t1 : t2;
      for (int k = 0; k < term.d_adag.outerSize(); ++k)
        for (SparseMat::InnerIterator it(term.d_adag, k); it; ++it)
          dst.emplace_back(it.row(), it.col(), heat * it.value());
      for (int k = 0; k < term.d_a.outerSize(); ++k)
        for (SparseMat::InnerIterator it(term.d_a, k); it; ++it)
          dst.emplace_back(it.row(), it.col(), cool * it.value());
    }
    Liouvillian l;
    l.space = space;
    l.model = ModelKind::Global;
    l.h = h;
    l.hamiltonian = {space, ham_part, GeneratorKind::Hamiltonian};
    SparseMat b1(n2, n2), b2(n2, n2);
    b1.setFromTriplets(t1.begin(), t1.end());
    b2.setFromTriplets(t2.begin(), t2.end());
    l.bath1 = {space, std::move(b1), GeneratorKind::Bath1};
    l.bath2 = {space, std::move(b2), GeneratorKind::Bath2};
    l.load = rotor_load_dissipator(p, space);
    l.total = l.hamiltonian.mat + l.bath1.mat + l.bath2.mat + l.load.mat;
    l.total.prune(Complex(0.0));
    return l;
  }
};

inline GmeTermCache build_gme_cache(const Params& p, const SpaceSpec& space) {
  GmeTermCache cache;
  cache.space = space;
  cache.h = build_hamiltonians(p, space);
  const Spectrum spec = eigendecompose(cache.h.hs, p.eigencluster_tol);
  const double scale = std::max(std::abs(spec.eigenvalues(0)),
                                std::abs(spec.eigenvalues(spec.eigenvalues.size() - 1)));
  const double freq_tol = p.eigencluster_tol * std::max(scale, 1.0);
  for (int bath : {1, 2}) {
    QOperator a = embed_qubit_op(bath, PauliKind::Minus, space);
    EigenoperatorSet set = eigenoperators(a, spec, freq_tol);
    for (auto& eo : set.ops) {
      cache.omega_max = std::max(cache.omega_max, std::abs(eo.omega));
      SparseMat adag = eo.op.adjoint();
      cache.terms.push_back({bath, eo.omega, dissipator_matrix(eo.op), dissipator_matrix(adag)});
    }
  }
  cache.ham_part = hamiltonian_matrix(cache.h.hs.mat);
  return cache;
}

/// Semiglobal master equation: global (eigenoperator) qubit dissipators with
/// the local rotor load.
inline Liouvillian assemble_global_liouvillian(const Params& p, const SpaceSpec& space) {
  return build_gme_cache(p, space).assemble(p);
}

}  // namespace qmill
