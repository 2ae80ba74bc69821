#pragma once

#include "qmill/model.hpp"
#include "qmill/superop.hpp"

namespace qmill {

enum class ModelKind { Local, Global };

/// Assembled master-equation generator with per-bath parts retrievable by
/// tag (needed for the heat-flow traces).
struct Liouvillian {
  SpaceSpec space;
  ModelKind model = ModelKind::Local;
  Superoperator hamiltonian;  // -i[H_S, .]
  Superoperator bath1;
  Superoperator bath2;
  Superoperator load;
  SparseMat total;  // sum of the four parts
  Hamiltonians h;   // the Hamiltonians the generator was built from

  const Superoperator& part(GeneratorKind k) const {
    switch (k) {
      case GeneratorKind::Hamiltonian: return hamiltonian;
      case GeneratorKind::Bath1: return bath1;
      case GeneratorKind::Bath2: return bath2;
      case GeneratorKind::RotorLoad: return load;
    }
    throw std::invalid_argument("Liouvillian::part: bad tag");
  }

  DenseMat apply(const DenseMat& rho) const { return unvec(DenseVec(total * vec(rho)), space.dim()); }
};

/// Thermal dissipators on the two qubits:
/// L_i = g_i^2 (n_i D[sigma_i+] + (n_i+1) D[sigma_i-]).
inline std::pair<Superoperator, Superoperator> local_qubit_dissipators(const Params& p,
                                                                       const SpaceSpec& space) {
  p.validate();
  const double n1 = thermal_occupation(p.beta1, p.B1);
  const double n2 = thermal_occupation(p.beta2, p.B2);
  auto make = [&](int which, double gi, double ni) {
    SparseMat up = dissipator_matrix(embed_qubit_op(which, PauliKind::Plus, space).mat);
    SparseMat dn = dissipator_matrix(embed_qubit_op(which, PauliKind::Minus, space).mat);
    SparseMat m = SparseMat(gi * gi * ni * up) + SparseMat(gi * gi * (ni + 1.0) * dn);
    return m;
  };
  return {{space, make(1, p.g1(), n1), GeneratorKind::Bath1},
          {space, make(2, p.g2(), n2), GeneratorKind::Bath2}};
}

/// Dissipative load on the rotor, Lindblad form with prefactor 2 I gamma / beta_r
/// and jump operators cos(phi) - i beta_r sin(phi) L_z / (4I) and
/// sin(phi) + i beta_r cos(phi) L_z / (4I). The angle operator stays left of
/// L_z (literal, non-symmetrized ordering).
inline Superoperator rotor_load_dissipator(const Params& p, const SpaceSpec& space) {
  if (p.gamma < 0) throw std::invalid_argument("rotor_load_dissipator: gamma must be >= 0");
  const Index d2 = space.dim() * space.dim();
  if (p.gamma == 0.0) return {space, SparseMat(d2, d2), GeneratorKind::RotorLoad};
  const SparseMat c = rotor_cos(space).mat;
  const SparseMat s = rotor_sin(space).mat;
  const SparseMat lz = angular_momentum(space).mat;
  const Complex a = kI * (p.beta_r / (4.0 * p.inertia));
  SparseMat o1 = c - SparseMat(a * SparseMat(s * lz));
  SparseMat o2 = s + SparseMat(a * SparseMat(c * lz));
  const double pref = 2.0 * p.inertia * p.gamma / p.beta_r;
  SparseMat m = SparseMat(dissipator_matrix(o1) + dissipator_matrix(o2)) * pref;
  return {space, std::move(m), GeneratorKind::RotorLoad};
}

inline Liouvillian assemble_local_liouvillian(const Params& p, const SpaceSpec& space) {
  Liouvillian l;
  l.space = space;
  l.model = ModelKind::Local;
  l.h = build_hamiltonians(p, space);
  l.hamiltonian = {space, hamiltonian_matrix(l.h.hs.mat), GeneratorKind::Hamiltonian};
  auto [l1, l2] = local_qubit_dissipators(p, space);
  l.bath1 = std::move(l1);
  l.bath2 = std::move(l2);
  l.load = rotor_load_dissipator(p, space);
  l.total = l.hamiltonian.mat + l.bath1.mat + l.bath2.mat + l.load.mat;
  l.total.prune(Complex(0.0));
  return l;
}

}  // namespace qmill
