#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "qmill/operators.hpp"
#include "qmill/types.hpp"

namespace qmill {

enum class CutoffMode { AutoMax, Fixed };

/// Physical parameters of the two-qubit/rotor machine (hbar = 1 units).
struct Params {
  double B1 = 4.0;          // magnetic field on qubit 1 (cold side)
  double B2 = 10.0;         // magnetic field on qubit 2 (hot side)
  double lambda = 0.1;      // mill coupling
  double inertia = 1.0;     // rotor moment of inertia I
  double g = 1.0;           // base bath coupling
  double chi = 0.0;         // coupling asymmetry, |chi| < 1
  double beta1 = 0.1;       // inverse temperature, bath 1
  double beta2 = 0.05;      // inverse temperature, bath 2
  double beta_r = 0.09;     // inverse temperature of the dissipative load
  double gamma = 5e-5;      // load dissipation rate
  int l_min = -10;
  int l_max = 30;
  CutoffMode omega_cutoff_mode = CutoffMode::AutoMax;
  double omega_cutoff_value = 0.0;  // used when mode == Fixed
  double eigencluster_tol = 1e-9;   // relative to omega_max
  double steady_tol = 1e-10;
  double ode_tol = 1e-8;
  bool gme_drop_zero_freq = false;  // sensitivity switch: drop exact-zero secular terms

  double g1() const { return g * (1.0 - chi); }
  double g2() const { return g * (1.0 + chi); }

  void validate() const {
    if (B1 <= 0 || B2 <= 0 || g <= 0 || inertia <= 0)
      throw std::invalid_argument("Params: B1, B2, g, inertia must be positive");
    if (lambda < 0 || gamma < 0) throw std::invalid_argument("Params: lambda, gamma must be >= 0");
    if (beta1 <= 0 || beta2 <= 0 || beta_r <= 0)
      throw std::invalid_argument("Params: inverse temperatures must be positive");
    if (std::abs(chi) > 1.0) throw std::invalid_argument("Params: need |chi| <= 1");
    if (l_min >= l_max) throw std::invalid_argument("Params: need l_min < l_max");
  }

  SpaceSpec space() const { return make_space(l_min, l_max); }
};

/// Bose occupation of a bath mode resonant with a qubit of splitting 2B.
inline double thermal_occupation(double beta, double B) {
  if (beta <= 0 || B <= 0) throw std::domain_error("thermal_occupation: beta, B must be positive");
  return 1.0 / std::expm1(2.0 * beta * B);
}

struct Hamiltonians {
  QOperator h0;  // B1 s1z + B2 s2z + Lz^2/(2I)
  QOperator hi;  // lambda (s1+ s2- e^{i phi} + h.c.)
  QOperator hs;  // h0 + hi
};

inline Hamiltonians build_hamiltonians(const Params& p, const SpaceSpec& space) {
  p.validate();
  const SparseMat sz1 = embed_qubit_op(1, PauliKind::Z, space).mat;
  const SparseMat sz2 = embed_qubit_op(2, PauliKind::Z, space).mat;
  const SparseMat lz = angular_momentum(space).mat;
  SparseMat h0 = SparseMat(p.B1 * sz1 + p.B2 * sz2) + SparseMat(lz * lz) * (0.5 / p.inertia);

  const SparseMat sp1 = embed_qubit_op(1, PauliKind::Plus, space).mat;
  const SparseMat sm1 = embed_qubit_op(1, PauliKind::Minus, space).mat;
  const SparseMat sp2 = embed_qubit_op(2, PauliKind::Plus, space).mat;
  const SparseMat sm2 = embed_qubit_op(2, PauliKind::Minus, space).mat;
  const SparseMat e = rotor_shift(space).mat;
  SparseMat up = SparseMat(sp1 * sm2) * e;  // transfers qubit-2 excitation to qubit 1, rotor +1
  SparseMat hi = SparseMat(up + SparseMat(up.adjoint())) * p.lambda;

  SparseMat hs = h0 + hi;
  h0.prune(Complex(0.0));
  hi.prune(Complex(0.0));
  hs.prune(Complex(0.0));
  return {{space, std::move(h0), true}, {space, std::move(hi), true}, {space, std::move(hs), true}};
}

/// Gibbs state exp(-beta H)/Z via dense eigendecomposition.
inline DenseMat gibbs_state(const SparseMat& h, double beta) {
  const DenseMat hd(h);
  Eigen::SelfAdjointEigenSolver<DenseMat> es(hd);
  const RealVec& ev = es.eigenvalues();
  RealVec w = (-(beta) * (ev.array() - ev.minCoeff())).exp();
  w /= w.sum();
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
}

inline DenseMat gibbs_state(const QOperator& h, double beta) { return gibbs_state(h.mat, beta); }

/// Eigendecomposition of H_S with degenerate levels clustered.
struct Spectrum {
  RealVec eigenvalues;                     // ascending
  DenseMat eigenvectors;                   // columns
  std::vector<std::vector<int>> clusters;  // indices of (near-)degenerate groups
  double cluster_tol = 0.0;
};

inline Spectrum eigendecompose(const QOperator& hs, double cluster_tol_rel) {
  Eigen::SelfAdjointEigenSolver<DenseMat> es(DenseMat(hs.mat));
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecompose: solver failed");
  Spectrum s;
  s.eigenvalues = es.eigenvalues();
  s.eigenvectors = es.eigenvectors();
  const double scale =
      std::max(std::abs(s.eigenvalues(0)), std::abs(s.eigenvalues(s.eigenvalues.size() - 1)));
  s.cluster_tol = cluster_tol_rel * std::max(scale, 1.0);
  for (int k = 0; k < s.eigenvalues.size(); ++k) {
    if (!s.clusters.empty() &&
        s.eigenvalues(k) - s.eigenvalues(s.clusters.back().front()) <= s.cluster_tol) {
      s.clusters.back().push_back(k);
    } else {
      s.clusters.push_back({k});
    }
  }
  return s;
}

}  // namespace qmill
