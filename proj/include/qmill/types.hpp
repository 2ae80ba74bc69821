#pragma once

#include <array>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace qmill {

using Complex = std::complex<double>;
using SparseMat = Eigen::SparseMatrix<Complex>;
using DenseMat = Eigen::MatrixXcd;
using DenseVec = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;
using Triplet = Eigen::Triplet<Complex>;
using Index = Eigen::Index;

inline constexpr Complex kI{0.0, 1.0};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StiffnessError : NumericalError {
  using NumericalError::NumericalError;
};

/// Truncated composite Hilbert space: qubit 1 (x) qubit 2 (x) rotor ladder.
/// Rotor levels are the L_z eigenstates |l>, l in [l_min, l_max].
/// Qubit basis index 0 = excited (sigma_z = +1), 1 = ground (sigma_z = -1).
/// Composite basis index: (s1*2 + s2)*n_rotor + (l - l_min), row-major over
/// the fixed (qubit1, qubit2, rotor) ordering.
struct SpaceSpec {
  int l_min = 0;
  int l_max = 1;

  int n_rotor() const { return l_max - l_min + 1; }
  Index dim() const { return 4 * static_cast<Index>(n_rotor()); }

  Index index_of(int s1, int s2, int l) const {
    return (static_cast<Index>(s1) * 2 + s2) * n_rotor() + (l - l_min);
  }

  struct BasisState {
    int s1, s2, l;
  };
  BasisState state_of(Index idx) const {
    const int nr = n_rotor();
    return {static_cast<int>(idx / (2 * nr)), static_cast<int>((idx / nr) % 2),
            l_min + static_cast<int>(idx % nr)};
  }

  bool operator==(const SpaceSpec&) const = default;
};

inline SpaceSpec make_space(int l_min, int l_max) {
  if (l_min >= l_max) {
    throw std::invalid_argument("make_space: need l_min < l_max, got [" + std::to_string(l_min) +
                                ", " + std::to_string(l_max) + "]");
  }
  return SpaceSpec{l_min, l_max};
}

/// Sparse operator tagged with the composite space it acts on.
struct QOperator {
  SpaceSpec space;
  SparseMat mat;
  bool hermitian = false;
};

inline double max_abs(const SparseMat& m) {
  double v = 0.0;
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMat::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
  }
  return v;
}

inline double hermiticity_defect(const SparseMat& m) {
  SparseMat d = SparseMat(m - SparseMat(m.adjoint()));
  return max_abs(d);
}

inline void check_same_space(const QOperator& a, const QOperator& b, const char* where) {
  if (!(a.space == b.space)) throw std::invalid_argument(std::string(where) + ": operator space mismatch");
}

/// Column-stacked vectorization helpers. rho and vec share memory layout
/// (Eigen matrices are column-major), so these are cheap reshapes.
inline DenseVec vec(const DenseMat& rho) {
  return Eigen::Map<const DenseVec>(rho.data(), rho.size());
}

inline DenseMat unvec(const DenseVec& v, Index dim) {
  return Eigen::Map<const DenseMat>(v.data(), dim, dim);
}

inline DenseMat hermitize(const DenseMat& rho) { return 0.5 * (rho + rho.adjoint()); }

/// Trace distance (1/2)||a - b||_1 between Hermitian matrices.
inline double trace_distance(const DenseMat& a, const DenseMat& b) {
  Eigen::SelfAdjointEigenSolver<DenseMat> es(hermitize(a - b), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace qmill
