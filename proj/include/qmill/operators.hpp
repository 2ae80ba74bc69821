#pragma once

#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "qmill/types.hpp"

namespace qmill {

inline SparseMat sparse_identity(Index n) {
  SparseMat id(n, n);
  id.setIdentity();
  return id;
}

namespace detail {

inline SparseMat qubit_matrix(char kind) {
  // basis: index 0 = excited (sigma_z = +1), index 1 = ground
  std::vector<Triplet> t;
  switch (kind) {
    case 'z':
      t = {{0, 0, 1.0}, {1, 1, -1.0}};
      break;
    case '+':  // |e><g|
      t = {{0, 1, 1.0}};
      break;
    case '-':  // |g><e|
      t = {{1, 0, 1.0}};
      break;
    default:
      throw std::invalid_argument("qubit_matrix: unknown kind");
  }
  SparseMat m(2, 2);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

inline SparseMat kron3(const SparseMat& a, const SparseMat& b, const SparseMat& c) {
  SparseMat ab = Eigen::kroneckerProduct(a, b).eval();
  return Eigen::kroneckerProduct(ab, c).eval();
}

}  // namespace detail

/// L_z on the composite space: diagonal with integer spectrum l_min..l_max,
/// identity on the qubit factors.
inline QOperator angular_momentum(const SpaceSpec& space) {
  const int nr = space.n_rotor();
  SparseMat lz(nr, nr);
  std::vector<Triplet> t;
  t.reserve(nr);
  for (int k = 0; k < nr; ++k) t.emplace_back(k, k, double(space.l_min + k));
  lz.setFromTriplets(t.begin(), t.end());
  return {space, detail::kron3(sparse_identity(2), sparse_identity(2), lz), true};
}

/// E = exp(i*phi): E|l> = |l+1>, annihilating at l_max (open boundary).
/// Fixes the direction convention through [E, L_z] = -E.
inline QOperator rotor_shift(const SpaceSpec& space) {
  const int nr = space.n_rotor();
  SparseMat e(nr, nr);
  std::vector<Triplet> t;
  t.reserve(nr - 1);
  for (int k = 0; k + 1 < nr; ++k) t.emplace_back(k + 1, k, 1.0);
  e.setFromTriplets(t.begin(), t.end());
  return {space, detail::kron3(sparse_identity(2), sparse_identity(2), e), false};
}

/// cos(phi) = (E + E†)/2 on the truncated ladder.
inline QOperator rotor_cos(const SpaceSpec& space) {
  SparseMat e = rotor_shift(space).mat;
  return {space, SparseMat(0.5 * (e + SparseMat(e.adjoint()))), true};
}

/// sin(phi) = (E - E†)/(2i) on the truncated ladder.
inline QOperator rotor_sin(const SpaceSpec& space) {
  SparseMat e = rotor_shift(space).mat;
  return {space, SparseMat((e - SparseMat(e.adjoint())) * Complex(0.0, -0.5)), true};
}

enum class PauliKind { Z, Plus, Minus };

/// Pauli operator on qubit 1 or 2, identity on the other factors.
inline QOperator embed_qubit_op(int which, PauliKind kind, const SpaceSpec& space) {
  if (which != 1 && which != 2) throw std::invalid_argument("embed_qubit_op: which must be 1 or 2");
  const char c = kind == PauliKind::Z ? 'z' : (kind == PauliKind::Plus ? '+' : '-');
  SparseMat q = detail::qubit_matrix(c);
  SparseMat id2 = sparse_identity(2);
  SparseMat idr = sparse_identity(space.n_rotor());
  SparseMat m = which == 1 ? detail::kron3(q, id2, idr) : detail::kron3(id2, q, idr);
  return {space, std::move(m), kind == PauliKind::Z};
}

inline QOperator identity_op(const SpaceSpec& space) {
  return {space, sparse_identity(space.dim()), true};
}

/// Subsystems of the composite space, used as a keep-set for partial_trace.
struct Subsystems {
  bool qubit1 = false;
  bool qubit2 = false;
  bool rotor = false;
};

/// Reduced density matrix over the kept factors; ordering of the kept
/// factors follows the fixed composite ordering. Trace is preserved.
inline DenseMat partial_trace(const DenseMat& rho, const SpaceSpec& space, Subsystems keep) {
  if (!keep.qubit1 && !keep.qubit2 && !keep.rotor)
    throw std::invalid_argument("partial_trace: empty keep-set");
  const int nr = space.n_rotor();
  const std::array<int, 3> dims{2, 2, nr};
  const std::array<bool, 3> kept{keep.qubit1, keep.qubit2, keep.rotor};
  Index dk = 1, dt = 1;
  for (int f = 0; f < 3; ++f) (kept[f] ? dk : dt) *= dims[f];

  auto split = [&](Index idx) {
    // composite index -> (kept-part index, traced-part index), row-major
    std::array<int, 3> s{static_cast<int>(idx / (2 * nr)), static_cast<int>((idx / nr) % 2),
                         static_cast<int>(idx % nr)};
    Index ik = 0, it = 0;
    for (int f = 0; f < 3; ++f) {
      if (kept[f])
        ik = ik * dims[f] + s[f];
      else
        it = it * dims[f] + s[f];
    }
    return std::pair<Index, Index>{ik, it};
  };

  DenseMat out = DenseMat::Zero(dk, dk);
  const Index d = space.dim();
  for (Index i = 0; i < d; ++i) {
    auto [ik, it] = split(i);
    for (Index j = 0; j < d; ++j) {
      auto [jk, jt] = split(j);
      if (it == jt) out(ik, jk) += rho(i, j);
    }
  }
  return out;
}

}  // namespace qmill
