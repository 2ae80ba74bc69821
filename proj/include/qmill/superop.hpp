#pragma once

#include <unsupported/Eigen/KroneckerProduct>

#include "qmill/operators.hpp"
#include "qmill/types.hpp"

namespace qmill {

namespace detail {

inline double real_trace_prod(const SparseMat& a, const DenseMat& b) {
  // Re Tr[a b] without forming the product
  Complex s = 0.0;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMat::InnerIterator it(a, k); it; ++it) s += it.value() * b(it.col(), it.row());
  }
  return s.real();
}

}  // namespace detail

enum class GeneratorKind { Hamiltonian, Bath1, Bath2, RotorLoad };

/// Sparse matrix acting on column-stacked density matrices:
/// vec(A X B) = (B^T kron A) vec(X).
struct Superoperator {
  SpaceSpec space;
  SparseMat mat;  // dim^2 x dim^2
  GeneratorKind kind = GeneratorKind::Hamiltonian;

  DenseMat apply(const DenseMat& rho) const {
    const Index d = space.dim();
    if (rho.rows() != d || rho.cols() != d)
      throw std::invalid_argument("Superoperator::apply: state dimension mismatch");
    return unvec(DenseVec(mat * vec(rho)), d);
  }
};

/// Lindblad dissipator D[O]: rho -> O rho O† - {O†O, rho}/2.
inline SparseMat dissipator_matrix(const SparseMat& o) {
  const Index d = o.rows();
  SparseMat id = sparse_identity(d);
  SparseMat odo = SparseMat(o.adjoint()) * o;
  SparseMat m = Eigen::kroneckerProduct(o.conjugate(), o).eval();
  m -= SparseMat(0.5 * Eigen::kroneckerProduct(id, odo).eval());
  m -= SparseMat(0.5 * Eigen::kroneckerProduct(SparseMat(odo.transpose()), id).eval());
  m.prune(Complex(0.0));
  return m;
}

inline Superoperator dissipator_super(const QOperator& o) {
  return {o.space, dissipator_matrix(o.mat), GeneratorKind::Bath1};
}

/// -i[H, .] as a superoperator.
inline SparseMat hamiltonian_matrix(const SparseMat& h) {
  const Index d = h.rows();
  SparseMat id = sparse_identity(d);
  SparseMat m = SparseMat(Eigen::kroneckerProduct(id, h).eval() * Complex(0.0, -1.0));
  m += SparseMat(Eigen::kroneckerProduct(SparseMat(h.transpose()), id).eval() * Complex(0.0, 1.0));
  m.prune(Complex(0.0));
  return m;
}

/// <<1| L : the trace functional applied after the generator; zero for any
/// trace-preserving generator.
inline double trace_annihilation_defect(const SparseMat& super, Index dim) {
  DenseVec one = DenseVec::Zero(dim * dim);
  for (Index i = 0; i < dim; ++i) one(i + dim * i) = 1.0;
  return (super.adjoint() * one).norm();
}

}  // namespace qmill
