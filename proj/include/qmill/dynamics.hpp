#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/SparseLU>

#include "qmill/superop.hpp"
#include "qmill/types.hpp"

namespace qmill {

namespace detail {

inline double column_norm_estimate(const SparseMat& m) {
  double best = 0.0;
  for (int k = 0; k < m.outerSize(); ++k) {
    double s = 0.0;
    for (SparseMat::InnerIterator it(m, k); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

/// Generator with one row replaced by a functional row; solving against the
/// matching unit vector pins the null vector with that normalization.
inline SparseMat bordered_matrix(const SparseMat& super, Index dim, Index replaced_row,
                                 const std::function<Complex(Index)>& functional) {
  std::vector<Triplet> t;
  t.reserve(super.nonZeros() + dim);
  for (int k = 0; k < super.outerSize(); ++k) {
    for (SparseMat::InnerIterator it(super, k); it; ++it) {
      if (it.row() != replaced_row) t.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Index j = 0; j < dim * dim; ++j) {
    Complex f = functional(j);
    if (f != Complex(0.0)) t.emplace_back(replaced_row, j, f);
  }
  SparseMat m(dim * dim, dim * dim);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

inline Complex trace_functional(Index j, Index dim) { return j % dim == j / dim ? 1.0 : 0.0; }

}  // namespace detail

struct SteadyOptions {
  double tol = 1e-10;
  bool check_uniqueness = true;
  double gap_tol = 1e-8;  // trace distance at which two probe solutions count as equal
  bool force_sparse = false;  // skip the dense-SVD route (solver cross-checks)
};

struct SteadyResult {
  DenseMat rho;
  double residual = 0.0;      // ||L vec(rho)|| / ||L||_1
  double min_eigenvalue = 0.0;
  bool unique = true;
  double gap_estimate = 0.0;  // trace distance between the two probe solutions
  std::string warning;
};

/// Null space of the generator with trace normalization. Sparse LU on the
/// bordered system with one refinement sweep; dense-SVD route for small
/// systems (dim^2 <= 4096), which also yields an exact singular-value gap.
inline SteadyResult steady_state(const SparseMat& super, const SpaceSpec& space,
                                 const SteadyOptions& opts = {}) {
  const Index dim = space.dim();
  const Index n2 = dim * dim;
  if (super.rows() != n2) throw std::invalid_argument("steady_state: dimension mismatch");
  const double scale = std::max(detail::column_norm_estimate(super), 1e-300);
  SteadyResult out;

  auto finalize = [&](DenseVec v) {
    DenseMat rho = hermitize(unvec(v, dim));
    const double tr = rho.trace().real();
    if (std::abs(tr) < 1e-14) throw NumericalError("steady_state: null vector has vanishing trace");
    rho /= tr;
    out.residual = (super * vec(rho)).norm() / scale;
    Eigen::SelfAdjointEigenSolver<DenseMat> es(rho, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = es.eigenvalues().minCoeff();
    out.rho = std::move(rho);
  };

  if (n2 <= 4096 && !opts.force_sparse) {
    // dense SVD: exact null space and gap
    DenseMat l = DenseMat(super);
    Eigen::JacobiSVD<DenseMat> svd(l, Eigen::ComputeFullV);
    const RealVec& sv = svd.singularValues();
    const Index last = sv.size() - 1;
    out.gap_estimate = sv(last - 1) / scale;
    const double null_tol = std::max(opts.tol, 1e-12);
    std::vector<Index> null_idx;
    for (Index k = last; k >= 0 && sv(k) / scale <= null_tol; --k) null_idx.push_back(k);
    if (null_idx.empty()) null_idx.push_back(last);
    if (null_idx.size() > 1) {
      out.unique = false;
      out.warning = "degenerate null space (dimension " + std::to_string(null_idx.size()) +
                    "); returning the minimum-norm trace-one element";
      // minimum-norm combination with unit trace
      DenseVec traces(null_idx.size());
      DenseMat basis(n2, null_idx.size());
      for (size_t c = 0; c < null_idx.size(); ++c) {
        basis.col(c) = svd.matrixV().col(null_idx[c]);
        traces(c) = unvec(DenseVec(basis.col(c)), dim).trace();
      }
      const double nrm2 = traces.squaredNorm();
      if (nrm2 < 1e-20) throw NumericalError("steady_state: traceless null space");
      DenseVec v = basis * DenseVec(traces.conjugate() / nrm2);
      finalize(std::move(v));
      // a PSD-clip keeps the returned representative physical
      Eigen::SelfAdjointEigenSolver<DenseMat> es(out.rho);
      RealVec w = es.eigenvalues().cwiseMax(0.0);
      out.rho = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
      out.rho /= out.rho.trace().real();
      out.residual = (super * vec(out.rho)).norm() / scale;
      return out;
    }
    finalize(DenseVec(svd.matrixV().col(null_idx[0])));
    return out;
  }

  // sparse route: bordered LU
  const Index row0 = 0;
  SparseMat m = detail::bordered_matrix(super, dim, row0,
                                        [&](Index j) { return detail::trace_functional(j, dim); });
  Eigen::SparseLU<SparseMat> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success)
    throw NumericalError("steady_state: bordered LU failed (degenerate or ill-conditioned generator)");
  DenseVec rhs = DenseVec::Zero(n2);
  rhs(row0) = 1.0;
  DenseVec x = lu.solve(rhs);

  // one refinement sweep against the full generator
  DenseVec r = super * x;
  Complex tr = 0.0;
  for (Index i = 0; i < dim; ++i) tr += x(i + dim * i);
  r(row0) = tr - 1.0;
  x -= lu.solve(r);

  finalize(std::move(x));
  if (out.residual > opts.tol) {
    out.warning = "steady-state residual " + std::to_string(out.residual) + " exceeds tolerance";
  }

  if (opts.check_uniqueness) {
    // probe with an independent (deterministic pseudo-random) functional
    const Index row1 = dim + 1;
    std::uint64_t s = 0x9e3779b97f4a7c15ull;
    auto rnd = [&s]() {
      s ^= s << 13; s ^= s >> 7; s ^= s << 17;
      return 2.0 * (double(s % 1000003) / 1000003.0) - 1.0;
    };
    std::vector<Complex> f(dim);
    for (Index i = 0; i < dim; ++i) f[i] = Complex(rnd(), rnd());
    SparseMat m2 = detail::bordered_matrix(super, dim, row1, [&](Index j) {
      // functional supported on the diagonal, with pseudo-random weights
      return j % dim == j / dim ? f[j % dim] : Complex(0.0);
    });
    Eigen::SparseLU<SparseMat> lu2;
    lu2.compute(m2);
    if (lu2.info() != Eigen::Success) {
      out.unique = false;
      out.warning = "degeneracy probe: second bordered factorization failed";
      return out;
    }
    DenseVec rhs2 = DenseVec::Zero(n2);
    rhs2(row1) = 1.0;
    DenseVec y = lu2.solve(rhs2);
    DenseMat rho2 = hermitize(unvec(y, dim));
    const double tr2 = rho2.trace().real();
    if (std::abs(tr2) < 1e-12 * y.norm()) {
      out.unique = false;
      out.warning = "degeneracy probe: second solution is traceless";
      return out;
    }
    rho2 /= tr2;
    out.gap_estimate = trace_distance(out.rho, rho2);
    if (out.gap_estimate > opts.gap_tol) {
      out.unique = false;
      out.warning = "degenerate steady state suspected (probe distance " +
                    std::to_string(out.gap_estimate) + ")";
    }
  }
  return out;
}

enum class EvolveMethod { Auto, Explicit, Implicit };

struct EvolveOptions {
  double tol = 1e-8;
  EvolveMethod method = EvolveMethod::Auto;
  int max_explicit_steps = 40000;  // budget before Auto switches to the implicit path
  double h_init = 1e-4;
};

struct TrajectoryPoint {
  double t;
  DenseMat rho;
};

namespace detail {

/// Dormand-Prince 5(4) embedded step. Returns the scaled error estimate.
struct Dopri5 {
  const SparseMat& l;
  double atol, rtol;
  DenseVec k1, k2, k3, k4, k5, k6, k7;

  explicit Dopri5(const SparseMat& l_, double tol) : l(l_), atol(tol), rtol(tol) {}

  double step(const DenseVec& y, double h, DenseVec& out, bool have_k1) {
    if (!have_k1) k1 = l * y;
    k2 = l * DenseVec(y + h * (1.0 / 5.0) * k1);
    k3 = l * DenseVec(y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    k4 = l * DenseVec(y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
    k5 = l * DenseVec(y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 +
                               64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4));
    k6 = l * DenseVec(y + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 +
                               49.0 / 176.0 * k4 - 5103.0 / 18656.0 * k5));
    out = y + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 -
                   2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
    k7 = l * out;
    DenseVec err = h * ((35.0 / 384.0 - 5179.0 / 57600.0) * k1 +
                        (500.0 / 1113.0 - 7571.0 / 16695.0) * k3 +
                        (125.0 / 192.0 - 393.0 / 640.0) * k4 +
                        (-2187.0 / 6784.0 + 92097.0 / 339200.0) * k5 +
                        (11.0 / 84.0 - 187.0 / 2100.0) * k6 - (1.0 / 40.0) * k7);
    double s = 0.0;
    for (Index i = 0; i < err.size(); ++i) {
      const double sc = atol + rtol * std::max(std::abs(y(i)), std::abs(out(i)));
      const double e = std::abs(err(i)) / sc;
      s += e * e;
    }
    return std::sqrt(s / double(err.size()));
  }
};

/// Crank-Nicolson stepper with cached factorizations of (1 - h/2 L).
class TrapezoidStepper {
 public:
  explicit TrapezoidStepper(const SparseMat& l) : l_(l), id_(l.rows(), l.cols()) {
    id_.setIdentity();
  }

  void set_h(double h) {
    if (lu_ && h == h_) return;
    h_ = h;
    SparseMat a = id_ - SparseMat((h / 2.0) * l_);
    lu_ = std::make_unique<Eigen::SparseLU<SparseMat>>();
    lu_->compute(a);
    if (lu_->info() != Eigen::Success)
      throw NumericalError("evolve: trapezoidal factorization failed");
  }

  DenseVec step(const DenseVec& y) const {
    DenseVec b = y + (h_ / 2.0) * (l_ * y);
    return lu_->solve(b);
  }

  double h() const { return h_; }

 private:
  const SparseMat& l_;
  SparseMat id_;
  double h_ = 0.0;
  std::unique_ptr<Eigen::SparseLU<SparseMat>> lu_;
};

}  // namespace detail

/// Integrate vec(rho) under the generator, emitting re-Hermitized states at
/// the requested times. Explicit adaptive Dormand-Prince with PI step
/// control; in Auto mode a step-budget overrun hands over to an A-stable
/// trapezoidal path with step-doubling error control (slow generators,
/// gamma << 1, need horizons ~1/gamma that an explicit scheme cannot reach).
inline std::vector<TrajectoryPoint> evolve(const SparseMat& super, const SpaceSpec& space,
                                           const DenseMat& rho0, std::vector<double> emit_times,
                                           const EvolveOptions& opts = {}) {
  const Index dim = space.dim();
  if (rho0.rows() != dim) throw std::invalid_argument("evolve: state dimension mismatch");
  std::sort(emit_times.begin(), emit_times.end());
  std::vector<TrajectoryPoint> traj;
  traj.reserve(emit_times.size() + 1);

  DenseVec y = vec(rho0);
  double t = 0.0;
  const double trace0 = rho0.trace().real();

  auto emit = [&](double te) {
    DenseMat rho = hermitize(unvec(y, dim));
    const double drift = std::abs(rho.trace().real() - trace0);
    if (drift > 1e-8)
      throw NumericalError("evolve: cumulative trace drift " + std::to_string(drift));
    traj.push_back({te, std::move(rho)});
  };

  if (!emit_times.empty() && emit_times.front() == 0.0) emit(0.0);

  detail::Dopri5 rk(super, opts.tol);
  double h = opts.h_init;
  long steps = 0;
  bool implicit_mode = opts.method == EvolveMethod::Implicit;
  double err_prev = 1.0;

  std::unique_ptr<detail::TrapezoidStepper> cn_full, cn_half;
  double cn_h_target = 0.0;

  for (double te : emit_times) {
    if (te <= t) continue;
    while (t < te) {
      if (!implicit_mode) {
        const double h_try = std::min(h, te - t);
        DenseVec ynew;
        const double err = rk.step(y, h_try, ynew, false);
        if (err <= 1.0) {
          y = std::move(ynew);
          t += h_try;
          // PI controller; growth is based on the controller step, not the
          // emission-clipped one
          const double fac = 0.9 * std::pow(err + 1e-16, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
          h *= std::clamp(fac, 0.2, 5.0);
          err_prev = std::max(err, 1e-16);
        } else {
          h = h_try * std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
        if (h < 1e-13 * std::max(1.0, std::abs(t))) {
          if (opts.method == EvolveMethod::Explicit)
            throw StiffnessError("evolve: step size underflow; the generator is stiff on this "
                                 "horizon, use steady_state() or the implicit method");
          implicit_mode = true;
          cn_h_target = std::max(10.0 * h, 1e-6);
        }
        if (++steps > opts.max_explicit_steps) {
          if (opts.method == EvolveMethod::Explicit)
            throw StiffnessError("evolve: explicit step budget exhausted; use steady_state() or "
                                 "the implicit method");
          implicit_mode = true;
          cn_h_target = 10.0 * h;
        }
      } else {
        if (!cn_full) {
          cn_full = std::make_unique<detail::TrapezoidStepper>(super);
          cn_half = std::make_unique<detail::TrapezoidStepper>(super);
          if (cn_h_target <= 0.0) cn_h_target = std::max(opts.h_init, (te - t) / 64.0);
        }
        // segment to the next emission time with uniform substeps
        const double seg = te - t;
        const long nsub = std::max<long>(1, long(std::ceil(seg / cn_h_target)));
        const double hs = seg / double(nsub);
        cn_full->set_h(hs);
        cn_half->set_h(hs / 2.0);
        // step-doubling error control on the first substep of the segment
        DenseVec one = cn_full->step(y);
        DenseVec two = cn_half->step(cn_half->step(y));
        const double scale = std::max(1.0, y.norm());
        const double err = (one - two).norm() / (3.0 * scale);
        if (err > opts.tol && hs > 1e-12) {
          cn_h_target = hs / 2.0;
          continue;  // redo the segment with a finer step
        }
        y = std::move(two);
        for (long k = 1; k < nsub; ++k) y = cn_half->step(cn_half->step(y));
        t = te;
        if (err < opts.tol / 32.0) cn_h_target = hs * 2.0;
      }
    }
    emit(te);
  }
  return traj;
}

}  // namespace qmill
