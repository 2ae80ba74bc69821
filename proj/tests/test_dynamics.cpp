#include <catch2/catch_amalgamated.hpp>

#include "qmill/dynamics.hpp"
#include "qmill/liouvillian.hpp"
#include "qmill/operators.hpp"
#include "qmill/thermo.hpp"

using namespace qmill;

TEST_CASE("evolve: closed-system energy conservation") {
  Params p;
  p.l_min = -2;
  p.l_max = 2;
  auto space = p.space();
  auto h = build_hamiltonians(p, space);
  SparseMat l = hamiltonian_matrix(h.hs.mat);
  // superposition-rich initial state
  DenseMat rho0 = DenseMat::Zero(space.dim(), space.dim());
  DenseVec psi = DenseVec::Zero(space.dim());
  psi(space.index_of(0, 1, 0)) = std::sqrt(0.5);
  psi(space.index_of(1, 0, 1)) = std::sqrt(0.3);
  psi(space.index_of(1, 1, -1)) = std::sqrt(0.2);
  rho0 = psi * psi.adjoint();
  auto traj = evolve(l, space, rho0, {0.0, 1.0, 3.0, 7.0}, {1e-10});
  const double e0 = detail::real_trace_prod(h.hs.mat, traj.front().rho);
  for (const auto& pt : traj) {
    CHECK(detail::real_trace_prod(h.hs.mat, pt.rho) == Catch::Approx(e0).epsilon(1e-8));
    CHECK(std::abs(pt.rho.trace().real() - 1.0) < 1e-9);
  }
}

TEST_CASE("evolve: two-level relaxation closed form") {
  // lambda = 0: <s1z>(t) relaxes at rate g1^2 (2 n1 + 1) toward its Gibbs value
  Params p;
  p.l_min = 0;
  p.l_max = 1;
  p.lambda = 0.0;
  p.gamma = 0.0;
  p.g = 0.8;
  auto space = p.space();
  auto l = assemble_local_liouvillian(p, space);
  const double n1 = thermal_occupation(p.beta1, p.B1);
  const double rate = p.g1() * p.g1() * (2 * n1 + 1);
  const double sz_inf = -1.0 / (2 * n1 + 1);  // Gibbs value of <sz>

  DenseMat rho0 = DenseMat::Zero(space.dim(), space.dim());
  rho0(space.index_of(0, 1, 0), space.index_of(0, 1, 0)) = 1.0;  // qubit 1 excited
  auto sz1 = embed_qubit_op(1, PauliKind::Z, space).mat;
  auto traj = evolve(l.total, space, rho0, {0.0, 0.3, 0.8, 1.5}, {1e-10});
  for (const auto& pt : traj) {
    const double expect = sz_inf + (1.0 - sz_inf) * std::exp(-rate * pt.t);
    CHECK(detail::real_trace_prod(sz1, pt.rho) == Catch::Approx(expect).margin(1e-7));
  }
}

TEST_CASE("evolve: central-difference derivative oracle") {
  Params p;
  p.l_min = -2;
  p.l_max = 2;
  p.beta2 = 0.02;
  p.gamma = 0.01;
  auto space = p.space();
  auto l = assemble_local_liouvillian(p, space);
  auto lz = angular_momentum(space).mat;
  SparseMat lz2 = SparseMat(lz * lz);
  DenseMat rho0 = gibbs_state(l.h.h0, 0.2);
  const double t0 = 0.5;
  const double hs[] = {0.02, 0.01, 0.005};
  double prev_err = 1e300;
  for (double h : hs) {
    auto traj = evolve(l.total, space, rho0, {t0 - h, t0, t0 + h}, {1e-12});
    const double fd = (detail::real_trace_prod(lz2, traj[2].rho) -
                       detail::real_trace_prod(lz2, traj[0].rho)) /
                      (2 * h);
    const double exact = detail::real_trace_prod(lz2, l.apply(traj[1].rho));
    const double err = std::abs(fd - exact);
    CHECK(err < prev_err + 1e-12);  // O(h^2) refinement
    prev_err = err;
  }
  CHECK(prev_err < 5e-6);
}

TEST_CASE("steady state: degenerate decoupled limit") {
  // lambda = 0, gamma = 0: qubits Gibbs x Gibbs, rotor part degenerate
  Params p;
  p.l_min = -1;
  p.l_max = 1;  // dim 12, dense-SVD route
  p.lambda = 0.0;
  p.gamma = 0.0;
  auto space = p.space();
  auto l = assemble_local_liouvillian(p, space);
  auto ss = steady_state(l.total, space);
  CHECK_FALSE(ss.unique);
  CHECK(!ss.warning.empty());
  // qubit marginals are Gibbs regardless of the rotor degeneracy
  SparseMat b1(2, 2), b2(2, 2);
  std::vector<Triplet> t1{{0, 0, p.B1}, {1, 1, -p.B1}}, t2{{0, 0, p.B2}, {1, 1, -p.B2}};
  b1.setFromTriplets(t1.begin(), t1.end());
  b2.setFromTriplets(t2.begin(), t2.end());
  CHECK(trace_distance(partial_trace(ss.rho, space, {true, false, false}),
                       gibbs_state(b1, p.beta1)) < 1e-8);
  CHECK(trace_distance(partial_trace(ss.rho, space, {false, true, false}),
                       gibbs_state(b2, p.beta2)) < 1e-8);
}

TEST_CASE("steady state: rotor thermalizes under the load") {
  Params p;
  p.l_min = -20;
  p.l_max = 20;
  p.lambda = 0.0;
  p.gamma = 0.02;
  p.beta_r = 0.04;  // the load's fixed point deviates from Gibbs at O(beta_r/I)
  auto space = p.space();
  auto l = assemble_local_liouvillian(p, space);
  auto ss = steady_state(l.total, space, {1e-10, false});
  const int nr = space.n_rotor();
  DenseMat gib = DenseMat::Zero(nr, nr);
  double z = 0;
  for (int k = 0; k < nr; ++k) {
    const double lv = p.l_min + k;
    gib(k, k) = std::exp(-p.beta_r * lv * lv / (2 * p.inertia));
    z += gib(k, k).real();
  }
  gib /= z;
  CHECK(trace_distance(partial_trace(ss.rho, space, {false, false, true}), gib) < 1e-3);
}

TEST_CASE("steady state: solver hygiene and route agreement") {
  Params p;
  p.l_min = -1;
  p.l_max = 2;  // dim 16, dim^2 = 256: both routes available
  p.beta2 = 0.02;
  p.gamma = 5e-3;
  auto space = p.space();
  auto l = assemble_local_liouvillian(p, space);

  auto dense = steady_state(l.total, space);
  SteadyOptions so;
  so.force_sparse = true;
  auto sparse = steady_state(l.total, space, so);
  CHECK(trace_distance(dense.rho, sparse.rho) < 1e-8);

  for (const auto& r : {dense, sparse}) {
    CHECK(std::abs(r.rho.trace().real() - 1.0) < 1e-10);
    CHECK((r.rho - r.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.min_eigenvalue > -1e-8);
    CHECK(r.residual < 1e-10);
    CHECK(r.unique);
  }
}

TEST_CASE("long-time evolution agrees with the steady solver") {
  // mild rates so the horizon is explicitly reachable
  Params p;
  p.B1 = 2.0;
  p.B2 = 3.0;
  p.beta1 = 0.3;
  p.beta2 = 0.1;
  p.beta_r = 0.2;
  p.lambda = 0.2;
  p.gamma = 0.05;
  p.l_min = -6;
  p.l_max = 6;
  auto space = p.space();
  auto l = assemble_local_liouvillian(p, space);
  auto ss = steady_state(l.total, space, {1e-12, false});
  DenseMat rho0 = gibbs_state(l.h.h0, p.beta_r);
  auto traj = evolve(l.total, space, rho0, {400.0}, {1e-10});
  CHECK(trace_distance(traj.back().rho, ss.rho) < 1e-6);
}

TEST_CASE("explicit integrator reports stiffness") {
  Params p;
  p.l_min = -10;
  p.l_max = 30;
  p.beta2 = 0.05;
  auto space = p.space();
  auto l = assemble_local_liouvillian(p, space);
  DenseMat rho0 = gibbs_state(l.h.h0, p.beta_r);
  EvolveOptions opts;
  opts.method = EvolveMethod::Explicit;
  opts.max_explicit_steps = 300;  // tiny budget: the gamma-scale horizon is out of reach
  CHECK_THROWS_AS(evolve(l.total, space, rho0, {2e4}, opts), StiffnessError);
}

TEST_CASE("implicit path matches the explicit one where both work") {
  Params p;
  p.B1 = 2.0;
  p.B2 = 3.0;
  p.beta1 = 0.3;
  p.beta2 = 0.1;
  p.lambda = 0.2;
  p.gamma = 0.02;
  p.l_min = -4;
  p.l_max = 4;
  auto space = p.space();
  auto l = assemble_local_liouvillian(p, space);
  DenseMat rho0 = gibbs_state(l.h.h0, 0.2);
  auto ex = evolve(l.total, space, rho0, {5.0, 15.0}, {1e-10, EvolveMethod::Explicit});
  EvolveOptions oi;
  oi.tol = 1e-9;
  oi.method = EvolveMethod::Implicit;
  auto im = evolve(l.total, space, rho0, {5.0, 15.0}, oi);
  for (size_t k = 0; k < ex.size(); ++k) CHECK(trace_distance(ex[k].rho, im[k].rho) < 1e-6);
}
