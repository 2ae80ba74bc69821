#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "qmill/dynamics.hpp"
#include "qmill/liouvillian.hpp"
#include "qmill/operators.hpp"

using namespace qmill;

namespace {

DenseMat random_hermitian(Index n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d;
  DenseMat a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = Complex(d(rng), d(rng));
  return hermitize(a);
}

DenseMat random_density(Index n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d;
  DenseMat a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = Complex(d(rng), d(rng));
  DenseMat rho = a * a.adjoint();
  rho /= rho.trace().real();
  return rho;
}

}  // namespace

TEST_CASE("dissipator superoperator") {
  auto space = make_space(0, 1);

  SECTION("identity jump gives the zero superoperator") {
    auto s = dissipator_super(identity_op(space));
    CHECK(max_abs(s.mat) < 1e-14);
  }

  SECTION("sigma- on the excited state: D[s-] |e><e| = |g><g| - |e><e|") {
    SparseMat sm(2, 2);
    std::vector<Triplet> t{{1, 0, 1.0}};
    sm.setFromTriplets(t.begin(), t.end());
    SparseMat d = dissipator_matrix(sm);
    DenseMat ee = DenseMat::Zero(2, 2);
    ee(0, 0) = 1.0;
    DenseMat out = unvec(DenseVec(d * vec(ee)), 2);
    DenseMat expect = DenseMat::Zero(2, 2);
    expect(1, 1) = 1.0;
    expect(0, 0) = -1.0;
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-14);
  }

  SECTION("trace annihilation and hermiticity preservation on random input") {
    auto op = embed_qubit_op(1, PauliKind::Minus, space);
    auto s = dissipator_super(op);
    DenseMat rho = random_hermitian(space.dim(), 3);
    DenseMat out = s.apply(rho);
    CHECK(std::abs(out.trace()) < 1e-12 * rho.cwiseAbs().maxCoeff());
    CHECK((out - out.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("dimension mismatch rejected") {
    auto big = make_space(0, 3);
    Superoperator s = dissipator_super(embed_qubit_op(1, PauliKind::Minus, space));
    DenseMat rho = DenseMat::Identity(big.dim(), big.dim());
    CHECK_THROWS(s.apply(rho));
  }
}

TEST_CASE("local qubit dissipators") {
  Params p;
  p.l_min = -1;
  p.l_max = 1;
  p.beta2 = 0.02;
  auto space = p.space();

  SECTION("rate coefficients at beta1 = 0.1, B1 = 4, g = 1") {
    // upward g^2 n1, downward g^2 (n1+1); probe through matrix elements of
    // the generator acting on |g><g| and |e><e| of qubit 1
    auto [l1, l2] = local_qubit_dissipators(p, space);
    const double n1 = thermal_occupation(0.1, 4.0);
    DenseMat rho = DenseMat::Zero(space.dim(), space.dim());
    rho(space.index_of(1, 1, 0), space.index_of(1, 1, 0)) = 1.0;  // qubit 1 ground
    DenseMat out = l1.apply(rho);
    CHECK(out(space.index_of(0, 1, 0), space.index_of(0, 1, 0)).real() ==
          Catch::Approx(n1).epsilon(1e-12));  // pump up at g^2 n1 = 0.81597
    rho.setZero();
    rho(space.index_of(0, 1, 0), space.index_of(0, 1, 0)) = 1.0;  // qubit 1 excited
    out = l1.apply(rho);
    CHECK(out(space.index_of(1, 1, 0), space.index_of(1, 1, 0)).real() ==
          Catch::Approx(n1 + 1.0).epsilon(1e-12));
  }

  SECTION("chi = 1 decouples bath 1") {
    Params p1 = p;
    p1.chi = 1.0;
    auto [l1, l2] = local_qubit_dissipators(p1, space);
    CHECK(max_abs(l1.mat) == 0.0);
    CHECK(max_abs(l2.mat) > 0.0);
  }

  SECTION("detailed-balance fixed point at lambda = gamma = 0") {
    Params p0 = p;
    p0.lambda = 0.0;
    p0.gamma = 0.0;
    auto l = assemble_local_liouvillian(p0, space);
    SparseMat b1(2, 2), b2(2, 2);
    std::vector<Triplet> t1{{0, 0, p0.B1}, {1, 1, -p0.B1}};
    std::vector<Triplet> t2{{0, 0, p0.B2}, {1, 1, -p0.B2}};
    b1.setFromTriplets(t1.begin(), t1.end());
    b2.setFromTriplets(t2.begin(), t2.end());
    DenseMat gq = Eigen::kroneckerProduct(gibbs_state(b1, p0.beta1),
                                          gibbs_state(b2, p0.beta2))
                      .eval();
    DenseMat rr = DenseMat::Zero(3, 3);
    rr(1, 1) = 1.0;  // any rotor diagonal state
    DenseMat rho = Eigen::kroneckerProduct(gq, rr).eval();
    CHECK(l.apply(rho).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("rotor load dissipator") {
  SECTION("gamma = 0 gives the zero superoperator") {
    Params p;
    p.gamma = 0.0;
    p.l_min = -2;
    p.l_max = 2;
    auto s = rotor_load_dissipator(p, p.space());
    CHECK(s.mat.nonZeros() == 0);
  }

  SECTION("acts on the rotor factor only") {
    Params p;
    p.gamma = 0.01;
    p.l_min = -2;
    p.l_max = 2;
    auto space = p.space();
    auto s = rotor_load_dissipator(p, space);
    // adjoint action annihilates qubit observables
    auto sz1 = embed_qubit_op(1, PauliKind::Z, space).mat;
    DenseMat rho = random_density(space.dim(), 11);
    DenseMat drho = s.apply(rho);
    CHECK(std::abs((DenseMat(sz1) * drho).trace()) < 1e-12);
  }

  SECTION("steady rotor approaches Gibbs(Lz^2/2I, beta_r)") {
    // intrinsic deviation of the load's fixed point from Gibbs scales as
    // beta_r/I; beta_r = 0.04 keeps it within the documented 1e-3 tolerance
    Params p;
    p.lambda = 0.0;
    p.gamma = 0.01;
    p.beta_r = 0.04;
    p.inertia = 1.0;
    p.l_min = -24;
    p.l_max = 24;
    auto space = p.space();
    auto l = assemble_local_liouvillian(p, space);
    SteadyOptions so;
    so.check_uniqueness = false;
    auto ss = steady_state(l.total, space, so);
    DenseMat rot = partial_trace(ss.rho, space, {false, false, true});
    const int nr = space.n_rotor();
    DenseMat gib = DenseMat::Zero(nr, nr);
    double z = 0;
    for (int k = 0; k < nr; ++k) {
      const double lv = p.l_min + k;
      gib(k, k) = std::exp(-p.beta_r * lv * lv / (2 * p.inertia));
      z += gib(k, k).real();
    }
    gib /= z;
    CHECK(trace_distance(rot, gib) < 1e-3);
  }

  SECTION("friction: <Lz> decays at rate gamma") {
    Params p;
    p.lambda = 0.0;
    p.g = 1.0;
    p.gamma = 0.05;
    p.beta_r = 0.09;
    p.l_min = -14;
    p.l_max = 14;
    auto space = p.space();
    auto l = assemble_local_liouvillian(p, space);
    // start with the rotor at |l=5>
    DenseMat q = DenseMat::Zero(4, 4);
    q(0, 0) = 1.0;
    DenseMat rr = DenseMat::Zero(space.n_rotor(), space.n_rotor());
    rr(5 - p.l_min, 5 - p.l_min) = 1.0;
    DenseMat rho0 = Eigen::kroneckerProduct(q, rr).eval();
    auto lz = angular_momentum(space).mat;
    auto traj = evolve(l.total, space, rho0, {0.0, 4.0, 8.0, 12.0}, {1e-9});
    double prev = 5.0;
    for (size_t k = 1; k < traj.size(); ++k) {
      const double val = detail::real_trace_prod(lz, traj[k].rho);
      CHECK(val < prev);  // monotone decay toward ~0
      const double rate = -std::log(val / prev) / 4.0;
      CHECK(rate == Catch::Approx(p.gamma).epsilon(0.02));
      prev = val;
    }
  }
}

TEST_CASE("assembled local liouvillian") {
  Params p;
  p.l_min = -3;
  p.l_max = 3;
  p.beta2 = 0.02;
  p.gamma = 1e-3;
  auto space = p.space();
  auto l = assemble_local_liouvillian(p, space);

  SECTION("trace annihilation of every part and the total") {
    for (auto k : {GeneratorKind::Hamiltonian, GeneratorKind::Bath1, GeneratorKind::Bath2,
                   GeneratorKind::RotorLoad}) {
      CHECK(trace_annihilation_defect(l.part(k).mat, space.dim()) < 1e-10);
    }
    CHECK(trace_annihilation_defect(l.total, space.dim()) < 1e-10);
    DenseMat out = l.apply(DenseMat::Identity(space.dim(), space.dim()) / double(space.dim()));
    CHECK(std::abs(out.trace()) < 1e-13);
  }

  SECTION("unique steady state at the operating point") {
    auto ss = steady_state(l.total, space);
    CHECK(ss.unique);
    CHECK(ss.residual < 1e-10);
  }

  SECTION("complete positivity along evolution") {
    DenseMat rho0 = random_density(space.dim(), 5);
    auto traj = evolve(l.total, space, rho0, {0.5, 2.0, 8.0}, {1e-9});
    for (const auto& pt : traj) {
      Eigen::SelfAdjointEigenSolver<DenseMat> es(pt.rho, Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() > -1e-8);
    }
  }

  SECTION("qubit dissipators do not move rotor observables") {
    auto lz = angular_momentum(space).mat;
    SparseMat lz2 = SparseMat(lz * lz);
    DenseMat rho = random_density(space.dim(), 21);
    DenseMat d1 = l.bath1.apply(rho), d2 = l.bath2.apply(rho);
    CHECK(std::abs((DenseMat(lz) * d1).trace()) < 1e-12);
    CHECK(std::abs((DenseMat(lz) * d2).trace()) < 1e-12);
    CHECK(std::abs((DenseMat(lz2) * d1).trace()) < 1e-12);
    CHECK(std::abs((DenseMat(lz2) * d2).trace()) < 1e-12);
  }
}
