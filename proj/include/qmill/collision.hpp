#pragma once

#include <algorithm>
#include <numeric>
#include <thread>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "qmill/liouvillian.hpp"
#include "qmill/model.hpp"

namespace qmill {

struct CollisionConfig {
  double tau = 0.1;
  int n_fock1 = 0;          // 0 => chosen from the tail-mass target
  int n_fock2 = 0;
  int steps = 100;
  double expm_tol = 1e-12;  // collision unitaries come from exact sector eigendecompositions
  double tail_target = 1e-8;   // per-mode discarded thermal mass bound
  double pair_cutoff = 1e-8;   // discarded joint (m1,m2) mass inside the precomputed map
  int threads = 0;             // 0 => hardware concurrency (capped by QM_THREADS in the CLI)
};

inline double bath_tail_mass(double beta, double B, int n_fock) {
  return std::exp(-2.0 * beta * B * n_fock);  // geometric tail of the mode populations
}

inline int auto_n_fock(double beta, double B, double tail_target) {
  const double x = 2.0 * beta * B;
  int n = static_cast<int>(std::ceil(-std::log(tail_target) / x)) + 1;
  return std::clamp(n, 2, 400);
}

/// Truncated, renormalized thermal state of one bath mode at frequency 2B.
inline DenseMat bath_oscillator_state(double beta, double B, int n_fock) {
  if (n_fock < 1) throw std::invalid_argument("bath_oscillator_state: n_fock >= 1 required");
  RealVec w(n_fock);
  for (int n = 0; n < n_fock; ++n) w(n) = std::exp(-2.0 * beta * B * n);
  w /= w.sum();
  DenseMat rho = DenseMat::Zero(n_fock, n_fock);
  rho.diagonal() = w.cast<Complex>();
  return rho;
}

struct CollisionStepResult {
  DenseMat rho;
  double q1 = 0, q2 = 0, w = 0;  // per-collision heat into the system and hidden work
};

/// Exact finite-tau collision map, precomputed once per (params, space, tau):
/// rho_S -> Tr_B[U (rho_S x rho_B) U†] with one fresh thermal oscillator per
/// bath and U = exp(-i(H_S+H_B+H_I/sqrt(tau)) tau). The joint Hamiltonian
/// conserves total excitation number, so U is assembled from dense
/// eigendecompositions of the (much smaller) fixed-excitation sectors.
/// Heat and work are linear functionals of rho_S and are precomputed along
/// with the map.
class CollisionEngine {
 public:
  CollisionEngine(const Params& p, const SpaceSpec& space, const CollisionConfig& cfg)
      : params_(p), space_(space), cfg_(cfg) {
    p.validate();
    if (cfg.tau <= 0) throw std::invalid_argument("CollisionEngine: tau must be positive");
    nf1_ = cfg.n_fock1 > 0 ? cfg.n_fock1 : auto_n_fock(p.beta1, p.B1, cfg.tail_target);
    nf2_ = cfg.n_fock2 > 0 ? cfg.n_fock2 : auto_n_fock(p.beta2, p.B2, cfg.tail_target);
    if (bath_tail_mass(p.beta1, p.B1, nf1_) > 1e-8 || bath_tail_mass(p.beta2, p.B2, nf2_) > 1e-8)
      warning_ += "bath Fock truncation tail mass exceeds 1e-8; ";
    auto h = build_hamiltonians(p, space);
    h0_ = h.h0.mat;
    hi_ = h.hi.mat;
    hs_ = h.hs.mat;
    build_map();
    // exact load map over one collision interval, applied between collisions
    const Superoperator lr = rotor_load_dissipator(p, space);
    load_prop_ = DenseMat(DenseMat(lr.mat) * cfg_.tau).exp();
  }

  const std::string& warning() const { return warning_; }
  int n_fock1() const { return nf1_; }
  int n_fock2() const { return nf2_; }
  const CollisionConfig& config() const { return cfg_; }

  /// One qubit-bath collision (no load).
  CollisionStepResult collide(const DenseMat& rho) const {
    CollisionStepResult r;
    r.q1 = c1_ - (rho * f1_).trace().real();
    r.q2 = c2_ - (rho * f2_).trace().real();
    const double hs_mean = detail::real_trace_prod(hs_, rho);
    r.w = (rho * fw_).trace().real() - hs_mean - c1_ - c2_;
    r.rho = unvec(DenseVec(map_ * vec(rho)), space_.dim());
    return r;
  }

  /// Load sub-step of duration tau; returns the new state plus the heat and
  /// work absorbed through the load over the sub-step.
  DenseMat load_step(const DenseMat& rho, double* qr = nullptr, double* wr = nullptr) const {
    DenseMat out = unvec(DenseVec(load_prop_ * vec(rho)), space_.dim());
    if (qr) *qr = detail::real_trace_prod(h0_, DenseMat(out - rho));
    if (wr) *wr = detail::real_trace_prod(hi_, DenseMat(out - rho));
    return out;
  }

  const SparseMat& h0() const { return h0_; }
  const SparseMat& hs() const { return hs_; }

 private:
  Params params_;
  SpaceSpec space_;
  CollisionConfig cfg_;
  int nf1_ = 0, nf2_ = 0;
  std::string warning_;
  SparseMat h0_, hi_, hs_;
  DenseMat map_;           // dimS^2 x dimS^2
  DenseMat f1_, f2_, fw_;  // heat/work functionals
  double c1_ = 0, c2_ = 0;
  DenseMat load_prop_;

  struct Sector {
    std::vector<Index> members;  // joint indices
    RealMat vectors;
    RealVec eigenvalues;
  };

  void build_map() {
    const Index dims = space_.dim();
    const Index nb = Index(nf1_) * nf2_;
    const Index djoint = dims * nb;
    const int nr = space_.n_rotor();

    auto qubit_excitations = [&](Index k) {
      const int s1 = int(k / (2 * nr));
      const int s2 = int((k / nr) % 2);
      return (1 - s1) + (1 - s2);  // index 0 = excited
    };
    auto sector_of_joint = [&](Index j) {
      const Index k = j / nb;
      const Index b = j % nb;
      return qubit_excitations(k) + int(b / nf2_) + int(b % nf2_);
    };

    // joint Hamiltonian (real symmetric), triplet assembly
    const double s = 1.0 / std::sqrt(cfg_.tau);
    const double g1 = params_.g1(), g2 = params_.g2();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(djoint) * 10);
    for (int k = 0; k < hs_.outerSize(); ++k) {
      for (SparseMat::InnerIterator it(hs_, k); it; ++it) {
        for (Index b = 0; b < nb; ++b)
          trip.emplace_back(it.row() * nb + b, it.col() * nb + b, it.value().real());
      }
    }
    for (Index j = 0; j < djoint; ++j) {
      const Index b = j % nb;
      const double eb = 2.0 * params_.B1 * double(b / nf2_) + 2.0 * params_.B2 * double(b % nf2_);
      if (eb != 0.0) trip.emplace_back(j, j, eb);
    }
    // H_I/sqrt(tau): g_i (sigma_i^- a_i† + sigma_i^+ a_i)
    const SparseMat sm1 = embed_qubit_op(1, PauliKind::Minus, space_).mat;
    const SparseMat sm2 = embed_qubit_op(2, PauliKind::Minus, space_).mat;
    auto add_bath_coupling = [&](const SparseMat& sm, double gi, bool first_bath) {
      for (int k = 0; k < sm.outerSize(); ++k) {
        for (SparseMat::InnerIterator it(sm, k); it; ++it) {
          for (Index b = 0; b < nb; ++b) {
            const int b1 = int(b / nf2_), b2 = int(b % nf2_);
            // sigma^- a†
            const int bi = first_bath ? b1 : b2;
            const int bcap = first_bath ? nf1_ : nf2_;
            if (bi + 1 < bcap) {
              const Index bp = first_bath ? Index(b1 + 1) * nf2_ + b2 : Index(b1) * nf2_ + (b2 + 1);
              const double v = gi * s * std::sqrt(double(bi + 1)) * it.value().real();
              trip.emplace_back(it.row() * nb + bp, it.col() * nb + b, v);
              trip.emplace_back(it.col() * nb + b, it.row() * nb + bp, v);  // h.c.
            }
          }
        }
      }
    };
    add_bath_coupling(sm1, g1, true);
    add_bath_coupling(sm2, g2, false);
    Eigen::SparseMatrix<double> hj(djoint, djoint);
    hj.setFromTriplets(trip.begin(), trip.end());

    // sector decomposition
    const int max_sector = 2 + (nf1_ - 1) + (nf2_ - 1);
    std::vector<Sector> sectors(max_sector + 1);
    std::vector<int> sector_id(djoint), sector_pos(djoint);
    for (Index j = 0; j < djoint; ++j) {
      const int n = sector_of_joint(j);
      sector_id[j] = n;
      sector_pos[j] = int(sectors[n].members.size());
      sectors[n].members.push_back(j);
    }
    {
      std::vector<int> order(sectors.size());
      std::iota(order.begin(), order.end(), 0);
      unsigned nthreads = cfg_.threads > 0 ? unsigned(cfg_.threads)
                                           : std::max(1u, std::thread::hardware_concurrency());
      std::atomic<size_t> next{0};
      auto work = [&]() {
        for (;;) {
          const size_t i = next.fetch_add(1);
          if (i >= sectors.size()) return;
          Sector& sec = sectors[i];
          const Index d = Index(sec.members.size());
          if (d == 0) continue;
          RealMat block(d, d);
          block.setZero();
          for (Index c = 0; c < d; ++c) {
            const Index jc = sec.members[c];
            for (Eigen::SparseMatrix<double>::InnerIterator it(hj, jc); it; ++it) {
              if (sector_id[it.row()] == int(i)) block(sector_pos[it.row()], c) = it.value();
            }
          }
          Eigen::SelfAdjointEigenSolver<RealMat> es(block);
          sec.vectors = es.eigenvectors();
          sec.eigenvalues = es.eigenvalues();
        }
      };
      std::vector<std::thread> pool;
      for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(work);
      work();
      for (auto& th : pool) th.join();
    }

    // thermal pair list, mass-truncated and renormalized
    RealVec w1(nf1_), w2(nf2_);
    for (int n = 0; n < nf1_; ++n) w1(n) = std::exp(-2.0 * params_.beta1 * params_.B1 * n);
    for (int n = 0; n < nf2_; ++n) w2(n) = std::exp(-2.0 * params_.beta2 * params_.B2 * n);
    w1 /= w1.sum();
    w2 /= w2.sum();
    struct Pair {
      int m1, m2;
      double w;
    };
    std::vector<Pair> pairs;
    for (int m1 = 0; m1 < nf1_; ++m1)
      for (int m2 = 0; m2 < nf2_; ++m2) pairs.push_back({m1, m2, w1(m1) * w2(m2)});
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.w > b.w; });
    double cum = 0.0;
    size_t keep = 0;
    while (keep < pairs.size() && cum < 1.0 - cfg_.pair_cutoff) cum += pairs[keep++].w;
    pairs.resize(std::max<size_t>(keep, 1));
    double norm = 0.0;
    for (const auto& pr : pairs) norm += pr.w;
    for (auto& pr : pairs) pr.w /= norm;

    // accumulate the Gram matrix G[(k,s),(l,s')] = sum_m p_m sum_b conj(V)..V
    // and the heat/work functionals
    const Index d2 = dims * dims;
    const RealVec hb_b1 = [&] {
      RealVec v(nb);
      for (Index b = 0; b < nb; ++b) v(b) = 2.0 * params_.B1 * double(b / nf2_);
      return v;
    }();
    const RealVec hb_b2 = [&] {
      RealVec v(nb);
      for (Index b = 0; b < nb; ++b) v(b) = 2.0 * params_.B2 * double(b % nf2_);
      return v;
    }();

    unsigned nthreads = cfg_.threads > 0 ? unsigned(cfg_.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min<unsigned>(nthreads, 8);
    std::vector<DenseMat> g_acc(nthreads, DenseMat::Zero(d2, d2));
    std::vector<DenseMat> f1_acc(nthreads, DenseMat::Zero(dims, dims));
    std::vector<DenseMat> f2_acc(nthreads, DenseMat::Zero(dims, dims));
    std::vector<DenseMat> fw_acc(nthreads, DenseMat::Zero(dims, dims));
    std::atomic<size_t> next_pair{0};

    auto pair_work = [&](unsigned tid) {
      DenseMat p_mat, q_mat, padj;
      std::vector<int> brow(nb);
      std::vector<Index> bsup;
      for (;;) {
        const size_t ip = next_pair.fetch_add(1);
        if (ip >= pairs.size()) return;
        const auto& pr = pairs[ip];
        const Index b_in = Index(pr.m1) * nf2_ + pr.m2;
        // b-support: union over the (up to three) sectors reached from this m
        std::fill(brow.begin(), brow.end(), -1);
        bsup.clear();
        std::array<int, 3> secs{-1, -1, -1};
        for (Index k = 0; k < dims; ++k) {
          const int n = qubit_excitations(k) + pr.m1 + pr.m2;
          for (auto& sslot : secs) {
            if (sslot == n) break;
            if (sslot < 0) {
              sslot = n;
              for (Index j : sectors[n].members) {
                const Index b = j % nb;
                if (brow[b] < 0) {
                  brow[b] = int(bsup.size());
                  bsup.push_back(b);
                }
              }
              break;
            }
          }
        }
        const Index nbs = Index(bsup.size());
        p_mat.setZero(nbs, d2);
        // columns of U: u = V (e^{-i lam tau} ∘ V^T e_q)
        for (Index k = 0; k < dims; ++k) {
          const Index j_in = k * nb + b_in;
          const Sector& sec = sectors[sector_id[j_in]];
          const Index d = Index(sec.members.size());
          const Index q = sector_pos[j_in];
          DenseVec phase(d);
          for (Index x = 0; x < d; ++x)
            phase(x) = std::polar(1.0, -sec.eigenvalues(x) * cfg_.tau);
          DenseVec u = sec.vectors.cast<Complex>() *
                       DenseVec(phase.array() * sec.vectors.row(q).transpose().cast<Complex>().array());
          for (Index x = 0; x < d; ++x) {
            const Index jj = sec.members[x];
            const Index sidx = jj / nb, b = jj % nb;
            p_mat(brow[b], k * dims + sidx) = u(x);
          }
        }
        // Gram update: G += w * P^H P
        padj = p_mat.adjoint();
        g_acc[tid].selfadjointView<Eigen::Lower>().rankUpdate(padj, pr.w);
        // functionals F(l,k) = sum_{b,s} conj(P(b,l*dims+s)) h(b,s) P(b,k*dims+s)
        // as per-s strided slices P_s (columns k*dims+s, k = 0..dims-1)
        using StridedSlice = Eigen::Map<const DenseMat, 0, Eigen::OuterStride<>>;
        DenseVec wb1(nbs), wb2(nbs);
        for (Index pb = 0; pb < nbs; ++pb) {
          wb1(pb) = hb_b1(bsup[pb]);
          wb2(pb) = hb_b2(bsup[pb]);
        }
        // H_S + H_B applied on the columns of P
        q_mat.setZero(nbs, d2);
        for (Index k = 0; k < dims; ++k) {
          for (int c = 0; c < hs_.outerSize(); ++c) {
            for (SparseMat::InnerIterator it(hs_, c); it; ++it) {
              q_mat.col(k * dims + it.row()) += it.value() * p_mat.col(k * dims + it.col());
            }
          }
        }
        for (Index sidx = 0; sidx < dims; ++sidx) {
          StridedSlice ps(p_mat.data() + sidx * nbs, nbs, dims,
                          Eigen::OuterStride<>(dims * nbs));
          StridedSlice qs(q_mat.data() + sidx * nbs, nbs, dims,
                          Eigen::OuterStride<>(dims * nbs));
          f1_acc[tid].noalias() += pr.w * (ps.adjoint() * wb1.asDiagonal() * ps);
          f2_acc[tid].noalias() += pr.w * (ps.adjoint() * wb2.asDiagonal() * ps);
          fw_acc[tid].noalias() += pr.w * (ps.adjoint() * ((wb1 + wb2).asDiagonal() * ps + qs));
        }
      }
    };
    {
      std::vector<std::thread> pool;
      for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(pair_work, t);
      pair_work(0);
      for (auto& th : pool) th.join();
    }
    DenseMat g = std::move(g_acc[0]);
    f1_ = std::move(f1_acc[0]);
    f2_ = std::move(f2_acc[0]);
    fw_ = std::move(fw_acc[0]);
    for (unsigned t = 1; t < nthreads; ++t) {
      g += g_acc[t];
      f1_ += f1_acc[t];
      f2_ += f2_acc[t];
      fw_ += fw_acc[t];
    }
    g = DenseMat(g.selfadjointView<Eigen::Lower>());

    // permute G[(k,s),(l,s')] (row-major pairs k*dims+s) into the vec-indexed
    // map M[(s + dims s'), (k + dims l)] = conj(G)
    map_.resize(d2, d2);
    for (Index k = 0; k < dims; ++k)
      for (Index sidx = 0; sidx < dims; ++sidx)
        for (Index l = 0; l < dims; ++l)
          for (Index sp = 0; sp < dims; ++sp)
            map_(sidx + dims * sp, k + dims * l) = std::conj(g(k * dims + sidx, l * dims + sp));

    c1_ = 0.0;
    c2_ = 0.0;
    for (const auto& pr : pairs) {
      c1_ += pr.w * 2.0 * params_.B1 * pr.m1;
      c2_ += pr.w * 2.0 * params_.B2 * pr.m2;
    }
  }
};

/// Single collision + load sub-step with a freshly built map (test-sized
/// spaces only; trajectories should use run_collisions).
inline CollisionStepResult collision_step(const DenseMat& rho, const CollisionConfig& cfg,
                                          const Params& p, const SpaceSpec& space) {
  CollisionEngine engine(p, space, cfg);
  return engine.collide(rho);
}

struct CollisionRecord {
  double t = 0;
  DenseMat rho;
  double q1_rate = 0, q2_rate = 0, w_rate = 0;  // per-collision quantities / tau
  double qr_rate = 0, wr_rate = 0;              // load sub-step quantities / tau
};

/// Repeated-interaction trajectory: collision then load sub-step, each of
/// duration tau; timestamps t_k = k tau.
inline std::vector<CollisionRecord> run_collisions(const DenseMat& rho0, const CollisionConfig& cfg,
                                                   const Params& p, const SpaceSpec& space) {
  CollisionEngine engine(p, space, cfg);
  std::vector<CollisionRecord> traj;
  traj.reserve(cfg.steps + 1);
  traj.push_back({0.0, rho0, 0, 0, 0, 0, 0});
  DenseMat rho = rho0;
  for (int k = 1; k <= cfg.steps; ++k) {
    CollisionStepResult r = engine.collide(rho);
    double qr = 0, wr = 0;
    rho = engine.load_step(r.rho, &qr, &wr);
    traj.push_back({k * cfg.tau, rho, r.q1 / cfg.tau, r.q2 / cfg.tau, r.w / cfg.tau, qr / cfg.tau,
                    wr / cfg.tau});
  }
  return traj;
}

}  // namespace qmill
