#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "qmill/dynamics.hpp"
#include "qmill/gme.hpp"
#include "qmill/thermo.hpp"

namespace qmill {

/// beta1 <-> beta2 exchanged, couplings and everything else untouched.
inline Params swap_temperatures(const Params& p) {
  Params q = p;
  std::swap(q.beta1, q.beta2);
  return q;
}

inline double gamma_alpha(double r, double j, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("gamma_alpha: need 0 <= alpha <= 1");
  return alpha * r + (1.0 - alpha) * j;
}

struct RectPoint {
  double chi = 0;
  double q_fwd = 0, q_swap = 0;  // Qdot_2 at p, Qdot_1 at swapped temperatures
  double r = 0;                  // |q_fwd - q_swap| / |q_fwd + q_swap|
  double j = 0;                  // max(|q_fwd|, |q_swap|) / (lambda g^2)
  bool r_overflow = false;       // denominator below the divide guard
  bool sign_disagreement = false;  // forward and swapped flows have opposite signs
  std::vector<double> gammas;    // Gamma_alpha per requested alpha
  bool failed = false;
  std::string error;
};

struct AngularRectPoint {
  double chi = 0;
  double lz_fwd = 0, lz_swap = 0;  // steady-state <L_z>
  double r_angular = 0;
  double j_angular = 0;            // max(|lz_fwd|, |lz_swap|), not normalized
  bool r_infinite = false;
  bool sign_disagreement = false;
  std::vector<double> gammas;
  bool failed = false;
  std::string error;
};

namespace detail {

inline double divide_guard(double fwd, double swp) {
  return 1e-12 * std::max({std::abs(fwd), std::abs(swp), 1.0});
}

struct GmeSteady {
  double q1, q2, lz;
};

inline GmeSteady gme_steady_observables(const GmeTermCache& cache, const Params& p,
                                        const SparseMat& lz) {
  Liouvillian l = cache.assemble(p);
  SteadyOptions opts;
  opts.tol = p.steady_tol;
  opts.check_uniqueness = false;  // sweeps re-solve hundreds of points; probed in tests
  SteadyResult ss = steady_state(l.total, l.space, opts);
  auto f = heat_flows_global(ss.rho, l);
  return {f.q1, f.q2, detail::real_trace_prod(lz, ss.rho)};
}

}  // namespace detail

/// Both rectification figures computed from the same pair of steady solves.
struct RectPair {
  RectPoint heat;
  AngularRectPoint angular;
};

inline RectPair rect_point(const GmeTermCache& cache, const Params& p,
                           const std::vector<double>& alphas) {
  const SparseMat lz = angular_momentum(cache.space).mat;
  RectPair out;
  out.heat.chi = out.angular.chi = p.chi;
  auto fwd = detail::gme_steady_observables(cache, p, lz);
  auto swp = detail::gme_steady_observables(cache, swap_temperatures(p), lz);

  const double qf = fwd.q2, qs = swp.q1;
  out.heat.q_fwd = qf;
  out.heat.q_swap = qs;
  const double den = std::abs(qf + qs);
  out.heat.sign_disagreement = qf * qs < 0.0;
  if (den < detail::divide_guard(qf, qs)) {
    out.heat.r_overflow = true;
    out.heat.r = std::numeric_limits<double>::infinity();
  } else {
    out.heat.r = std::abs(qf - qs) / den;
  }
  out.heat.j = std::max(std::abs(qf), std::abs(qs)) / (p.lambda * p.g * p.g);
  for (double a : alphas)
    out.heat.gammas.push_back(out.heat.r_overflow ? std::numeric_limits<double>::infinity()
                                                  : gamma_alpha(out.heat.r, out.heat.j, a));

  out.angular.lz_fwd = fwd.lz;
  out.angular.lz_swap = swp.lz;
  const double dena = std::abs(fwd.lz + swp.lz);
  out.angular.sign_disagreement = fwd.lz * swp.lz < 0.0;
  // both observables at the steady-solver noise floor: 0/0, indeterminate
  const bool indeterminate = std::max(std::abs(fwd.lz), std::abs(swp.lz)) < 1e-8;
  if (indeterminate || dena < detail::divide_guard(fwd.lz, swp.lz)) {
    out.angular.r_infinite = true;
    out.angular.r_angular = std::numeric_limits<double>::infinity();
  } else {
    out.angular.r_angular = std::abs(fwd.lz - swp.lz) / dena;
  }
  out.angular.j_angular = std::max(std::abs(fwd.lz), std::abs(swp.lz));
  for (double a : alphas)
    out.angular.gammas.push_back(out.angular.r_infinite
                                     ? std::numeric_limits<double>::infinity()
                                     : gamma_alpha(out.angular.r_angular, out.angular.j_angular, a));
  return out;
}

inline RectPair heat_rect_point(const Params& p, const std::vector<double>& alphas = {}) {
  return rect_point(build_gme_cache(p, p.space()), p, alphas);
}

struct ChiSweepResult {
  std::vector<RectPair> points;                  // grid order
  std::vector<double> alphas;
  std::vector<size_t> argmax_heat;               // per alpha, index into points
  std::vector<size_t> argmax_angular;
};

/// chi-sweep with per-alpha argmax extraction (deterministic smallest-chi
/// tie-break); points are solved in parallel and gathered in grid order.
/// Failed points are marked and skipped by the argmax.
inline ChiSweepResult sweep_chi(const Params& base, const std::vector<double>& grid,
                                const std::vector<double>& alphas, int threads = 0) {
  GmeTermCache cache = build_gme_cache(base, base.space());
  ChiSweepResult res;
  res.alphas = alphas;
  res.points.resize(grid.size());

  unsigned nthreads = threads > 0 ? unsigned(threads)
                                  : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned>(nthreads, unsigned(std::max<size_t>(grid.size(), 1)));
  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      Params p = base;
      p.chi = grid[i];
      try {
        res.points[i] = rect_point(cache, p, alphas);
      } catch (const std::exception& e) {
        res.points[i].heat.chi = res.points[i].angular.chi = grid[i];
        res.points[i].heat.failed = res.points[i].angular.failed = true;
        res.points[i].heat.error = res.points[i].angular.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  auto argmax = [&](auto&& gamma_of) {
    std::vector<size_t> out;
    for (size_t a = 0; a < alphas.size(); ++a) {
      size_t best = grid.size();
      double best_v = -std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < grid.size(); ++i) {
        auto v = gamma_of(res.points[i], a);
        if (!v) continue;
        if (*v > best_v) {  // strict: ties resolve to the smallest chi
          best_v = *v;
          best = i;
        }
      }
      out.push_back(best);
    }
    return out;
  };
  res.argmax_heat = argmax([](const RectPair& pt, size_t a) -> std::optional<double> {
    if (pt.heat.failed || !std::isfinite(pt.heat.gammas[a])) return std::nullopt;
    return pt.heat.gammas[a];
  });
  res.argmax_angular = argmax([](const RectPair& pt, size_t a) -> std::optional<double> {
    if (pt.angular.failed || !std::isfinite(pt.angular.gammas[a])) return std::nullopt;
    return pt.angular.gammas[a];
  });
  return res;
}

inline std::vector<double> default_chi_grid(int points = 101, double hi = 0.99) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = hi * double(i) / double(points - 1);
  return g;
}

}  // namespace qmill
