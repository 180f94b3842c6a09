#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>
#include <vector>

#include "mcdta/core.hpp"

namespace mcdta {

// Sparse linear program
//   minimize    objective . v
//   subject to  eq_rows . v  = eq_rhs
//               le_rows . v <= le_rhs
//               v >= 0
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<std::vector<std::pair<int, double>>> eq_rows;
  std::vector<double> eq_rhs;
  std::vector<std::vector<std::pair<int, double>>> le_rows;
  std::vector<double> le_rhs;

  int add_var(double cost) {
    objective.push_back(cost);
    return num_vars++;
  }
  int add_eq(std::vector<std::pair<int, double>> row, double rhs) {
    eq_rows.push_back(std::move(row));
    eq_rhs.push_back(rhs);
    return static_cast<int>(eq_rows.size()) - 1;
  }
  int add_le(std::vector<std::pair<int, double>> row, double rhs) {
    le_rows.push_back(std::move(row));
    le_rhs.push_back(rhs);
    return static_cast<int>(le_rows.size()) - 1;
  }
  int num_eq() const { return static_cast<int>(eq_rows.size()); }
  int num_le() const { return static_cast<int>(le_rows.size()); }
};

enum class SolveOutcome { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(SolveOutcome o) {
  switch (o) {
    case SolveOutcome::Optimal: return "optimal";
    case SolveOutcome::Infeasible: return "infeasible";
    case SolveOutcome::Unbounded: return "unbounded";
    case SolveOutcome::IterationLimit: return "iteration_limit";
  }
  return "?";
}

struct SolverOptions {
  double tol = 1e-8;
  int max_iters = 200;
  bool verbose = false;
  // Re-derive the multipliers from the optimal-face geometry once the
  // iterates converge. Costs one auxiliary solve and rewards it with duals
  // that vanish on constraints whose slack is tiny but genuinely nonzero.
  bool refine_duals = true;
};

// Duals follow the Lagrangian L = c.v + eq_dual.(Aeq v - beq)
// + le_dual.(Ain v - bin) - reduced_cost.v, so at an optimum
//   c + Aeq' eq_dual + Ain' le_dual - reduced_cost = 0,
// le_dual >= 0, reduced_cost >= 0, and
// objective = -(eq_rhs . eq_dual + le_rhs . le_dual).
// For an infeasible program eq_dual/le_dual hold a certificate with
// eq_rhs . eq_dual + le_rhs . le_dual < 0; for an unbounded one v holds a
// ray with objective . v < 0.
struct Solution {
  SolveOutcome outcome = SolveOutcome::IterationLimit;
  std::vector<double> v;
  double objective = 0.0;
  std::vector<double> eq_dual;
  std::vector<double> le_dual;
  std::vector<double> reduced_cost;
  int iterations = 0;
  double rel_primal_res = kInf;
  double rel_dual_res = kInf;
  double rel_gap = kInf;
};

namespace detail {

inline double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

// Largest step in [0, cap] keeping v + a*dv >= 0.
inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv,
                       double cap) {
  double a = cap;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
  return a;
}

}  // namespace detail

// Interior-point solver on the homogeneous self-dual embedding
//   A x - b tau = 0,  A' y + z - c tau = 0,  -c'x + b'y - kappa = 0,
//   x, z >= 0, tau, kappa >= 0,
// where A stacks the equality rows and the slack-extended inequality rows.
// A strictly complementary solution with tau > 0 yields an optimum; with
// kappa > 0 it yields an infeasibility or unboundedness certificate.
// Directions come from Mehrotra predictor-corrector steps. Each step is
// solved from the quasidefinite system
//   [ -(Z/X + dp) A' ] [dx]   [ r_dual   ]
//   [  A          dd ] [dy] = [ r_primal ],
// refactorized per iteration with static diagonal shifts dp, dd that are
// then removed by refinement against the unshifted matrix. The shifted
// form keeps the factorization stable when Z/X spans many orders of
// magnitude, which defeats the normal-equation form A D A'.
inline Solution solve(const LinearProgram& lp, const SolverOptions& opts = {}) {
  using SpMat = Eigen::SparseMatrix<double>;
  using Trip = Eigen::Triplet<double>;

  const int n0 = lp.num_vars;
  const int me = lp.num_eq();
  const int mi = lp.num_le();
  const int m = me + mi;
  const int n = n0 + mi;  // slack per inequality row

  std::vector<Trip> trips;
  for (int r = 0; r < me; ++r)
    for (const auto& [c, v] : lp.eq_rows[r])
      if (v != 0.0) trips.emplace_back(r, c, v);
  for (int r = 0; r < mi; ++r) {
    for (const auto& [c, v] : lp.le_rows[r])
      if (v != 0.0) trips.emplace_back(me + r, c, v);
    trips.emplace_back(me + r, n0 + r, 1.0);
  }
  SpMat A(m, n);
  A.setFromTriplets(trips.begin(), trips.end());
  SpMat At = A.transpose();

  Eigen::VectorXd b(m), c(n);
  for (int r = 0; r < me; ++r) b[r] = lp.eq_rhs[r];
  for (int r = 0; r < mi; ++r) b[me + r] = lp.le_rhs[r];
  c.setZero();
  for (int j = 0; j < n0; ++j) c[j] = lp.objective[j];

  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  double tau = 1.0, kappa = 1.0;

  const double bnorm = 1.0 + detail::inf_norm(b);
  const double cnorm = 1.0 + detail::inf_norm(c);

  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool analyzed = false;

  Solution sol;
  sol.v.assign(n0, 0.0);
  sol.eq_dual.assign(me, 0.0);
  sol.le_dual.assign(mi, 0.0);
  sol.reduced_cost.assign(n0, 0.0);

  auto export_ray = [&](SolveOutcome kind) {
    sol.outcome = kind;
    if (kind == SolveOutcome::Unbounded) {
      double s = std::max(1e-300, x.lpNorm<Eigen::Infinity>());
      for (int j = 0; j < n0; ++j) sol.v[j] = x[j] / s;
      sol.objective = -kInf;
    } else {
      double s = std::max(1e-300, y.lpNorm<Eigen::Infinity>());
      for (int r = 0; r < me; ++r) sol.eq_dual[r] = -y[r] / s;
      for (int r = 0; r < mi; ++r) sol.le_dual[r] = -y[me + r] / s;
    }
  };

  auto finish_optimal = [&]() {
    sol.outcome = SolveOutcome::Optimal;
    for (int j = 0; j < n0; ++j) {
      sol.v[j] = x[j] / tau;
      sol.reduced_cost[j] = z[j] / tau;
    }
    for (int r = 0; r < me; ++r) sol.eq_dual[r] = -y[r] / tau;
    for (int r = 0; r < mi; ++r) sol.le_dual[r] = -y[me + r] / tau;
    sol.objective = c.head(n0).dot(x.head(n0)) / tau;
  };

  const double mu0 = (x.dot(z) + tau * kappa) / (n + 1);
  double stall_count = 0;

  struct Snapshot {
    Eigen::VectorXd x, y, z;
    double tau = 1.0, kappa = 1.0, mu = kInf;
    bool taken = false;
  } best;
  int polish_left = -1;
  int polish_stuck = 0;

  auto refresh_residuals = [&]() {
    Eigen::VectorXd rp = A * x - b * tau;
    Eigen::VectorXd rd = At * y + z - c * tau;
    double pobj = c.dot(x) / tau;
    double dobj = b.dot(y) / tau;
    sol.rel_primal_res = detail::inf_norm(rp) / tau / bnorm;
    sol.rel_dual_res = detail::inf_norm(rd) / tau / cnorm;
    sol.rel_gap =
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  };

  // Path-following leaves a reduced cost of about mu over x on every column
  // whose value is tiny but genuinely nonzero, and mu cannot shrink below
  // the accuracy of the step equations. Those columns cluster on rows all of
  // whose columns have nearly vanished, and such rows price nothing: their
  // multipliers are pinned only through stationarity of the vanished
  // columns. Re-pick them with a small auxiliary program over just those
  // rows that keeps every reduced cost nonnegative, presses the products
  // against the surviving column values toward zero, and parks every
  // multiplier the constraints leave free at zero, which is where an exact
  // optimum puts them. The replacement is kept only when it certifies:
  // signs, products and the dual objective must stay within tolerance.
  auto repair_duals = [&]() {
    const double theta = 2e-6 * (1.0 + x.maxCoeff() / tau) * tau;
    std::vector<char> live_row(m, 0);
    for (int j = 0; j < n; ++j) {
      if (x[j] > theta) {
        for (SpMat::InnerIterator a(A, j); a; ++a) live_row[a.row()] = 1;
      }
    }

    std::vector<int> rid(m, -1);
    std::vector<int> rows;
    for (int r = 0; r < m; ++r) {
      if (!live_row[r]) {
        rid[r] = static_cast<int>(rows.size());
        rows.push_back(r);
      }
    }
    if (rows.empty()) return;
    const int d = static_cast<int>(rows.size());

    // Multipliers split into positive and negative parts. For each column
    // incident to a repaired row, stationarity against the fixed live
    // multipliers bounds the repaired contribution from above, and the
    // weighted terms charge the objective for leaving a reduced cost
    // positive where the column value is not yet negligible.
    LinearProgram blk;
    blk.num_vars = 2 * d;
    blk.objective.assign(2 * d, 1.0);
    for (int j = 0; j < n; ++j) {
      bool touches = false;
      for (SpMat::InnerIterator a(A, j); a; ++a) {
        if (rid[a.row()] >= 0) {
          touches = true;
          break;
        }
      }
      if (!touches) continue;
      const double w = std::min(x[j] / tau * 1e9, 100.0);
      double rhs = c[j];
      std::vector<std::pair<int, double>> row;
      for (SpMat::InnerIterator a(A, j); a; ++a) {
        const int r = static_cast<int>(a.row());
        if (rid[r] >= 0) {
          row.push_back({rid[r], a.value()});
          row.push_back({rid[r] + d, -a.value()});
          blk.objective[rid[r]] -= w * a.value();
          blk.objective[rid[r] + d] += w * a.value();
        } else {
          rhs -= a.value() * y[r] / tau;
        }
      }
      blk.le_rows.push_back(std::move(row));
      blk.le_rhs.push_back(rhs);
    }

    SolverOptions bopts;
    bopts.tol = 1e-8;
    bopts.max_iters = opts.max_iters;
    bopts.refine_duals = false;
    Solution bsol = solve(blk, bopts);
    if (bsol.outcome != SolveOutcome::Optimal) {
      if (opts.verbose)
        std::fprintf(stderr, "repair: aux %s iters=%d rp=%.2e rd=%.2e\n",
                     to_string(bsol.outcome), bsol.iterations,
                     bsol.rel_primal_res, bsol.rel_dual_res);
      return;
    }

    // Multipliers the auxiliary program wants at zero come back as interior
    // noise, and the degenerate ones hover near the square root of its gap,
    // indistinguishable by size from genuinely small ones. Round all small
    // multipliers to zero, then put back exactly those whose absence shows
    // up as a negative reduced cost, and certify the result.
    Eigen::VectorXd yfix(d);
    for (int i = 0; i < d; ++i) yfix[i] = bsol.v[i] - bsol.v[i + d];

    std::vector<char> snapped(d, 0);
    for (int i = 0; i < d; ++i)
      if (std::abs(yfix[i]) <= 1e-5) snapped[i] = 1;

    Eigen::VectorXd y2 = y;
    Eigen::VectorXd z2;
    for (int pass = 0; pass < 8; ++pass) {
      for (int i = 0; i < d; ++i)
        y2[rows[i]] = snapped[i] ? 0.0 : yfix[i] * tau;
      z2 = c * tau - At * y2;
      bool changed = false;
      for (int j = 0; j < n; ++j) {
        if (z2[j] >= -5e-9 * tau) continue;
        for (SpMat::InnerIterator a(A, j); a; ++a) {
          const int i = rid[a.row()];
          if (i >= 0 && snapped[i] && yfix[i] != 0.0) {
            snapped[i] = 0;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }

    double dgap = 0.0;
    for (int i = 0; i < d; ++i) dgap += b[rows[i]] * (y2[rows[i]] - y[rows[i]]);
    const double neg = -std::min(z2.minCoeff(), 0.0) / tau;
    const double comp = x.cwiseProduct(z2).cwiseAbs().maxCoeff() / (tau * tau);
    const double pobj = std::abs(c.dot(x)) / tau;
    if (opts.verbose)
      std::fprintf(stderr,
                   "repair: rows=%d/%d cols=%d neg=%.3e comp=%.3e dgap=%.3e\n",
                   d, m, static_cast<int>(blk.le_rows.size()), neg, comp,
                   std::abs(dgap) / tau);
    if (!(neg <= 1e-8) || !(comp <= 8e-7) ||
        !(std::abs(dgap) / tau <= 1e-8 * (1.0 + pobj)))
      return;

    y = y2;
    z = z2.cwiseMax(0.0);
    refresh_residuals();
  };

  auto finish_from_best = [&]() {
    if (best.taken) {
      x = best.x;
      y = best.y;
      z = best.z;
      tau = best.tau;
      kappa = best.kappa;
      refresh_residuals();
      if (opts.refine_duals) repair_duals();
    }
    finish_optimal();
  };

  for (int it = 0; it <= opts.max_iters; ++it) {
    sol.iterations = it;

    Eigen::VectorXd rp = A * x - b * tau;
    Eigen::VectorXd rd = At * y + z - c * tau;
    double rg = -c.dot(x) + b.dot(y) - kappa;
    double mu = (x.dot(z) + tau * kappa) / (n + 1);

    double pobj = c.dot(x) / tau;
    double dobj = b.dot(y) / tau;
    sol.rel_primal_res = detail::inf_norm(rp) / tau / bnorm;
    sol.rel_dual_res = detail::inf_norm(rd) / tau / cnorm;
    sol.rel_gap =
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (opts.verbose)
      std::fprintf(stderr,
                   "it %3d  mu %9.2e  rp %9.2e  rd %9.2e  gap %9.2e  tau "
                   "%9.2e  kappa %9.2e\n",
                   it, mu, sol.rel_primal_res, sol.rel_dual_res, sol.rel_gap,
                   tau, kappa);

    if (sol.rel_primal_res <= opts.tol && sol.rel_dual_res <= opts.tol &&
        sol.rel_gap <= opts.tol) {
      // Converged. Keep walking the central path while the gap still
      // shrinks, so the positive and vanishing sides of each complementary
      // pair separate before the duals are rebuilt from that partition.
      polish_stuck = best.taken && mu > 0.8 * best.mu ? polish_stuck + 1 : 0;
      if (!best.taken || mu < best.mu) best = {x, y, z, tau, kappa, mu, true};
      if (polish_left < 0) polish_left = 40;
      if (mu <= 1e-18 * mu0 || polish_left == 0 || polish_stuck >= 8) {
        finish_from_best();
        return sol;
      }
      --polish_left;
    }
    if (tau <= 1e-10 * std::max(1.0, kappa) && mu <= 1e-8 * mu0) {
      double by = b.dot(y), cx = c.dot(x);
      if (by > 0 && by >= -cx) {
        export_ray(SolveOutcome::Infeasible);
        return sol;
      }
      if (cx < 0) {
        export_ray(SolveOutcome::Unbounded);
        return sol;
      }
    }
    if (it == opts.max_iters || stall_count >= 3) break;

    Eigen::VectorXd phi(n);
    for (int j = 0; j < n; ++j) {
      double r = z[j] / x[j];
      phi[j] = std::isfinite(r) ? std::clamp(r, 1e-28, 1e28) : 1e28;
    }

    // An exactly-zero pivot aborts the factorization; larger shifts make
    // one ever less likely and refinement removes them from the answer.
    auto factorize = [&](double dp) {
      std::vector<Trip> ktrips;
      ktrips.reserve(n + m + 2 * A.nonZeros());
      for (int j = 0; j < n; ++j) ktrips.emplace_back(j, j, -phi[j] - dp);
      for (int r = 0; r < m; ++r) ktrips.emplace_back(n + r, n + r, dp);
      for (int col = 0; col < A.outerSize(); ++col) {
        for (SpMat::InnerIterator a(A, col); a; ++a) {
          ktrips.emplace_back(n + a.row(), a.col(), a.value());
          ktrips.emplace_back(a.col(), n + a.row(), a.value());
        }
      }
      SpMat K(n + m, n + m);
      K.setFromTriplets(ktrips.begin(), ktrips.end());
      if (!analyzed) {
        ldlt.analyzePattern(K);
        analyzed = true;
      }
      ldlt.factorize(K);
      return ldlt.info() == Eigen::Success;
    };

    // Refinement against the shift-free matrix removes dp and dd from the
    // answer and recovers the accuracy lost to the static factorization.
    // Passes that stop shrinking the residual are discarded, which keeps
    // rank-deficient rows from feeding a divergent correction loop.
    auto solve_K = [&](const Eigen::VectorXd& rx, const Eigen::VectorXd& ry,
                       Eigen::VectorXd& sx, Eigen::VectorXd& sy) {
      auto residual = [&](const Eigen::VectorXd& s) {
        Eigen::VectorXd res(n + m);
        res.head(n) = rx + phi.cwiseProduct(s.head(n)) - At * s.tail(m);
        res.tail(m) = ry - A * s.head(n);
        return res;
      };
      Eigen::VectorXd rhs(n + m);
      rhs.head(n) = rx;
      rhs.tail(m) = ry;
      Eigen::VectorXd s = ldlt.solve(rhs);
      Eigen::VectorXd best = s;
      double best_norm = detail::inf_norm(residual(s));
      for (int pass = 0; pass < 8; ++pass) {
        s += ldlt.solve(residual(s));
        double norm = detail::inf_norm(residual(s));
        if (!(norm < best_norm)) break;
        best = s;
        best_norm = norm;
      }
      sx = best.head(n);
      sy = best.tail(m);
    };

    // denom equals kappa/tau plus a positive quadratic form, so a negative
    // value can only come from a solve gone bad. Stronger shifts trade
    // accuracy for stability until the sign comes back.
    Eigen::VectorXd wx(n), wy(m);
    double denom = 0.0;
    bool usable = false;
    for (double dp = 1e-9; dp <= 1e-1 && !usable; dp *= 100) {
      if (!factorize(dp)) continue;
      solve_K(c, b, wx, wy);
      denom = kappa / tau + b.dot(wy) - c.dot(wx);
      usable = std::isfinite(denom) && denom > 0;
    }
    if (!usable) {
      if (opts.verbose) std::fprintf(stderr, "break: denom=%.3e\n", denom);
      break;
    }

    double dtau = 0, dkappa = 0;
    Eigen::VectorXd dx(n), dy(m), dz(n);
    auto newton = [&](const Eigen::VectorXd& R1, const Eigen::VectorXd& R2,
                      double R3, const Eigen::VectorXd& R4, double R5) {
      Eigen::VectorXd ux(n), uy(m);
      solve_K(R2 - R4.cwiseQuotient(x), R1, ux, uy);
      dtau = (R3 + c.dot(ux) - b.dot(uy) + R5 / tau) / denom;
      dy = uy + wy * dtau;
      dx = ux + wx * dtau;
      dz = (R4 - z.cwiseProduct(dx)).cwiseQuotient(x);
      dkappa = (R5 - kappa * dtau) / tau;
    };

    // Predictor: pure Newton step toward feasibility and zero gap.
    Eigen::VectorXd xz = x.cwiseProduct(z);
    newton(-rp, -rd, -rg, -xz, -tau * kappa);

    double a_aff = detail::max_step(x, dx, 1.0);
    a_aff = detail::max_step(z, dz, a_aff);
    if (dtau < 0) a_aff = std::min(a_aff, -tau / dtau);
    if (dkappa < 0) a_aff = std::min(a_aff, -kappa / dkappa);

    double mu_aff = ((x + a_aff * dx).dot(z + a_aff * dz) +
                     (tau + a_aff * dtau) * (kappa + a_aff * dkappa)) /
                    (n + 1);
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
    // Blocked steps push sigma toward one and stall the gap. Once the
    // tolerances are met the iterate must keep sliding down the central
    // path, so cap the recentering weight during that phase.
    if (polish_left >= 0) sigma = std::min(sigma, 0.05);

    // Corrector: recenter and cancel the second-order term.
    Eigen::VectorXd R4 =
        Eigen::VectorXd::Constant(n, sigma * mu) - xz - dx.cwiseProduct(dz);
    double R5 = sigma * mu - tau * kappa - dtau * dkappa;
    newton(-rp, -rd, -rg, R4, R5);

    double a = detail::max_step(x, dx, kInf);
    a = detail::max_step(z, dz, a);
    if (dtau < 0) a = std::min(a, -tau / dtau);
    if (dkappa < 0) a = std::min(a, -kappa / dkappa);
    a = std::min(1.0, 0.9995 * a);
    stall_count = a < 1e-8 ? stall_count + 1 : 0;

    x += a * dx;
    y += a * dy;
    z += a * dz;
    tau += a * dtau;
    kappa += a * dkappa;
  }

  // A breakdown during polish still ends at the converged snapshot.
  if (best.taken) {
    finish_from_best();
    return sol;
  }

  // Leave the best scaled iterate for diagnosis.
  if (tau > 0) {
    for (int j = 0; j < n0; ++j) {
      sol.v[j] = x[j] / tau;
      sol.reduced_cost[j] = z[j] / tau;
    }
    for (int r = 0; r < me; ++r) sol.eq_dual[r] = -y[r] / tau;
    for (int r = 0; r < mi; ++r) sol.le_dual[r] = -y[me + r] / tau;
    sol.objective = c.head(n0).dot(x.head(n0)) / tau;
  }
  sol.outcome = SolveOutcome::IterationLimit;
  return sol;
}

}  // namespace mcdta
