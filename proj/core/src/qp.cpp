#include "weavesim/qp.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace weavesim {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using SpMatRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

// Uniform inequality description: rows of G x <= h. Box bounds are folded in
// as single-entry rows so the barrier treats everything alike.
struct BarrierProblem {
  SpMat Hq;  // n x n, PSD (zero in phase 1)
  Eigen::VectorXd fq;
  SpMatRM G;
  Eigen::VectorXd h;
  SpMat Aeq;
  Eigen::VectorXd beq;
  int n = 0;

  int m() const { return static_cast<int>(h.size()); }
  int meq() const { return static_cast<int>(beq.size()); }

  double objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(Hq * x) + fq.dot(x);
  }

  Eigen::VectorXd slacks(const Eigen::VectorXd& x) const { return h - G * x; }
};

// Newton machinery for one barrier problem. The KKT matrix
//   [ t Hq + G' D G + delta I ,  Aeq' ]
//   [ Aeq                      , -eps I ]
// is quasi-definite thanks to the primal/dual regularization, so the
// unpivoted sparse LDLT factorization is well defined; the regularization
// error is removed afterwards by one refinement pass against the
// unregularized operator. The sparsity pattern is fixed up front and only
// the value array is rewritten per Newton step.
class NewtonKkt {
 public:
  NewtonKkt(const BarrierProblem& p, double delta, double eps)
      : p_(p), delta_(delta), eps_(eps) {
    const int n = p.n;
    const int dim = n + p.meq();
    std::vector<Triplet> pattern;

    // Constant part: equality blocks and the two regularization diagonals.
    std::vector<Triplet> const_trip;
    for (int k = 0; k < p.Aeq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(p.Aeq, k); it; ++it) {
        const int r = static_cast<int>(it.row());
        const int c = static_cast<int>(it.col());
        const_trip.emplace_back(n + r, c, it.value());
        const_trip.emplace_back(c, n + r, it.value());
      }
    }
    for (int i = 0; i < n; ++i) const_trip.emplace_back(i, i, delta_);
    for (int i = 0; i < p.meq(); ++i) const_trip.emplace_back(n + i, n + i, -eps_);

    pattern = const_trip;
    for (int k = 0; k < p.Hq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(p.Hq, k); it; ++it) {
        pattern.emplace_back(static_cast<int>(it.row()),
                             static_cast<int>(it.col()), 0.0);
      }
    }
    for (int r = 0; r < p.G.outerSize(); ++r) {
      for (SpMatRM::InnerIterator it1(p.G, r); it1; ++it1) {
        for (SpMatRM::InnerIterator it2(p.G, r); it2; ++it2) {
          pattern.emplace_back(static_cast<int>(it1.col()),
                               static_cast<int>(it2.col()), 0.0);
        }
      }
    }
    K_.resize(dim, dim);
    K_.setFromTriplets(pattern.begin(), pattern.end());
    K_.makeCompressed();

    auto slot_of = [this](int r, int c) {
      const int* inner = K_.innerIndexPtr();
      const int* outer = K_.outerIndexPtr();
      const int* lo = inner + outer[c];
      const int* hi = inner + outer[c + 1];
      const int* it = std::lower_bound(lo, hi, r);
      return static_cast<int>(it - inner);
    };

    const_vals_.assign(K_.nonZeros(), 0.0);
    for (const auto& t : const_trip) {
      const_vals_[slot_of(t.row(), t.col())] += t.value();
    }
    for (int k = 0; k < p.Hq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(p.Hq, k); it; ++it) {
        h_slots_.emplace_back(
            slot_of(static_cast<int>(it.row()), static_cast<int>(it.col())),
            it.value());
      }
    }
    row_slots_.resize(p.m());
    for (int r = 0; r < p.G.outerSize(); ++r) {
      for (SpMatRM::InnerIterator it1(p.G, r); it1; ++it1) {
        for (SpMatRM::InnerIterator it2(p.G, r); it2; ++it2) {
          row_slots_[r].emplace_back(
              slot_of(static_cast<int>(it1.col()), static_cast<int>(it2.col())),
              it1.value() * it2.value());
        }
      }
    }
    ldlt_.analyzePattern(K_);
  }

  // d = 1/s^2 per inequality row.
  bool factorize(double t, const Eigen::VectorXd& d) {
    double* vals = K_.valuePtr();
    std::memcpy(vals, const_vals_.data(), sizeof(double) * const_vals_.size());
    for (const auto& [slot, v] : h_slots_) vals[slot] += t * v;
    for (int r = 0; r < static_cast<int>(row_slots_.size()); ++r) {
      const double dr = d(r);
      for (const auto& [slot, c] : row_slots_[r]) vals[slot] += dr * c;
    }
    ldlt_.factorize(K_);
    return ldlt_.info() == Eigen::Success;
  }

  // Solve K_true y = rhs with one refinement pass. K_true differs from the
  // factorized matrix only by the +-regularization diagonals.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const int n = p_.n;
    Eigen::VectorXd y = ldlt_.solve(rhs);
    Eigen::VectorXd r = rhs - K_ * y;
    r.head(n) += delta_ * y.head(n);
    r.tail(p_.meq()) -= eps_ * y.tail(p_.meq());
    y += ldlt_.solve(r);
    return y;
  }

 private:
  const BarrierProblem& p_;
  double delta_, eps_;
  SpMat K_;
  std::vector<double> const_vals_;
  std::vector<std::pair<int, double>> h_slots_;
  std::vector<std::vector<std::pair<int, double>>> row_slots_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

struct CenterOutcome {
  bool stalled = false;
};

// Residual of the centering problem at barrier parameter t. Returns the
// scale used for relative convergence checks.
double center_residual(const BarrierProblem& p, double t,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                       const Eigen::VectorXd& s, Eigen::VectorXd& r_dual,
                       Eigen::VectorXd& r_pri) {
  Eigen::VectorXd grad_obj = t * (p.Hq * x + p.fq);
  Eigen::VectorXd grad_phi = p.G.transpose() * s.cwiseInverse();
  r_dual = grad_obj + grad_phi;
  if (p.meq() > 0) r_dual += p.Aeq.transpose() * nu;
  r_pri = p.Aeq * x - p.beq;
  return 1.0 + grad_obj.norm() + grad_phi.norm();
}

// Infeasible-start Newton centering. Consumes the shared Newton budget.
// rel_tol controls how precisely the stage is centered: intermediate stages
// only need to stay near the central path, the final stage is polished.
template <typename EarlyStop>
CenterOutcome center(const BarrierProblem& p, NewtonKkt& kkt, double t,
                     Eigen::VectorXd& x, Eigen::VectorXd& nu, int& budget,
                     int per_stage_cap, double rel_tol, EarlyStop early_stop) {
  CenterOutcome out;
  Eigen::VectorXd r_dual, r_pri, rd_new, rp_new;
  for (int it = 0; it < per_stage_cap && budget > 0; ++it) {
    Eigen::VectorXd s = p.slacks(x);
    const double scale = center_residual(p, t, x, nu, s, r_dual, r_pri);
    const double res_norm =
        std::sqrt(r_dual.squaredNorm() + r_pri.squaredNorm());
    if (res_norm <= rel_tol * scale + 1e-12) return out;

    Eigen::VectorXd d = s.cwiseInverse().cwiseAbs2();
    if (!kkt.factorize(t, d)) {
      out.stalled = true;
      return out;
    }
    Eigen::VectorXd rhs(p.n + p.meq());
    rhs.head(p.n) = -r_dual;
    rhs.tail(p.meq()) = -r_pri;
    Eigen::VectorXd step = kkt.solve(rhs);
    --budget;

    // Fraction-to-boundary then backtracking on the residual norm.
    Eigen::VectorXd dx = step.head(p.n);
    Eigen::VectorXd dnu = step.tail(p.meq());
    Eigen::VectorXd g_dx = p.G * dx;
    double alpha = 1.0;
    for (int r = 0; r < p.m(); ++r) {
      if (g_dx(r) > 0.0) alpha = std::min(alpha, 0.99 * s(r) / g_dx(r));
    }
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      Eigen::VectorXd x_new = x + alpha * dx;
      Eigen::VectorXd nu_new = nu + alpha * dnu;
      Eigen::VectorXd s_new = s - alpha * g_dx;
      if ((s_new.array() > 0.0).all()) {
        center_residual(p, t, x_new, nu_new, s_new, rd_new, rp_new);
        const double new_norm =
            std::sqrt(rd_new.squaredNorm() + rp_new.squaredNorm());
        if (new_norm <= (1.0 - 0.01 * alpha) * res_norm) {
          x = std::move(x_new);
          nu = std::move(nu_new);
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
      if (alpha < 1e-13) break;
    }
    if (!accepted) {
      out.stalled = true;
      return out;
    }
    if (early_stop(x)) return out;
  }
  return out;
}

struct NoStop {
  bool operator()(const Eigen::VectorXd&) const { return false; }
};

// Least-norm solution of Aeq x = beq (or zero vector without equalities).
Eigen::VectorXd equality_least_norm(const BarrierProblem& p) {
  if (p.meq() == 0) return Eigen::VectorXd::Zero(p.n);
  std::vector<Triplet> trip;
  const int n = p.n;
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
  for (int k = 0; k < p.Aeq.outerSize(); ++k) {
    for (SpMat::InnerIterator it(p.Aeq, k); it; ++it) {
      trip.emplace_back(n + static_cast<int>(it.row()),
                        static_cast<int>(it.col()), it.value());
      trip.emplace_back(static_cast<int>(it.col()),
                        n + static_cast<int>(it.row()), it.value());
    }
  }
  for (int i = 0; i < p.meq(); ++i) trip.emplace_back(n + i, n + i, -1e-10);
  SpMat K(n + p.meq(), n + p.meq());
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SpMat> ldlt(K);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p.meq());
  rhs.tail(p.meq()) = p.beq;
  if (ldlt.info() != Eigen::Success) return Eigen::VectorXd::Zero(p.n);
  Eigen::VectorXd y = ldlt.solve(rhs);
  return y.head(n);
}

void validate_problem(const QpProblem& p) {
  const int n = p.n();
  if (p.H.rows() != n || p.H.cols() != n) {
    throw std::invalid_argument("solve_qp: H dimension mismatch");
  }
  if (p.A_eq.rows() != p.b_eq.size() || (p.A_eq.rows() > 0 && p.A_eq.cols() != n)) {
    throw std::invalid_argument("solve_qp: equality dimension mismatch");
  }
  if (p.A_in.rows() != p.b_in.size() || (p.A_in.rows() > 0 && p.A_in.cols() != n)) {
    throw std::invalid_argument("solve_qp: inequality dimension mismatch");
  }
  if (p.lb.size() != n || p.ub.size() != n) {
    throw std::invalid_argument("solve_qp: bound dimension mismatch");
  }
  // Symmetry.
  SpMat D = SpMat(p.H.transpose()) - p.H;
  double max_h = 0.0;
  for (int k = 0; k < p.H.outerSize(); ++k) {
    for (SpMat::InnerIterator it(p.H, k); it; ++it) {
      max_h = std::max(max_h, std::abs(it.value()));
    }
  }
  for (int k = 0; k < D.outerSize(); ++k) {
    for (SpMat::InnerIterator it(D, k); it; ++it) {
      if (std::abs(it.value()) > 1e-9 * (1.0 + max_h)) {
        throw std::invalid_argument("solve_qp: H is not symmetric");
      }
    }
  }
  // Positive semidefiniteness via a regularized LDLT pivot check.
  SpMat Hr = p.H;
  const double reg = 1e-10 * (1.0 + max_h);
  std::vector<Triplet> trip;
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, reg);
  SpMat R(n, n);
  R.setFromTriplets(trip.begin(), trip.end());
  Hr += R;
  Eigen::SimplicialLDLT<SpMat> ldlt(Hr);
  if (ldlt.info() != Eigen::Success ||
      (ldlt.vectorD().array() < -1e-7 * (1.0 + max_h)).any()) {
    throw std::invalid_argument("solve_qp: H is not positive semidefinite");
  }
}

BarrierProblem make_main_problem(const QpProblem& p) {
  BarrierProblem bp;
  bp.n = p.n();
  bp.Hq = p.H;
  bp.fq = p.f;
  bp.Aeq = p.A_eq;
  bp.beq = p.b_eq;

  std::vector<Triplet> rows;
  std::vector<double> rhs;
  for (int k = 0; k < p.A_in.outerSize(); ++k) {
    for (SpMat::InnerIterator it(p.A_in, k); it; ++it) {
      rows.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                        it.value());
    }
  }
  int r = static_cast<int>(p.A_in.rows());
  rhs.assign(p.b_in.data(), p.b_in.data() + p.b_in.size());
  for (int i = 0; i < bp.n; ++i) {
    if (std::isfinite(p.ub(i)) && p.ub(i) < 1e17) {
      rows.emplace_back(r++, i, 1.0);
      rhs.push_back(p.ub(i));
    }
    if (std::isfinite(p.lb(i)) && p.lb(i) > -1e17) {
      rows.emplace_back(r++, i, -1.0);
      rhs.push_back(-p.lb(i));
    }
  }
  bp.G.resize(r, bp.n);
  bp.G.setFromTriplets(rows.begin(), rows.end());
  bp.h = Eigen::Map<Eigen::VectorXd>(rhs.data(), rhs.size());
  return bp;
}

// Phase-1 problem over (x, s): minimize s subject to the original
// equalities, G x - s <= h, and s <= s_cap.
BarrierProblem make_phase1_problem(const BarrierProblem& main, double s_cap) {
  BarrierProblem p1;
  p1.n = main.n + 1;
  p1.Hq.resize(p1.n, p1.n);
  p1.fq = Eigen::VectorXd::Zero(p1.n);
  p1.fq(main.n) = 1.0;
  if (main.meq() > 0) {
    std::vector<Triplet> trip;
    for (int k = 0; k < main.Aeq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(main.Aeq, k); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()),
                          static_cast<int>(it.col()), it.value());
      }
    }
    p1.Aeq.resize(main.meq(), p1.n);
    p1.Aeq.setFromTriplets(trip.begin(), trip.end());
    p1.beq = main.beq;
  } else {
    p1.Aeq.resize(0, p1.n);
    p1.beq.resize(0);
  }
  std::vector<Triplet> rows;
  for (int k = 0; k < main.G.outerSize(); ++k) {
    for (SpMatRM::InnerIterator it(main.G, k); it; ++it) {
      rows.emplace_back(static_cast<int>(it.row()),
                        static_cast<int>(it.col()), it.value());
    }
  }
  for (int i = 0; i < main.m(); ++i) rows.emplace_back(i, main.n, -1.0);
  rows.emplace_back(main.m(), main.n, 1.0);
  p1.G.resize(main.m() + 1, p1.n);
  p1.G.setFromTriplets(rows.begin(), rows.end());
  p1.h.resize(main.m() + 1);
  p1.h.head(main.m()) = main.h;
  p1.h(main.m()) = s_cap;
  return p1;
}

}  // namespace

QpSolution solve_qp(const QpProblem& problem, const QpSolverOptions& opts) {
  validate_problem(problem);
  QpSolution sol;
  BarrierProblem main = make_main_problem(problem);
  const int m = main.m();
  int budget = opts.max_newton;
  const double delta = 1e-8;
  const double eps = 1e-8;

  auto finish = [&](const Eigen::VectorXd& x, double measure) {
    sol.x = x;
    sol.objective = main.objective(x);
    sol.duality_measure = measure;
    double eq_res =
        main.meq() > 0 ? (main.Aeq * x - main.beq).cwiseAbs().maxCoeff() : 0.0;
    double in_res = m > 0 ? std::max(0.0, (main.G * x - main.h).maxCoeff()) : 0.0;
    sol.primal_residual = std::max(eq_res, in_res);
    sol.newton_iters = opts.max_newton - budget;
    const double feas_scale =
        1.0 + (main.meq() > 0 ? main.beq.cwiseAbs().maxCoeff() : 0.0) +
        (m > 0 ? main.h.cwiseAbs().maxCoeff() : 0.0);
    const double tol_sc = opts.tol * (1.0 + std::abs(sol.objective));
    if (measure <= tol_sc && sol.primal_residual <= opts.tol * feas_scale) {
      sol.status = QpStatus::Optimal;
    } else {
      sol.status = QpStatus::MaxIter;
    }
    return sol;
  };

  // Equality-only problems need a single KKT solve.
  if (m == 0) {
    NewtonKkt kkt(main, delta, eps);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(main.n);
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(main.meq());
    center(main, kkt, 1.0, x, nu, budget, 50, 1e-12, NoStop{});
    return finish(x, 0.0);
  }

  // Starting point: hint if strictly feasible, otherwise phase 1.
  Eigen::VectorXd x;
  bool have_start = false;
  if (problem.x0_hint && problem.x0_hint->size() == main.n) {
    Eigen::VectorXd s = main.slacks(*problem.x0_hint);
    if ((s.array() > 1e-10).all()) {
      x = *problem.x0_hint;
      have_start = true;
    }
  }
  if (!have_start) {
    Eigen::VectorXd x_ln = equality_least_norm(main);
    const double max_viol = (main.G * x_ln - main.h).maxCoeff();
    const double s0 = max_viol + 1.0;
    BarrierProblem p1 = make_phase1_problem(main, s0 + 10.0);
    NewtonKkt kkt1(p1, delta, eps);
    Eigen::VectorXd y(p1.n);
    y.head(main.n) = x_ln;
    y(main.n) = s0;
    Eigen::VectorXd nu1 = Eigen::VectorXd::Zero(p1.meq());
    const double feas_eps = 1e-7 * (1.0 + main.h.cwiseAbs().maxCoeff());
    auto stop = [&](const Eigen::VectorXd& yy) { return yy(main.n) < -feas_eps; };
    double mu = 1.0;  // phase-1 objective is O(1) by construction
    const int m1 = p1.m();
    while (budget > 0) {
      center(p1, kkt1, 1.0 / mu, y, nu1, budget, 10, 1e-6, stop);
      if (stop(y)) break;
      // Certified infeasible: the barrier gap m1*mu bounds the optimum from
      // below, so a positive lower bound on min s proves infeasibility.
      if (y(main.n) - mu * m1 > 0.0 && mu * m1 < 1e-3) break;
      if (mu * m1 <= 1e-9) break;
      mu *= opts.mu_factor;
    }
    if (!stop(y)) {
      if (budget <= 0) {
        sol.status = QpStatus::MaxIter;
        sol.newton_iters = opts.max_newton;
        sol.x = y.head(main.n);
        sol.objective = main.objective(sol.x);
        return sol;
      }
      sol.status = QpStatus::Infeasible;
      sol.newton_iters = opts.max_newton - budget;
      sol.x = y.head(main.n);
      sol.objective = std::numeric_limits<double>::infinity();
      return sol;
    }
    x = y.head(main.n);
  }

  // Main barrier path: loosely centered intermediate stages, polished final
  // stage.
  NewtonKkt kkt(main, delta, eps);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(main.meq());
  double mu = opts.mu_init;
  while (budget > 0) {
    const double tol_sc = opts.tol * (1.0 + std::abs(main.objective(x)));
    const bool last_stage = m * mu <= tol_sc;
    const auto outcome =
        center(main, kkt, 1.0 / mu, x, nu, budget, last_stage ? 12 : 3,
               last_stage ? 1e-9 : 1e-4, NoStop{});
    if (last_stage || outcome.stalled) break;
    mu *= opts.mu_factor;
  }
  return finish(x, m * mu);
}

}  // namespace weavesim
