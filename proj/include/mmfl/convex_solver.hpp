#ifndef MMFL_CONVEX_SOLVER_HPP
#define MMFL_CONVEX_SOLVER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "mmfl/quad_expr.hpp"

namespace mmfl {

enum class ConstraintKind {
  Linear,      ///< expr(x) <= 0, expr affine
  Quadratic,   ///< expr(x) <= 0, expr convex quadratic
  Hyperbolic,  ///< x_a * x_b >= c with c > 0, handled as log c - log x_a - log x_b <= 0
  InverseSum,  ///< sum_j a_j / x_j + expr(x) <= 0 with a_j > 0, expr affine
  ExpSum,      ///< sum_j a_j exp(b_j x_j) + expr(x) <= 0 with a_j > 0, expr affine
};

inline const char* to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Linear: return "linear";
    case ConstraintKind::Quadratic: return "quadratic";
    case ConstraintKind::Hyperbolic: return "hyperbolic";
    case ConstraintKind::InverseSum: return "inverse_sum";
    case ConstraintKind::ExpSum: return "exp_sum";
  }
  return "?";
}

struct Constraint {
  ConstraintKind kind = ConstraintKind::Linear;
  std::string tag;
  QuadExpr expr;
  std::size_t a = 0, b = 0;  // hyperbolic operands
  double c = 0;              // hyperbolic right-hand side
  std::vector<QuadExpr::Linear> inverse;  // inverse-sum terms a_j / x_j
  struct Exp {
    std::size_t i;
    double coef, rate;
  };
  std::vector<Exp> exps;  // exp-sum terms a_j exp(b_j x_j)

  double value(std::span<const double> x) const {
    switch (kind) {
      case ConstraintKind::Hyperbolic:
        if (!(x[a] > 0) || !(x[b] > 0)) return std::numeric_limits<double>::infinity();
        return std::log(c) - std::log(x[a]) - std::log(x[b]);
      case ConstraintKind::InverseSum: {
        double s = expr.eval(x);
        for (const auto& t : inverse) {
          if (!(x[t.i] > 0)) return std::numeric_limits<double>::infinity();
          s += t.coef / x[t.i];
        }
        return s;
      }
      case ConstraintKind::ExpSum: {
        double s = expr.eval(x);
        for (const auto& t : exps) s += t.coef * std::exp(t.rate * x[t.i]);
        return s;
      }
      default: return expr.eval(x);
    }
  }

  template <class Vec>
  void add_gradient(std::span<const double> x, double w, Vec& g) const {
    switch (kind) {
      case ConstraintKind::Hyperbolic:
        g[a] -= w / x[a];
        g[b] -= w / x[b];
        break;
      case ConstraintKind::InverseSum:
        expr.add_gradient(x, w, g);
        for (const auto& t : inverse) g[t.i] -= w * t.coef / (x[t.i] * x[t.i]);
        break;
      case ConstraintKind::ExpSum:
        expr.add_gradient(x, w, g);
        for (const auto& t : exps) g[t.i] += w * t.coef * t.rate * std::exp(t.rate * x[t.i]);
        break;
      default: expr.add_gradient(x, w, g);
    }
  }

  template <class Mat>
  void add_hessian(std::span<const double> x, double w, Mat& H) const {
    switch (kind) {
      case ConstraintKind::Hyperbolic:
        H(a, a) += w / (x[a] * x[a]);
        H(b, b) += w / (x[b] * x[b]);
        break;
      case ConstraintKind::InverseSum:
        for (const auto& t : inverse) H(t.i, t.i) += w * 2.0 * t.coef / (x[t.i] * x[t.i] * x[t.i]);
        break;
      case ConstraintKind::ExpSum:
        for (const auto& t : exps) H(t.i, t.i) += w * t.coef * t.rate * t.rate * std::exp(t.rate * x[t.i]);
        break;
      case ConstraintKind::Quadratic: expr.add_hessian(w, H); break;
      case ConstraintKind::Linear: break;
    }
  }
};

/**
 * Smooth convex program: minimize a convex quadratic subject to linear,
 * convex-quadratic, hyperbolic, inverse-sum and exp-sum constraints and
 * strict lower bounds on variables (-inf for free variables).
 */
struct ConvexProgram {
  std::vector<std::string> var_names;
  std::vector<double> lower;
  QuadExpr objective;
  std::vector<Constraint> constraints;

  std::size_t n_vars() const { return var_names.size(); }

  std::size_t add_var(std::string name, double lb = -std::numeric_limits<double>::infinity()) {
    var_names.push_back(std::move(name));
    lower.push_back(lb);
    return var_names.size() - 1;
  }

  void add_affine(std::string tag, QuadExpr e) {
    push(ConstraintKind::Linear, std::move(tag), std::move(e));
  }
  void add_quadratic(std::string tag, QuadExpr e) {
    push(ConstraintKind::Quadratic, std::move(tag), std::move(e));
  }
  void add_hyperbolic(std::string tag, std::size_t a, std::size_t b, double c) {
    auto& k = push(ConstraintKind::Hyperbolic, std::move(tag), {});
    k.a = a;
    k.b = b;
    k.c = c;
  }
  void add_inverse_sum(std::string tag, std::vector<QuadExpr::Linear> inverse, QuadExpr affine) {
    push(ConstraintKind::InverseSum, std::move(tag), std::move(affine)).inverse = std::move(inverse);
  }
  void add_exp_sum(std::string tag, std::vector<Constraint::Exp> exps, QuadExpr affine) {
    push(ConstraintKind::ExpSum, std::move(tag), std::move(affine)).exps = std::move(exps);
  }

  Constraint& push(ConstraintKind kind, std::string tag, QuadExpr e) {
    Constraint& k = constraints.emplace_back();
    k.kind = kind;
    k.tag = std::move(tag);
    k.expr = std::move(e);
    return k;
  }

  /// Checks structural invariants: indices in range, convexity of every
  /// quadratic form, and positivity domains of hyperbolic/inverse terms.
  void validate() const {
    const auto n = n_vars();
    auto fail = [](const std::string& m) { throw std::invalid_argument("ConvexProgram: " + m); };
    auto check_expr = [&](const QuadExpr& e, const std::string& where, bool affine) {
      for (auto i : e.support())
        if (i >= n) fail(where + " references variable out of range");
      if (affine && !e.quadratic.empty()) fail(where + " must be affine");
      const double m = e.max_abs_quadratic();
      if (m > 0 && e.min_curvature() < -1e-10 * m) fail(where + " is not convex");
    };
    check_expr(objective, "objective", false);
    for (const auto& c : constraints) {
      check_expr(c.expr, c.tag, c.kind != ConstraintKind::Quadratic);
      if (c.kind == ConstraintKind::Hyperbolic) {
        if (c.a >= n || c.b >= n) fail(c.tag + " references variable out of range");
        if (!(c.c > 0)) fail(c.tag + " needs c > 0");
        if (!(lower[c.a] >= 0) || !(lower[c.b] >= 0)) fail(c.tag + " operands need nonnegative lower bounds");
      }
      for (const auto& t : c.inverse) {
        if (t.i >= n) fail(c.tag + " references variable out of range");
        if (!(t.coef > 0)) fail(c.tag + " needs positive inverse coefficients");
        if (!(lower[t.i] >= 0)) fail(c.tag + " inverse operand needs a nonnegative lower bound");
      }
      for (const auto& t : c.exps) {
        if (t.i >= n) fail(c.tag + " references variable out of range");
        if (!(t.coef > 0) || !std::isfinite(t.rate)) fail(c.tag + " needs positive exp coefficients");
      }
    }
  }
};

/// Plain-text listing of a program for offline inspection.
inline void write_listing(std::ostream& os, const ConvexProgram& p) {
  os << "variables " << p.n_vars() << "\n";
  for (std::size_t i = 0; i < p.n_vars(); ++i) os << "  x" << i << " " << p.var_names[i] << " lb=" << p.lower[i] << "\n";
  auto expr = [&](const QuadExpr& e) {
    os << e.constant;
    for (const auto& t : e.linear) os << " + " << t.coef << "*x" << t.i;
    for (const auto& t : e.quadratic) os << " + " << t.coef << "*x" << t.i << "*x" << t.j;
  };
  os << "objective ";
  expr(p.objective);
  os << "\nconstraints " << p.constraints.size() << "\n";
  for (const auto& c : p.constraints) {
    os << "  [" << to_string(c.kind) << "] " << c.tag << ": ";
    if (c.kind == ConstraintKind::Hyperbolic) {
      os << "x" << c.a << "*x" << c.b << " >= " << c.c;
    } else {
      for (const auto& t : c.inverse) os << t.coef << "/x" << t.i << " + ";
      for (const auto& t : c.exps) os << t.coef << "*exp(" << t.rate << "*x" << t.i << ") + ";
      expr(c.expr);
      os << " <= 0";
    }
    os << "\n";
  }
}

enum class SolverStatus { Optimal, MaxIter, NumericalFailure };

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Optimal: return "optimal";
    case SolverStatus::MaxIter: return "max_iter";
    case SolverStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct KktResidual {
  double stationarity = 0;
  double primal = 0;
  double complementarity = 0;

  double max() const { return std::max({stationarity, primal, complementarity}); }
};

struct SolverOptions {
  double tol = 1e-9;             ///< relative duality-gap target
  double barrier_growth = 30.0;  ///< t multiplier per outer stage
  double newton_tol = 1e-10;     ///< half squared Newton decrement ending a centering
  int max_newton = 100;          ///< per centering stage
  int max_total_newton = 3000;
  double t0_scale = 0.1;         ///< first-stage gap is |f(x0)| / t0_scale
  double local_decrement = 0.1;  ///< below this squared decrement, take pure Newton steps
  double stall_decrement = 1e-6;  ///< a stage ends once the decrement stops shrinking below this
};

struct SolverSolution {
  std::vector<double> x;
  double objective_value = 0;
  SolverStatus status = SolverStatus::NumericalFailure;
  KktResidual kkt;
  std::vector<double> duals;        ///< one per constraint
  std::vector<double> bound_duals;  ///< one per variable (0 when unbounded)
  int iterations = 0;               ///< Newton steps
  int stages = 0;
  double wall_time = 0;
  std::string message;
};

/**
 * Scaled KKT residuals at x with multipliers for constraints and lower bounds:
 * stationarity is the inf-norm of the Lagrangian gradient over (1 + |grad f|),
 * primal the largest positive constraint value or bound violation, and
 * complementarity the largest |lambda g| over (1 + |f|).
 */
inline KktResidual kkt_residual(const ConvexProgram& p, std::span<const double> x, std::span<const double> duals,
                                std::span<const double> bound_duals) {
  const auto n = static_cast<Eigen::Index>(p.n_vars());
  Eigen::VectorXd gf = Eigen::VectorXd::Zero(n);
  p.objective.add_gradient(x, 1.0, gf);
  Eigen::VectorXd gl = gf;
  KktResidual r;
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    const double g = p.constraints[i].value(x);
    p.constraints[i].add_gradient(x, duals[i], gl);
    r.primal = std::max(r.primal, g);
    r.complementarity = std::max(r.complementarity, std::abs(duals[i] * g));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (!std::isfinite(p.lower[ju])) continue;
    gl[j] -= bound_duals[ju];
    r.primal = std::max(r.primal, p.lower[ju] - x[ju]);
    r.complementarity = std::max(r.complementarity, std::abs(bound_duals[ju] * (x[ju] - p.lower[ju])));
  }
  r.stationarity = gl.lpNorm<Eigen::Infinity>() / (1.0 + gf.lpNorm<Eigen::Infinity>());
  r.complementarity /= 1.0 + std::abs(p.objective.eval(x));
  return r;
}

namespace detail {

class BarrierSolver {
 public:
  BarrierSolver(const ConvexProgram& p, const SolverOptions& o)
      : p_(p), o_(o), n_(static_cast<Eigen::Index>(p.n_vars())) {
    for (std::size_t j = 0; j < p.n_vars(); ++j)
      if (std::isfinite(p.lower[j])) bounded_.push_back(j);
    m_ = static_cast<double>(p.constraints.size() + bounded_.size());
    for (const auto& c : p.constraints) support_.push_back(support_of(c));
    gc_.setZero(n_);
    if (n_ >= kSparseFrom) build_pattern();
  }

  bool strictly_feasible(std::span<const double> x) const {
    for (double v : x)
      if (!std::isfinite(v)) return false;
    for (auto j : bounded_)
      if (!(x[j] > p_.lower[j])) return false;
    for (const auto& c : p_.constraints)
      if (!(c.value(x) < 0)) return false;
    return true;
  }

  // t f(x) + phi(x); +inf outside the domain.
  double merit(std::span<const double> x, double t) const {
    double v = t * p_.objective.eval(x);
    for (auto j : bounded_) {
      const double s = x[j] - p_.lower[j];
      if (!(s > 0)) return std::numeric_limits<double>::infinity();
      v -= std::log(s);
    }
    for (const auto& c : p_.constraints) {
      const double g = c.value(x);
      if (!(g < 0)) return std::numeric_limits<double>::infinity();
      v -= std::log(-g);
    }
    return v;
  }

  void derivatives(std::span<const double> x, double t, Eigen::VectorXd& g, Eigen::MatrixXd& H,
                   Eigen::VectorXd& gf) const {
    g.setZero(n_);
    H.setZero(n_, n_);
    gf.setZero(n_);
    p_.objective.add_gradient(x, 1.0, gf);
    g = t * gf;
    p_.objective.add_hessian(t, H);
    for (auto j : bounded_) {
      const double s = x[j] - p_.lower[j];
      g[static_cast<Eigen::Index>(j)] -= 1.0 / s;
      H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += 1.0 / (s * s);
    }
    for (std::size_t i = 0; i < p_.constraints.size(); ++i) {
      const auto& c = p_.constraints[i];
      const double inv = -1.0 / c.value(x);
      c.add_gradient(x, 1.0, gc_);
      c.add_hessian(x, inv, H);
      const auto& idx = support_[i];
      for (auto a : idx) {
        g[a] += inv * gc_[a];
        for (auto b : idx) H(a, b) += inv * inv * gc_[a] * gc_[b];
      }
      for (auto a : idx) gc_[a] = 0.0;
    }
  }

  SolverSolution run(std::span<const double> x0) {
    const auto start = std::chrono::steady_clock::now();
    SolverSolution sol;
    std::vector<double> x(x0.begin(), x0.end());
    if (x.size() != p_.n_vars()) throw std::invalid_argument("solve: x0 has wrong dimension");
    if (!strictly_feasible(x)) {
      sol.status = SolverStatus::NumericalFailure;
      sol.message = "x0 is not strictly feasible";
      sol.x = x;
      finish(sol, 1.0, start);
      return sol;
    }

    Eigen::VectorXd g, gf, dx;
    Eigen::MatrixXd H;
    double t = initial_t(x);
    std::vector<double> trial(x.size());
    bool failed = false;
    while (true) {
      ++sol.stages;
      double prev_dec = std::numeric_limits<double>::infinity();
      for (int it = 0; it < o_.max_newton; ++it) {
        if (sol.iterations >= o_.max_total_newton) break;
        derivatives(x, t, g, H, gf);
        if (!newton_direction(H, g, dx)) {
          failed = true;
          sol.message = "Newton system could not be factored";
          break;
        }
        const double dec = -g.dot(dx);
        ++sol.iterations;
        if (dec / 2.0 <= o_.newton_tol) break;
        // Inside the quadratic-convergence region merit differences drown
        // in rounding at large t, so only strict feasibility is enforced.
        const bool local = dec < o_.local_decrement;
        const double phi0 = local ? 0.0 : merit(x, t);
        double step = 1.0;
        bool accepted = false;
        while (step > 1e-14) {
          for (std::size_t j = 0; j < x.size(); ++j) trial[j] = x[j] + step * dx[static_cast<Eigen::Index>(j)];
          if (local ? strictly_feasible(trial) : merit(trial, t) <= phi0 - 0.25 * step * dec) {
            accepted = true;
            break;
          }
          step *= 0.5;
        }
        if (!accepted) break;  // stalled at floating-point resolution
        x.swap(trial);
        // Decrement no longer contracting: centered to working precision.
        if (local && dec < o_.stall_decrement && dec > 0.25 * prev_dec) break;
        prev_dec = dec;
      }
      if (failed || sol.iterations >= o_.max_total_newton) break;
      const double gap = m_ / t;
      if (gap <= o_.tol * (1.0 + std::abs(p_.objective.eval(x)))) break;
      t *= o_.barrier_growth;
    }
    sol.x = std::move(x);
    if (failed)
      sol.status = SolverStatus::NumericalFailure;
    else if (sol.iterations >= o_.max_total_newton)
      sol.status = SolverStatus::MaxIter;
    else
      sol.status = SolverStatus::Optimal;
    finish(sol, t, start);
    return sol;
  }

 private:
  static std::vector<Eigen::Index> support_of(const Constraint& c) {
    std::vector<Eigen::Index> idx;
    if (c.kind == ConstraintKind::Hyperbolic) {
      idx = {static_cast<Eigen::Index>(c.a), static_cast<Eigen::Index>(c.b)};
    } else {
      for (auto i : c.expr.support()) idx.push_back(static_cast<Eigen::Index>(i));
      for (const auto& t : c.inverse) idx.push_back(static_cast<Eigen::Index>(t.i));
      for (const auto& t : c.exps) idx.push_back(static_cast<Eigen::Index>(t.i));
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
  }

  // Dense Cholesky below this size; above it the Hessian's sparsity pattern
  // (dense blocks only where constraints couple many variables) pays off.
  static constexpr Eigen::Index kSparseFrom = 48;

  void build_pattern() {
    std::vector<Eigen::Triplet<double>> trip;
    auto add = [&](Eigen::Index i, Eigen::Index j) {
      if (i < j) std::swap(i, j);
      trip.emplace_back(i, j, 1.0);
    };
    for (Eigen::Index j = 0; j < n_; ++j) add(j, j);
    for (const auto& t : p_.objective.quadratic)
      add(static_cast<Eigen::Index>(t.i), static_cast<Eigen::Index>(t.j));
    for (const auto& idx : support_)
      for (auto a : idx)
        for (auto b : idx) if (a >= b) add(a, b);
    Hs_.resize(n_, n_);
    Hs_.setFromTriplets(trip.begin(), trip.end());
    Hs_.makeCompressed();
    llt_.analyzePattern(Hs_);
  }

  bool sparse_direction(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, Eigen::VectorXd& dx, double reg) const {
    for (Eigen::Index col = 0; col < Hs_.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(Hs_, col); it; ++it)
        it.valueRef() = H(it.row(), it.col()) + (it.row() == it.col() ? reg : 0.0);
    llt_.factorize(Hs_);
    if (llt_.info() != Eigen::Success) return false;
    dx = -llt_.solve(g);
    return dx.allFinite();
  }

  bool newton_direction(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, Eigen::VectorXd& dx) const {
    const double d = std::max(1e-300, H.diagonal().cwiseAbs().maxCoeff());
    if (n_ >= kSparseFrom) {
      if (sparse_direction(H, g, dx, 0.0)) return true;
      for (double reg = 1e-12; reg <= 1e-2; reg *= 100)
        if (sparse_direction(H, g, dx, reg * d)) return true;
      return false;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() == Eigen::Success) {
      dx = -llt.solve(g);
      if (dx.allFinite()) return true;
    }
    for (double reg = 1e-12; reg <= 1e-2; reg *= 100) {
      Eigen::MatrixXd R = H;
      R.diagonal().array() += reg * d;
      Eigen::LLT<Eigen::MatrixXd> l2(R);
      if (l2.info() != Eigen::Success) continue;
      dx = -l2.solve(g);
      if (dx.allFinite()) return true;
    }
    return false;
  }

  // Initial barrier weight: duality gap of the first center comparable to
  // |f(x0)| scaled by t0_scale.
  double initial_t(std::span<const double> x) const {
    const double f = std::abs(p_.objective.eval(x));
    return o_.t0_scale * m_ / (1.0 + f);
  }

  void set_duals(SolverSolution& sol, double t, const Eigen::VectorXd* dx) const {
    sol.duals.assign(p_.constraints.size(), 0.0);
    sol.bound_duals.assign(p_.n_vars(), 0.0);
    Eigen::VectorXd gc(n_);
    for (std::size_t i = 0; i < p_.constraints.size(); ++i) {
      const auto& c = p_.constraints[i];
      const double g = c.value(sol.x);
      if (!(g < 0)) continue;
      double corr = 1.0;
      if (dx) {
        gc.setZero();
        c.add_gradient(sol.x, 1.0, gc);
        corr = std::max(0.0, 1.0 + gc.dot(*dx) / -g);
      }
      sol.duals[i] = corr / (t * -g);
    }
    for (auto j : bounded_) {
      const double s = sol.x[j] - p_.lower[j];
      if (!(s > 0)) continue;
      const double corr = dx ? std::max(0.0, 1.0 - (*dx)[static_cast<Eigen::Index>(j)] / s) : 1.0;
      sol.bound_duals[j] = corr / (t * s);
    }
  }

  // Duals from the central-path relation, then the Newton-corrected pair
  // (x + dx, lambda+) which cancels the first-order stationarity residual;
  // the better of the two is kept.
  void finish(SolverSolution& sol, double t, std::chrono::steady_clock::time_point start) const {
    set_duals(sol, t, nullptr);
    sol.kkt = kkt_residual(p_, sol.x, sol.duals, sol.bound_duals);
    if (sol.status != SolverStatus::NumericalFailure && n_ > 0) {
      Eigen::VectorXd g, gf, dx;
      Eigen::MatrixXd H;
      derivatives(sol.x, t, g, H, gf);
      if (newton_direction(H, g, dx)) {
        SolverSolution alt;
        alt.status = sol.status;
        alt.x = sol.x;
        set_duals(alt, t, &dx);
        for (std::size_t j = 0; j < alt.x.size(); ++j) alt.x[j] += dx[static_cast<Eigen::Index>(j)];
        if (strictly_feasible(alt.x)) {
          alt.kkt = kkt_residual(p_, alt.x, alt.duals, alt.bound_duals);
          if (alt.kkt.max() < sol.kkt.max()) {
            sol.x = std::move(alt.x);
            sol.duals = std::move(alt.duals);
            sol.bound_duals = std::move(alt.bound_duals);
            sol.kkt = alt.kkt;
          }
        }
      }
    }
    sol.objective_value = p_.objective.eval(sol.x);
    sol.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  const ConvexProgram& p_;
  SolverOptions o_;
  Eigen::Index n_;
  std::vector<std::size_t> bounded_;
  std::vector<std::vector<Eigen::Index>> support_;
  mutable Eigen::VectorXd gc_;  // scratch gradient, zero outside use
  mutable Eigen::SparseMatrix<double> Hs_;  // lower triangle
  mutable Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
  double m_ = 0;
};

}  // namespace detail

/**
 * Primal log-barrier method: damped Newton centering with backtracking that
 * never leaves the strict interior, barrier weight multiplied by
 * `barrier_growth` per stage until m/t <= tol (1 + |f|). x0 must be strictly
 * feasible; otherwise the status is numerical_failure and x0 is returned.
 */
inline SolverSolution solve(const ConvexProgram& p, std::span<const double> x0, const SolverOptions& opts = {}) {
  return detail::BarrierSolver(p, opts).run(x0);
}

}  // namespace mmfl

#endif  // MMFL_CONVEX_SOLVER_HPP
