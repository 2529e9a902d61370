#ifndef MMFL_QUAD_EXPR_HPP
#define MMFL_QUAD_EXPR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mmfl {

/**
 * Sparse quadratic polynomial  c + sum_l a_l x_l + sum_q w_q x_i x_j.
 *
 * Used both by the surrogates (over a handful of local slots) and by the
 * convex program (over global variable indices, after remap()).
 */
struct QuadExpr {
  struct Linear {
    std::size_t i;
    double coef;
  };
  struct Quadratic {
    std::size_t i, j;
    double coef;
  };

  double constant = 0;
  std::vector<Linear> linear;
  std::vector<Quadratic> quadratic;

  double eval(std::span<const double> x) const {
    double v = constant;
    for (const auto& t : linear) v += t.coef * x[t.i];
    for (const auto& t : quadratic) v += t.coef * x[t.i] * x[t.j];
    return v;
  }

  /// Adds `w` times the gradient at x into g.
  template <class Vec>
  void add_gradient(std::span<const double> x, double w, Vec& g) const {
    for (const auto& t : linear) g[t.i] += w * t.coef;
    for (const auto& t : quadratic) {
      g[t.i] += w * t.coef * x[t.j];
      g[t.j] += w * t.coef * x[t.i];
    }
  }

  /// Adds `w` times the (constant) Hessian into H.
  template <class Mat>
  void add_hessian(double w, Mat& H) const {
    for (const auto& t : quadratic) {
      if (t.i == t.j) {
        H(t.i, t.i) += 2.0 * w * t.coef;
      } else {
        H(t.i, t.j) += w * t.coef;
        H(t.j, t.i) += w * t.coef;
      }
    }
  }

  /// Renames slot s to index map[s].
  QuadExpr remap(std::span<const std::size_t> map) const {
    QuadExpr out = *this;
    for (auto& t : out.linear) t.i = map[t.i];
    for (auto& t : out.quadratic) {
      t.i = map[t.i];
      t.j = map[t.j];
    }
    return out;
  }

  /// Substitutes slot s by scale[s] * x[map[s]].
  QuadExpr remap(std::span<const std::size_t> map, std::span<const double> scale) const {
    QuadExpr out = remap(map);
    for (std::size_t l = 0; l < linear.size(); ++l) out.linear[l].coef *= scale[linear[l].i];
    for (std::size_t q = 0; q < quadratic.size(); ++q)
      out.quadratic[q].coef *= scale[quadratic[q].i] * scale[quadratic[q].j];
    return out;
  }

  QuadExpr scaled(double s) const {
    QuadExpr out = *this;
    out.constant *= s;
    for (auto& t : out.linear) t.coef *= s;
    for (auto& t : out.quadratic) t.coef *= s;
    return out;
  }

  QuadExpr& add_constant(double c) {
    constant += c;
    return *this;
  }
  QuadExpr& add_linear(std::size_t i, double coef) {
    linear.push_back({i, coef});
    return *this;
  }
  QuadExpr& add_quadratic(std::size_t i, std::size_t j, double coef) {
    quadratic.push_back({i, j, coef});
    return *this;
  }

  /// Sorted, de-duplicated list of every variable index touched.
  std::vector<std::size_t> support() const {
    std::vector<std::size_t> s;
    for (const auto& t : linear) s.push_back(t.i);
    for (const auto& t : quadratic) {
      s.push_back(t.i);
      s.push_back(t.j);
    }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  /// Dense Hessian restricted to the quadratic support, in support order.
  Eigen::MatrixXd local_hessian() const {
    std::vector<std::size_t> idx;
    for (const auto& t : quadratic) {
      idx.push_back(t.i);
      idx.push_back(t.j);
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    auto pos = [&](std::size_t i) { return static_cast<Eigen::Index>(std::lower_bound(idx.begin(), idx.end(), i) - idx.begin()); };
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : quadratic) {
      const auto a = pos(t.i), b = pos(t.j);
      if (a == b) {
        H(a, a) += 2.0 * t.coef;
      } else {
        H(a, b) += t.coef;
        H(b, a) += t.coef;
      }
    }
    return H;
  }

  /// Smallest Hessian eigenvalue; +inf for an affine expression.
  double min_curvature() const {
    const Eigen::MatrixXd H = local_hessian();
    if (H.size() == 0) return std::numeric_limits<double>::infinity();
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  }

  double max_abs_quadratic() const {
    double m = 0;
    for (const auto& t : quadratic) m = std::max(m, std::abs(t.coef));
    return m;
  }
};

}  // namespace mmfl

#endif  // MMFL_QUAD_EXPR_HPP
