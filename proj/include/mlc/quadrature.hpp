#pragma once
/**
 * @file quadrature.hpp
 * @brief Symmetric quadrature rules on the reference triangle.
 */

#include <array>
#include <cmath>
#include <vector>

namespace mlc {

/// Points in barycentric coordinates; weights sum to the reference area 1/2.
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;

  [[nodiscard]] std::size_t size() const { return points.size(); }

  static QuadratureRule centroid() { return {{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, {0.5}, 1}; }

  static QuadratureRule edge_midpoints() {
    return {{{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}}, {1.0 / 6, 1.0 / 6, 1.0 / 6}, 2};
  }

  /// 7-point rule exact for polynomials of degree 5.
  static QuadratureRule seven_point() {
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0;
    const double b1 = 1.0 - 2.0 * a1;
    const double a2 = (6.0 + s15) / 21.0;
    const double b2 = 1.0 - 2.0 * a2;
    const double w1 = 0.5 * (155.0 - s15) / 1200.0;
    const double w2 = 0.5 * (155.0 + s15) / 1200.0;
    QuadratureRule r;
    r.degree = 5;
    r.points = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1},
                {a2, a2, b2}, {a2, b2, a2}, {b2, a2, a2}};
    r.weights = {0.5 * 9.0 / 40.0, w1, w1, w1, w2, w2, w2};
    return r;
  }
};

inline const QuadratureRule& default_rule() {
  static const QuadratureRule rule = QuadratureRule::seven_point();
  return rule;
}

}  // namespace mlc
