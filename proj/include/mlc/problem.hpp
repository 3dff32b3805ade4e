#pragma once
/**
 * @file problem.hpp
 * @brief Box-constrained elliptic optimal control problems.
 *
 *   min 1/2 ||y - y_d||^2 + alpha/2 ||u||^2,  a <= u <= b,
 *   -Delta y + phi(y) = f + u in Omega,  y = 0 on the boundary.
 */

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "mlc/fem.hpp"

namespace mlc {

/// phi and its first two derivatives; phi' must be nonnegative.
struct Nonlinearity {
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  std::function<double(double)> d2phi;

  static Nonlinearity cubic() {
    return {[](double s) { return s * s * s; }, [](double s) { return 3.0 * s * s; },
            [](double s) { return 6.0 * s; }};
  }

  static Nonlinearity zero() {
    return {[](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
  }
};

/// Closed-form optimal triple together with the negative Laplacians of the
/// state and adjoint, used for residual checks of the continuous system.
struct ExactSolution {
  ScalarField u;
  ScalarField y;
  ScalarField p;
  ScalarField neg_laplace_y;
  ScalarField neg_laplace_p;
};

struct OcpProblem {
  std::string name;
  ScalarField f;
  ScalarField y_d;
  ScalarField lower;
  ScalarField upper;
  double alpha = 1.0;
  std::optional<Nonlinearity> nonlinearity;
  std::optional<ExactSolution> exact;

  [[nodiscard]] bool is_linear() const { return !nonlinearity.has_value(); }

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("OcpProblem: alpha must be positive");
    if (!f || !y_d || !lower || !upper) {
      throw std::invalid_argument("OcpProblem: f, y_d and both bounds are required");
    }
    for (int i = 0; i <= 8; ++i) {
      for (int j = 0; j <= 8; ++j) {
        const double x = i / 8.0;
        const double y = j / 8.0;
        if (!(lower(x, y) < upper(x, y))) {
          throw std::invalid_argument("OcpProblem: lower bound must be below upper bound");
        }
      }
    }
  }
};

}  // namespace mlc
