#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace polyrelax {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Rng = std::mt19937_64;

// Axis-aligned box {x : lo <= x <= hi} componentwise.
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x, double slack = 0.0) const;
  Vec center() const { return 0.5 * (lo + hi); }

  // Cube |x - c|_inf <= h.
  static Box centered(const Vec& c, double h);
};

// n stratified samples covering the box, one per stratum along each axis.
std::vector<Vec> latin_hypercube(const Box& box, int n, Rng& rng);

// Plain uniform samples.
std::vector<Vec> uniform_box(const Box& box, int n, Rng& rng);

// Central-difference derivatives used by the certificate checks and tests.
Vec central_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                     double h = 1e-5);
Mat central_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x,
                     double h = 1e-5);

// Third-derivative probe: max over coordinate triples is expensive, so this
// returns |D^3 f(x)[u,u,u]| for a given unit direction u via a five-point
// stencil on t -> f(x + t u).
double third_directional(const std::function<double(const Vec&)>& f, const Vec& x,
                         const Vec& u, double h = 1e-2);

// Least-squares slope of log(y) against log(x); x, y positive.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Slope and 2-sigma half-width from the same fit.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double half_width = 0.0;  // 2 * standard error of the slope
  int n = 0;
};
SlopeFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace polyrelax
