#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <vector>

namespace polyrelax {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Length of the minor vector (F, cof F, det F): 19 for d = 3; for d = 2 the
// cofactor block is dropped and the length is 5.
inline constexpr int minors_size(int d) { return d == 3 ? 19 : 5; }

// Flat layout: F row-major, then cof F row-major (d = 3 only), then det F.
inline constexpr int f_index(int d, int i, int alpha) { return i * d + alpha; }
inline constexpr int z_index(int /*d*/, int i, int alpha) { return 9 + i * 3 + alpha; }
inline constexpr int w_index(int d) { return d == 3 ? 18 : 4; }

// Minor vector (F, Z, w) of a d x d matrix, d in {2,3}.  Structured view and
// flat view are interchangeable; the flat layout is documented above.
struct Minors {
  Mat f;
  Mat z;  // 0 x 0 for d = 2
  double w = 0.0;

  int dim() const { return static_cast<int>(f.rows()); }
  int size() const { return minors_size(dim()); }

  Vec flat() const;
  static Minors from_flat(const Vec& x, int d);
  static Minors zero(int d);
};

// Levi-Civita symbol on three indices in {0,1,2}.
inline constexpr int levi_civita(int i, int j, int k) {
  return (j - i) * (k - i) * (k - j) / 2;
}

double determinant(const Mat& F);

// (cof F)_{ia} = 1/2 eps_{ijk} eps_{abc} F_{jb} F_{kc}; valid for singular F.
Mat cofactor(const Mat& F);

Minors phi(const Mat& F);
Vec phi_flat(const Mat& F);

// Jacobian dPhi^A/dF_{ia} as a minors_size(d) x (d*d) matrix; column i*d + a.
Mat dphi(const Mat& F);

// Periodic sampled motion y(x) = A x + u(x) with u periodic on the unit
// torus.  Axes with a single node carry no variation; nodes with 2 or 3
// points along an active axis are rejected (stencil too small).
struct MotionGrid {
  int dim = 3;
  std::array<int, 3> nodes{1, 1, 1};
  Mat affine;                // d x d
  std::vector<double> disp;  // d values per node, x-fastest ordering

  int node_count() const { return nodes[0] * nodes[1] * nodes[2]; }
  double spacing(int axis) const { return 1.0 / nodes[axis]; }
  int node_index(int i, int j, int k) const {
    return i + nodes[0] * (j + nodes[1] * k);
  }
  // Deformation gradient at a node from centered differences of y.
  Mat gradient_at(int i, int j, int k) const;
};

MotionGrid sample_motion(int d, const std::array<int, 3>& nodes, const Mat& affine,
                         const std::function<Vec(const Vec&)>& periodic_disp);

// Max over (A, i) and nodes of the discrete divergence
// D_a (dPhi^A/dF_{ia}(grad y)) built from centered differences.  Exactly zero
// fields are the null Lagrangian property; the discrete residual decays at
// second order under refinement.
double null_lagrangian_residual(const MotionGrid& motion);

}  // namespace polyrelax
