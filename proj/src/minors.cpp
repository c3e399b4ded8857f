#include "polyrelax/minors.hpp"

#include <stdexcept>

namespace polyrelax {

namespace {

void require_dim(const Mat& F) {
  if (F.rows() != F.cols() || (F.rows() != 2 && F.rows() != 3))
    throw std::invalid_argument("minors: matrix must be 2x2 or 3x3");
}

}  // namespace

Vec Minors::flat() const {
  const int d = dim();
  Vec x(size());
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a) x[f_index(d, i, a)] = f(i, a);
  if (d == 3)
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 3; ++a) x[z_index(d, i, a)] = z(i, a);
  x[w_index(d)] = w;
  return x;
}

Minors Minors::from_flat(const Vec& x, int d) {
  if (d != 2 && d != 3) throw std::invalid_argument("minors: dim must be 2 or 3");
  if (x.size() != minors_size(d))
    throw std::invalid_argument("minors: flat vector has wrong length");
  Minors m;
  m.f = Mat(d, d);
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a) m.f(i, a) = x[f_index(d, i, a)];
  if (d == 3) {
    m.z = Mat(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 3; ++a) m.z(i, a) = x[z_index(d, i, a)];
  } else {
    m.z = Mat(0, 0);
  }
  m.w = x[w_index(d)];
  return m;
}

Minors Minors::zero(int d) {
  if (d != 2 && d != 3) throw std::invalid_argument("minors: dim must be 2 or 3");
  Minors m;
  m.f = Mat::Zero(d, d);
  m.z = d == 3 ? Mat::Zero(3, 3) : Mat(0, 0);
  m.w = 0.0;
  return m;
}

double determinant(const Mat& F) {
  require_dim(F);
  if (F.rows() == 2) return F(0, 0) * F(1, 1) - F(0, 1) * F(1, 0);
  return F(0, 0) * (F(1, 1) * F(2, 2) - F(1, 2) * F(2, 1)) -
         F(0, 1) * (F(1, 0) * F(2, 2) - F(1, 2) * F(2, 0)) +
         F(0, 2) * (F(1, 0) * F(2, 1) - F(1, 1) * F(2, 0));
}

Mat cofactor(const Mat& F) {
  require_dim(F);
  const int d = static_cast<int>(F.rows());
  Mat c(d, d);
  if (d == 2) {
    c << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
    return c;
  }
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3, g = (a + 2) % 3;
      c(i, a) = F(j, b) * F(k, g) - F(j, g) * F(k, b);
    }
  }
  return c;
}

Minors phi(const Mat& F) {
  require_dim(F);
  Minors m;
  m.f = F;
  m.z = F.rows() == 3 ? cofactor(F) : Mat(0, 0);
  m.w = determinant(F);
  return m;
}

Vec phi_flat(const Mat& F) { return phi(F).flat(); }

Mat dphi(const Mat& F) {
  require_dim(F);
  const int d = static_cast<int>(F.rows());
  Mat J = Mat::Zero(minors_size(d), d * d);
  // F block: identity.
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a) J(f_index(d, i, a), i * d + a) = 1.0;
  if (d == 3) {
    // dZ_{ia}/dF_{jb} = eps_{ijk} eps_{abg} F_{kg}.
    for (int i = 0; i < 3; ++i) {
      for (int a = 0; a < 3; ++a) {
        for (int j = 0; j < 3; ++j) {
          if (j == i) continue;
          const int k = 3 - i - j;
          const int eijk = levi_civita(i, j, k);
          for (int b = 0; b < 3; ++b) {
            if (b == a) continue;
            const int g = 3 - a - b;
            J(z_index(d, i, a), j * 3 + b) = eijk * levi_civita(a, b, g) * F(k, g);
          }
        }
      }
    }
    // dw/dF = cof F.
    const Mat c = cofactor(F);
    for (int j = 0; j < 3; ++j)
      for (int b = 0; b < 3; ++b) J(w_index(d), j * 3 + b) = c(j, b);
  } else {
    const Mat c = cofactor(F);
    for (int j = 0; j < 2; ++j)
      for (int b = 0; b < 2; ++b) J(w_index(d), j * 2 + b) = c(j, b);
  }
  return J;
}

Mat MotionGrid::gradient_at(int i, int j, int k) const {
  Mat F = affine;
  const std::array<int, 3> n{i, j, k};
  for (int a = 0; a < dim; ++a) {
    if (nodes[a] == 1) continue;
    std::array<int, 3> p = n, m = n;
    p[a] = (n[a] + 1) % nodes[a];
    m[a] = (n[a] - 1 + nodes[a]) % nodes[a];
    const int ip = node_index(p[0], p[1], p[2]);
    const int im = node_index(m[0], m[1], m[2]);
    const double inv2h = 0.5 / spacing(a);
    for (int c = 0; c < dim; ++c)
      F(c, a) += (disp[dim * ip + c] - disp[dim * im + c]) * inv2h;
  }
  return F;
}

MotionGrid sample_motion(int d, const std::array<int, 3>& nodes, const Mat& affine,
                         const std::function<Vec(const Vec&)>& periodic_disp) {
  if (d != 2 && d != 3) throw std::invalid_argument("sample_motion: dim must be 2 or 3");
  if (affine.rows() != d || affine.cols() != d)
    throw std::invalid_argument("sample_motion: affine part must be d x d");
  MotionGrid grid;
  grid.dim = d;
  grid.nodes = nodes;
  for (int a = d; a < 3; ++a) grid.nodes[a] = 1;
  for (int a = 0; a < d; ++a) {
    if (grid.nodes[a] != 1 && grid.nodes[a] < 4)
      throw std::invalid_argument("sample_motion: active axis needs at least 4 nodes");
  }
  grid.affine = affine;
  grid.disp.resize(static_cast<size_t>(d) * grid.node_count());
  Vec x = Vec::Zero(d);
  for (int k = 0; k < grid.nodes[2]; ++k) {
    for (int j = 0; j < grid.nodes[1]; ++j) {
      for (int i = 0; i < grid.nodes[0]; ++i) {
        x[0] = i * grid.spacing(0);
        if (d > 1) x[1] = j * grid.spacing(1);
        if (d > 2) x[2] = k * grid.spacing(2);
        const Vec u = periodic_disp(x);
        if (u.size() != d)
          throw std::invalid_argument("sample_motion: displacement must have d components");
        const int idx = grid.node_index(i, j, k);
        for (int c = 0; c < d; ++c) grid.disp[static_cast<size_t>(d) * idx + c] = u[c];
      }
    }
  }
  return grid;
}

namespace {

// Allocation-free kernels for the residual sweep (the grids can be large).
void gradient_raw(const MotionGrid& g, int i, int j, int k, double* F) {
  const int d = g.dim;
  for (int c = 0; c < d; ++c)
    for (int a = 0; a < d; ++a) F[c * d + a] = g.affine(c, a);
  const int n[3] = {i, j, k};
  for (int a = 0; a < d; ++a) {
    if (g.nodes[a] == 1) continue;
    int p[3] = {n[0], n[1], n[2]}, m[3] = {n[0], n[1], n[2]};
    p[a] = (n[a] + 1) % g.nodes[a];
    m[a] = (n[a] - 1 + g.nodes[a]) % g.nodes[a];
    const int ip = g.node_index(p[0], p[1], p[2]);
    const int im = g.node_index(m[0], m[1], m[2]);
    const double inv2h = 0.5 * g.nodes[a];
    for (int c = 0; c < d; ++c)
      F[c * d + a] = g.affine(c, a) +
                     (g.disp[static_cast<size_t>(d) * ip + c] -
                      g.disp[static_cast<size_t>(d) * im + c]) * inv2h;
  }
}

// J[A * d * d + j * d + b] = dPhi^A/dF_{jb}, F row-major.
void dphi_raw(const double* F, int d, double* J) {
  const int D = minors_size(d), dd = d * d;
  std::fill(J, J + D * dd, 0.0);
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a) J[f_index(d, i, a) * dd + i * d + a] = 1.0;
  if (d == 3) {
    for (int i = 0; i < 3; ++i) {
      for (int a = 0; a < 3; ++a) {
        double* row = J + z_index(d, i, a) * dd;
        for (int j = 0; j < 3; ++j) {
          if (j == i) continue;
          const int k = 3 - i - j;
          const int eijk = levi_civita(i, j, k);
          for (int b = 0; b < 3; ++b) {
            if (b == a) continue;
            const int g = 3 - a - b;
            row[j * 3 + b] = eijk * levi_civita(a, b, g) * F[k * 3 + g];
          }
        }
      }
    }
    double* row = J + w_index(d) * dd;
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3, k = (i + 2) % 3;
      for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3, g = (a + 2) % 3;
        row[i * 3 + a] = F[j * 3 + b] * F[k * 3 + g] - F[j * 3 + g] * F[k * 3 + b];
      }
    }
  } else {
    double* row = J + w_index(d) * dd;
    row[0] = F[3];
    row[1] = -F[2];
    row[2] = -F[1];
    row[3] = F[0];
  }
}

}  // namespace

double null_lagrangian_residual(const MotionGrid& motion) {
  const int d = motion.dim;
  if (d != 2 && d != 3)
    throw std::invalid_argument("null_lagrangian_residual: dim must be 2 or 3");
  for (int a = 0; a < d; ++a) {
    if (motion.nodes[a] != 1 && motion.nodes[a] < 4)
      throw std::invalid_argument("null_lagrangian_residual: active axis needs at least 4 nodes");
  }
  const int D = minors_size(d), dd = d * d;
  const int n0 = motion.nodes[0], n1 = motion.nodes[1], n2 = motion.nodes[2];
  // Stream along axis 0 holding a three-slab ring of Jacobians.
  const size_t slab_nodes = static_cast<size_t>(n1) * n2;
  const size_t slab_stride = slab_nodes * D * dd;
  std::vector<double> ring(3 * slab_stride);
  double* Jm = ring.data();
  double* Jc = ring.data() + slab_stride;
  double* Jp = ring.data() + 2 * slab_stride;

  const auto fill_slab = [&](int i, double* out) {
    double F[9];
    for (int k = 0; k < n2; ++k) {
      for (int j = 0; j < n1; ++j) {
        gradient_raw(motion, i, j, k, F);
        dphi_raw(F, d, out + (static_cast<size_t>(j) + static_cast<size_t>(n1) * k) * D * dd);
      }
    }
  };

  if (n0 > 1) {
    fill_slab(n0 - 1, Jm);
    fill_slab(0, Jc);
    fill_slab(1 % n0, Jp);
  } else {
    fill_slab(0, Jc);
    Jm = Jp = Jc;
  }

  double worst = 0.0;
  double div[19 * 3];
  const double inv2h0 = 0.5 * n0, inv2h1 = 0.5 * n1, inv2h2 = 0.5 * n2;
  for (int i = 0; i < n0; ++i) {
    for (int k = 0; k < n2; ++k) {
      for (int j = 0; j < n1; ++j) {
        std::fill(div, div + D * d, 0.0);
        const size_t at = (static_cast<size_t>(j) + static_cast<size_t>(n1) * k) * D * dd;
        if (n0 > 1) {
          const double* a = Jp + at;
          const double* b = Jm + at;
          for (int A = 0; A < D; ++A)
            for (int c = 0; c < d; ++c)
              div[A * d + c] += (a[A * dd + c * d + 0] - b[A * dd + c * d + 0]) * inv2h0;
        }
        if (n1 > 1) {
          const size_t jp = (static_cast<size_t>((j + 1) % n1) + static_cast<size_t>(n1) * k) * D * dd;
          const size_t jm = (static_cast<size_t>((j - 1 + n1) % n1) + static_cast<size_t>(n1) * k) * D * dd;
          const double* a = Jc + jp;
          const double* b = Jc + jm;
          for (int A = 0; A < D; ++A)
            for (int c = 0; c < d; ++c)
              div[A * d + c] += (a[A * dd + c * d + 1] - b[A * dd + c * d + 1]) * inv2h1;
        }
        if (n2 > 1) {
          const size_t kp = (static_cast<size_t>(j) + static_cast<size_t>(n1) * ((k + 1) % n2)) * D * dd;
          const size_t km = (static_cast<size_t>(j) + static_cast<size_t>(n1) * ((k - 1 + n2) % n2)) * D * dd;
          const double* a = Jc + kp;
          const double* b = Jc + km;
          for (int A = 0; A < D; ++A)
            for (int c = 0; c < d; ++c)
              div[A * d + c] += (a[A * dd + c * d + 2] - b[A * dd + c * d + 2]) * inv2h2;
        }
        for (int t = 0; t < D * d; ++t) worst = std::max(worst, std::abs(div[t]));
      }
    }
    if (n0 > 1 && i + 1 < n0) {
      double* recycled = Jm;
      Jm = Jc;
      Jc = Jp;
      Jp = recycled;
      fill_slab((i + 2) % n0, Jp);
    }
  }
  return worst;
}

}  // namespace polyrelax
