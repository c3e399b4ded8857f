#include "polyrelax/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace polyrelax {

bool Box::contains(const Vec& x, double slack) const {
  if (x.size() != lo.size()) return false;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
  return true;
}

Box Box::centered(const Vec& c, double h) {
  if (h <= 0.0) throw std::invalid_argument("Box::centered: halfwidth must be positive");
  Box b;
  b.lo = c.array() - h;
  b.hi = c.array() + h;
  return b;
}

std::vector<Vec> latin_hypercube(const Box& box, int n, Rng& rng) {
  if (n <= 0) throw std::invalid_argument("latin_hypercube: need n > 0");
  const int d = box.dim();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // One permutation of strata per axis.
  std::vector<std::vector<int>> perm(d, std::vector<int>(n));
  for (int a = 0; a < d; ++a) {
    std::iota(perm[a].begin(), perm[a].end(), 0);
    std::shuffle(perm[a].begin(), perm[a].end(), rng);
  }
  std::vector<Vec> out(n, Vec(d));
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < d; ++a) {
      const double t = (perm[a][s] + unit(rng)) / n;
      out[s][a] = box.lo[a] + t * (box.hi[a] - box.lo[a]);
    }
  }
  return out;
}

std::vector<Vec> uniform_box(const Box& box, int n, Rng& rng) {
  if (n <= 0) throw std::invalid_argument("uniform_box: need n > 0");
  const int d = box.dim();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec> out(n, Vec(d));
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < d; ++a)
      out[s][a] = box.lo[a] + unit(rng) * (box.hi[a] - box.lo[a]);
  return out;
}

Vec central_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x, xm = x;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

Mat central_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
  Vec xp = x, xm = x;
  Mat J;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    const Vec col = (f(xp) - f(xm)) / (2.0 * h);
    if (J.size() == 0) J = Mat(col.size(), x.size());
    J.col(i) = col;
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return J;
}

double third_directional(const std::function<double(const Vec&)>& f, const Vec& x,
                         const Vec& u, double h) {
  // f''' (t=0) ~ (-f(-2h) + 2 f(-h) - 2 f(h) + f(2h)) / (2 h^3), sign flipped.
  const auto g = [&](double t) { return f(x + t * u); };
  return (g(2 * h) - 2 * g(h) + 2 * g(-h) - g(-2 * h)) / (2 * h * h * h);
}

SlopeFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_fit: need at least two points");
  const int n = static_cast<int>(x.size());
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0)
      throw std::invalid_argument("loglog_fit: data must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  SlopeFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
      ss += r * r;
    }
    fit.half_width = 2.0 * std::sqrt(ss / (n - 2) / sxx);
  }
  return fit;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  return loglog_fit(x, y).slope;
}

}  // namespace polyrelax
