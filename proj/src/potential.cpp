#include "polyrelax/potential.hpp"

#include <cmath>
#include <stdexcept>

namespace polyrelax {

namespace {

void require_size(const Vec& xi, int d, const char* who) {
  if (xi.size() != minors_size(d))
    throw std::invalid_argument(std::string(who) + ": flat vector has wrong length");
}

}  // namespace

QuadraticPotential::QuadraticPotential(double coef, Vec xi0, int d)
    : coef_(coef), xi0_(std::move(xi0)), d_(d) {
  if (d_ != 2 && d_ != 3) throw std::invalid_argument("QuadraticPotential: dim must be 2 or 3");
  if (xi0_.size() != minors_size(d_))
    throw std::invalid_argument("QuadraticPotential: xi0 has wrong length");
}

double QuadraticPotential::value(const Vec& xi) const {
  require_size(xi, d_, "QuadraticPotential");
  return 0.5 * coef_ * (xi - xi0_).squaredNorm();
}

Vec QuadraticPotential::grad(const Vec& xi) const {
  require_size(xi, d_, "QuadraticPotential");
  return coef_ * (xi - xi0_);
}

Mat QuadraticPotential::hess(const Vec& xi) const {
  require_size(xi, d_, "QuadraticPotential");
  return coef_ * Mat::Identity(xi.size(), xi.size());
}

PolyquadEnergy::PolyquadEnergy(double a, double b, double c, double h, int d)
    : a_(a), b_(b), c_(c), h_(h), d_(d) {
  if (d_ != 2 && d_ != 3) throw std::invalid_argument("PolyquadEnergy: dim must be 2 or 3");
  if (a <= 0 || c <= 0 || h < 0 || (d == 3 && b <= 0))
    throw std::invalid_argument("PolyquadEnergy: coefficients must keep the energy convex");
}

double PolyquadEnergy::value(const Vec& xi) const {
  require_size(xi, d_, "PolyquadEnergy");
  double s = 0.0;
  for (int i = 0; i < d_ * d_; ++i) s += 0.5 * a_ * xi[i] * xi[i];
  if (d_ == 3)
    for (int i = 9; i < 18; ++i) s += 0.5 * b_ * xi[i] * xi[i];
  const double w = xi[w_index(d_)];
  return s + c_ * (w - 1.0) * (w - 1.0) + h_ * std::cosh(w - 1.0);
}

Vec PolyquadEnergy::grad(const Vec& xi) const {
  require_size(xi, d_, "PolyquadEnergy");
  Vec g(xi.size());
  for (int i = 0; i < d_ * d_; ++i) g[i] = a_ * xi[i];
  if (d_ == 3)
    for (int i = 9; i < 18; ++i) g[i] = b_ * xi[i];
  const double w = xi[w_index(d_)];
  g[w_index(d_)] = 2.0 * c_ * (w - 1.0) + h_ * std::sinh(w - 1.0);
  return g;
}

Mat PolyquadEnergy::hess(const Vec& xi) const {
  require_size(xi, d_, "PolyquadEnergy");
  Mat H = Mat::Zero(xi.size(), xi.size());
  for (int i = 0; i < d_ * d_; ++i) H(i, i) = a_;
  if (d_ == 3)
    for (int i = 9; i < 18; ++i) H(i, i) = b_;
  const double w = xi[w_index(d_)];
  H(w_index(d_), w_index(d_)) = 2.0 * c_ + h_ * std::cosh(w - 1.0);
  return H;
}

SumPotential::SumPotential(std::vector<std::pair<double, PotentialPtr>> terms)
    : terms_(std::move(terms)) {
  if (terms_.empty()) throw std::invalid_argument("SumPotential: no terms");
  for (const auto& [c, p] : terms_) {
    if (!p) throw std::invalid_argument("SumPotential: null term");
    if (p->dim() != terms_.front().second->dim())
      throw std::invalid_argument("SumPotential: mixed dimensions");
  }
}

int SumPotential::dim() const { return terms_.front().second->dim(); }

double SumPotential::value(const Vec& xi) const {
  double s = 0.0;
  for (const auto& [c, p] : terms_) s += c * p->value(xi);
  return s;
}

Vec SumPotential::grad(const Vec& xi) const {
  Vec g = Vec::Zero(xi.size());
  for (const auto& [c, p] : terms_) g += c * p->grad(xi);
  return g;
}

Mat SumPotential::hess(const Vec& xi) const {
  Mat H = Mat::Zero(xi.size(), xi.size());
  for (const auto& [c, p] : terms_) H += c * p->hess(xi);
  return H;
}

WOnlyPotential::WOnlyPotential(std::function<double(double)> s, std::function<double(double)> ds,
                               std::function<double(double)> d2s, int d)
    : s_(std::move(s)), ds_(std::move(ds)), d2s_(std::move(d2s)), d_(d) {
  if (d_ != 2 && d_ != 3) throw std::invalid_argument("WOnlyPotential: dim must be 2 or 3");
  if (!s_ || !ds_ || !d2s_) throw std::invalid_argument("WOnlyPotential: missing callables");
}

double WOnlyPotential::value(const Vec& xi) const {
  require_size(xi, d_, "WOnlyPotential");
  return s_(xi[w_index(d_)]);
}

Vec WOnlyPotential::grad(const Vec& xi) const {
  require_size(xi, d_, "WOnlyPotential");
  Vec g = Vec::Zero(xi.size());
  g[w_index(d_)] = ds_(xi[w_index(d_)]);
  return g;
}

Mat WOnlyPotential::hess(const Vec& xi) const {
  require_size(xi, d_, "WOnlyPotential");
  Mat H = Mat::Zero(xi.size(), xi.size());
  H(w_index(d_), w_index(d_)) = d2s_(xi[w_index(d_)]);
  return H;
}

}  // namespace polyrelax
