#pragma once

#include "polyrelax/minors.hpp"

#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace polyrelax {

// Energy potential on the flat minors vector (length D).  Implementations
// must be safely callable from concurrent workers.
class Potential {
 public:
  virtual ~Potential() = default;
  virtual int dim() const = 0;  // spatial dimension d
  virtual double value(const Vec& xi) const = 0;
  virtual Vec grad(const Vec& xi) const = 0;
  virtual Mat hess(const Vec& xi) const = 0;
  int size() const { return minors_size(dim()); }
};

using PotentialPtr = std::shared_ptr<const Potential>;

// 1/2 c |xi - xi0|^2.
class QuadraticPotential final : public Potential {
 public:
  QuadraticPotential(double coef, Vec xi0, int d);
  int dim() const override { return d_; }
  double value(const Vec& xi) const override;
  Vec grad(const Vec& xi) const override;
  Mat hess(const Vec& xi) const override;
  double coef() const { return coef_; }
  const Vec& xi0() const { return xi0_; }

 private:
  double coef_;
  Vec xi0_;
  int d_;
};

// 1/2 a |F|^2 + 1/2 b |Z|^2 + c (w-1)^2 + h cosh(w-1); the cosh term keeps
// the w-curvature strictly positive and smooth on the whole line.
class PolyquadEnergy final : public Potential {
 public:
  PolyquadEnergy(double a, double b, double c, double h, int d);
  int dim() const override { return d_; }
  double value(const Vec& xi) const override;
  Vec grad(const Vec& xi) const override;
  Mat hess(const Vec& xi) const override;

 private:
  double a_, b_, c_, h_;
  int d_;
};

// Linear combination sum_k coef_k * P_k.
class SumPotential final : public Potential {
 public:
  explicit SumPotential(std::vector<std::pair<double, PotentialPtr>> terms);
  int dim() const override;
  double value(const Vec& xi) const override;
  Vec grad(const Vec& xi) const override;
  Mat hess(const Vec& xi) const override;

 private:
  std::vector<std::pair<double, PotentialPtr>> terms_;
};

// Potential depending on the determinant slot only: value s(w); gradient and
// Hessian live in the w-slot.  Scalar callables must be smooth on w > 0.
class WOnlyPotential final : public Potential {
 public:
  WOnlyPotential(std::function<double(double)> s, std::function<double(double)> ds,
                 std::function<double(double)> d2s, int d);
  int dim() const override { return d_; }
  double value(const Vec& xi) const override;
  Vec grad(const Vec& xi) const override;
  Mat hess(const Vec& xi) const override;
  double scalar_value(double w) const { return s_(w); }
  double scalar_d1(double w) const { return ds_(w); }
  double scalar_d2(double w) const { return d2s_(w); }

 private:
  std::function<double(double)> s_, ds_, d2s_;
  int d_;
};

}  // namespace polyrelax
