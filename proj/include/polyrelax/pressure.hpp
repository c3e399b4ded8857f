#pragma once

#include <vector>

namespace polyrelax {

// Pressure law p(rho) = sum_k coef_k rho^expnt_k on rho > 0, with the
// internal energy anchored at rho = 1: e(rho) = int_1^rho p(s)/s^2 ds.
struct Monomial {
  double coef = 0.0;
  double expnt = 0.0;
};

class PressureLaw {
 public:
  PressureLaw() = default;
  explicit PressureLaw(std::vector<Monomial> terms);

  double p(double rho) const;
  double dp(double rho) const;
  double d2p(double rho) const;
  double internal_energy(double rho) const;  // e(rho), e(1) = 0

  // Lagrangean forms with w = 1/rho: sigma(w) = e(1/w) = -int_1^w p(1/s) ds.
  double sigma(double w) const;
  double dsigma(double w) const;   // -p(1/w)
  double d2sigma(double w) const;  // p'(1/w)/w^2

  const std::vector<Monomial>& terms() const { return terms_; }
  bool single_monomial() const { return terms_.size() == 1; }

  static PressureLaw difference(const PressureLaw& a, const PressureLaw& b);

 private:
  std::vector<Monomial> terms_;
};

}  // namespace polyrelax
