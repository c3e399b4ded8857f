#include "polyrelax/pressure.hpp"

#include <cmath>
#include <stdexcept>

namespace polyrelax {

namespace {

void require_positive(double x, const char* who) {
  if (!(x > 0.0)) throw std::domain_error(std::string(who) + ": argument must be positive");
}

}  // namespace

PressureLaw::PressureLaw(std::vector<Monomial> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw std::invalid_argument("PressureLaw: no terms");
}

double PressureLaw::p(double rho) const {
  require_positive(rho, "PressureLaw::p");
  double s = 0.0;
  for (const auto& t : terms_) s += t.coef * std::pow(rho, t.expnt);
  return s;
}

double PressureLaw::dp(double rho) const {
  require_positive(rho, "PressureLaw::dp");
  double s = 0.0;
  for (const auto& t : terms_) s += t.coef * t.expnt * std::pow(rho, t.expnt - 1.0);
  return s;
}

double PressureLaw::d2p(double rho) const {
  require_positive(rho, "PressureLaw::d2p");
  double s = 0.0;
  for (const auto& t : terms_)
    s += t.coef * t.expnt * (t.expnt - 1.0) * std::pow(rho, t.expnt - 2.0);
  return s;
}

double PressureLaw::internal_energy(double rho) const {
  require_positive(rho, "PressureLaw::internal_energy");
  // int_1^rho c s^(e-2) ds = c (rho^(e-1) - 1)/(e-1), with a log when e = 1.
  double s = 0.0;
  for (const auto& t : terms_) {
    if (std::abs(t.expnt - 1.0) < 1e-14)
      s += t.coef * std::log(rho);
    else
      s += t.coef * (std::pow(rho, t.expnt - 1.0) - 1.0) / (t.expnt - 1.0);
  }
  return s;
}

double PressureLaw::sigma(double w) const {
  require_positive(w, "PressureLaw::sigma");
  return internal_energy(1.0 / w);
}

double PressureLaw::dsigma(double w) const {
  require_positive(w, "PressureLaw::dsigma");
  return -p(1.0 / w);
}

double PressureLaw::d2sigma(double w) const {
  require_positive(w, "PressureLaw::d2sigma");
  return dp(1.0 / w) / (w * w);
}

PressureLaw PressureLaw::difference(const PressureLaw& a, const PressureLaw& b) {
  std::vector<Monomial> t = a.terms_;
  for (const auto& m : b.terms_) t.push_back({-m.coef, m.expnt});
  // Merge equal exponents so single-monomial structure survives p_I - p_E.
  std::vector<Monomial> merged;
  for (const auto& m : t) {
    bool found = false;
    for (auto& o : merged) {
      if (std::abs(o.expnt - m.expnt) < 1e-14) {
        o.coef += m.coef;
        found = true;
        break;
      }
    }
    if (!found) merged.push_back(m);
  }
  std::erase_if(merged, [](const Monomial& m) { return m.coef == 0.0; });
  if (merged.empty()) merged.push_back({0.0, 0.0});
  return PressureLaw(merged);
}

}  // namespace polyrelax
