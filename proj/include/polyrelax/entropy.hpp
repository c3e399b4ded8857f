#pragma once

#include "polyrelax/constitutive.hpp"

namespace polyrelax {

// Entropy Psi(Xi, tau) = sigma_I(Xi) + Xi . tau + G(tau), with G the Legendre
// conjugate of Sigma composed with a sign flip: grad G(tau) = -(grad Sigma)^{-1}(-tau).
// G is evaluated implicitly through Newton inversion; immutable after build.
// Callers that evaluate along trajectories pass a Cursor to warm-start the
// Newton iteration; results do not depend on the cursor.
class EntropyStructure {
 public:
  struct Cursor {
    Vec xi;
    bool valid = false;
  };

  const ConstitutiveModel& model() const { return model_; }
  const Box& tau_box() const { return tau_box_; }
  double normalization() const { return normalization_; }
  const Vec& anchor() const { return anchor_; }

  // (grad Sigma)^{-1}(p) with the module's Newton settings.
  Vec invert(const Vec& p, Cursor* cursor = nullptr) const;

  Vec G_grad(const Vec& tau, Cursor* cursor = nullptr) const;
  double G_value(const Vec& tau, Cursor* cursor = nullptr) const;
  Mat G_hess(const Vec& tau, Cursor* cursor = nullptr) const;

  double psi(const Vec& xi, const Vec& tau, Cursor* cursor = nullptr) const;

  // D = (Xi + grad G(tau)) . (tau + grad Sigma(Xi)) >= |tau + grad Sigma|^2 / gamma_v.
  double dissipation(const Vec& xi, const Vec& tau, Cursor* cursor = nullptr) const;

  // lambda_min of [[hess sigma_I, I], [I, hess G]] (2x2 on (w, tau_w) for
  // w-only models).
  double hessian_psi_min_eig(const Vec& xi, const Vec& tau, Cursor* cursor = nullptr) const;

  friend EntropyStructure build_G(const ConstitutiveModel& model, const Box& tau_box,
                                  const Vec& anchor);

 private:
  ConstitutiveModel model_;
  Box tau_box_;
  Vec anchor_;
  double normalization_ = 0.0;
  NewtonOptions newton_;
};

// Spec'd Newton settings: residual 1e-11, <= 100 iterations, damped.
Vec invert_grad_sigma(const ConstitutiveModel& model, const Vec& p);

EntropyStructure build_G(const ConstitutiveModel& model, const Box& tau_box, const Vec& anchor);

// Bounding box of -grad Sigma over the model box (padded), the natural tau
// domain for the built-in families.
Box default_tau_box(const ConstitutiveModel& model, int n_samples = 512,
                    uint64_t seed = 20240817);

// lambda_min of [[gamma_I, 1], [1, 1/gamma_v]]: the guaranteed convexity
// constant delta of the Psi-Hessian under (h1).
double delta_estimate(double gamma_I, double gamma_v);

struct CharReport {
  int n_samples = 0;
  double zero_set_xi_max = 0.0;   // max |Xi + grad G(-grad Sigma(Xi))|
  double zero_set_tau_max = 0.0;  // max |tau + grad Sigma(-grad G(tau))|
  double min_eig_G = 0.0;
  double min_eig_Sigma = 0.0;
  double convexity_gap_min = 0.0;  // min of lambda_min(G_hess) - 1/lambda_max(Sigma_hess)
  double ineq2_min = 0.0;          // min over pairs of the dissipation product
  double monotone_min = 0.0;       // min over pairs of (X1-X2).(grad S(X1)-grad S(X2))
  bool pass = false;
};
CharReport check_char(const EntropyStructure& structure, int n_samples,
                      uint64_t seed = 20240817);

}  // namespace polyrelax
