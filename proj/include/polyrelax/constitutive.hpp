#pragma once

#include "polyrelax/potential.hpp"
#include "polyrelax/pressure.hpp"
#include "polyrelax/sampling.hpp"

#include <map>
#include <optional>
#include <string>

namespace polyrelax {

// Constitutive model: internal and equilibrium energies on minors space, the
// difference Sigma = sigma_I - sigma_E, declared hypothesis constants, and
// the box on which the certificates are claimed.
struct ConstitutiveModel {
  int dim = 3;
  std::string family = "custom";
  PotentialPtr sigma_I;
  PotentialPtr sigma_E;
  PotentialPtr Sigma;  // sigma_I - sigma_E
  double gamma_I = 0.0;  // declared: hess(sigma_I) >= gamma_I I on box
  double gamma_v = 0.0;  // declared: hess(Sigma)  <= gamma_v I on box
  double M = 0.0;        // declared: |hess sigma_E|, |third sigma_E| <= M on box
  bool w_only = false;   // potentials depend on the determinant slot only
  Vec xi0;               // reference point in minors space
  Box box;               // declared sample box

  int D() const { return minors_size(dim); }
};

ConstitutiveModel make_model(int dim, std::string family, PotentialPtr sigma_I,
                             PotentialPtr sigma_E, double gamma_I, double gamma_v,
                             double M, Vec xi0, Box box, bool w_only = false);

// Parameters for the built-in families.  Scalar entries are family-specific:
//   quadratic:      gamma_E, gamma_v
//   polyquad:       a, b, c, h_coef, gamma_v
//   gas-lagrangean: kappa, gamma, a, beta, rho_lo, rho_hi
struct ModelParams {
  int dim = 3;
  std::map<std::string, double> value;
  std::string xi0 = "identity";  // "identity" | "zero"
  std::optional<double> box_halfwidth;

  double get(const std::string& key, double fallback) const;
  double require(const std::string& key) const;
};

ConstitutiveModel builtin_model(const std::string& name, const ModelParams& params);

// Pressure law backing the gas-lagrangean family (shared with the Eulerian
// model): p_E = kappa rho^gamma, p_I = p_E + a rho^beta.
PressureLaw gas_equilibrium_pressure(double kappa, double gamma);
PressureLaw gas_instantaneous_pressure(double kappa, double gamma, double a, double beta);

// Damped Newton solve of grad(pot)(x) = p with Armijo backtracking on the
// residual norm.  With active_index >= 0 the solve is restricted to that slot
// (w-only potentials); the remaining components of p must then vanish.
struct NewtonOptions {
  double tol = 1e-11;
  int max_iter = 100;
  int active_index = -1;
  double active_lower = -1e300;  // domain guard for the active slot
};
Vec newton_invert_gradient(const Potential& pot, const Vec& p, const Vec& guess,
                           const NewtonOptions& opts = {});

// Hypothesis checks by sampling.  For w-only models the Hessian eigenvalues
// are taken on the w-slot ("subspace" field says which).
struct H0Report {
  Box box;
  double min_eig_Sigma = 0.0;
  int inversions_ok = 0;
  int inversions_failed = 0;
  double max_roundtrip_residual = 0.0;
  std::string subspace;
};
H0Report check_h0(const ConstitutiveModel& model, const Box& sample_box, int n_samples,
                  uint64_t seed = 20240817);

struct H1Report {
  double gamma_I_est = 0.0;   // min over samples of lambda_min(hess sigma_I)
  double gamma_v_est = 0.0;   // max over samples of lambda_max(hess Sigma)
  double min_eig_sigma_E = 0.0;
  bool pass = false;
  std::string subspace;
};
H1Report check_h1(const ConstitutiveModel& model, int n_samples, uint64_t seed = 20240817);

struct H2Report {
  double M_est = 0.0;
  double hess_norm_max = 0.0;
  double third_fd_max = 0.0;
};
H2Report check_h2(const ConstitutiveModel& model, int n_samples, uint64_t seed = 20240817);

}  // namespace polyrelax
