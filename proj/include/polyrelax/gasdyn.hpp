#pragma once

#include <string>
#include <vector>

#include "polyrelax/dynamics.hpp"
#include "polyrelax/pressure.hpp"

namespace polyrelax {

// Pressure-relaxation model for isentropic gas dynamics in Eulerian
// coordinates,
//   d_t rho       + d_x m                          = 0
//   d_t m         + d_x (m^2/rho + p_I(rho) - tau) = 0
//   d_t (rho tau) + d_x (m tau) = -(1/eps) rho (tau - P(rho)),
// with P = p_I - p_E the pressure gap and the relaxation entropy
//   H(rho, m, tau) = m^2/(2 rho) + rho e_I(rho) + tau + rho G(tau),
//   G(tau) = -int_1^tau ds / P^{-1}(s), so G'(tau) = -1/P^{-1}(tau).
struct GasModel {
  std::string family = "default";
  PressureLaw p_I;
  PressureLaw p_E;
  PressureLaw P;  // p_I - p_E; strictly increasing on the box under (a1)
  double rho_lo = 0.5;  // certified density box
  double rho_hi = 2.0;
  double rho_min = 1e-3;  // vacuum guard for the solver
  // Builder parameters, kept so the Lagrangean twin model can be rebuilt.
  double kappa = 0.0, gamma = 0.0, a = 0.0, beta = 0.0, b = 0.0;

  // P^{-1}; closed form for single-monomial P, damped Newton otherwise.
  double P_inv(double tau) const;
  double G(double tau) const;    // closed form or adaptive Simpson; G(1) = 0
  double dG(double tau) const;   // -1/P_inv(tau)
  double d2G(double tau) const;  // 1/(P_inv(tau)^2 P'(P_inv(tau)))
  double e_I(double rho) const { return p_I.internal_energy(rho); }
  double e_E(double rho) const { return p_E.internal_energy(rho); }
};

// Built-in families on rho in [rho_lo, rho_hi]:
//   "default":  p_E = kappa rho^gamma, p_I = p_E + a rho^beta
//   "two-term": p_E = kappa rho^gamma, p_I = p_E + a rho^beta + b rho^(beta+2)
// ("two-term" exercises the generic inversion/quadrature path for P).
// Throws ConfigError when the box is invalid or the parameters violate
// positivity (a0) or monotonicity of P (a1) on the box.
struct GasParams {
  double kappa = 1.0;
  double gamma = 2.0;
  double a = 1.0;
  double beta = 1.0;
  double b = 0.1;  // "two-term" only
  double rho_lo = 0.5;
  double rho_hi = 2.0;
  double rho_min = 1e-3;
};
GasModel builtin_gas(const std::string& name, const GasParams& params = {});

// Sampled certificates on the density box.  a2 is the literal all-pairs
// inequality p_I'(rho) rho^2 >= P'(rbar) rbar^2 (convexity of the Lagrangean
// entropy Psi(w, tau) in both arguments); its diagonal rho = rbar reduces to
// p_E' >= 0 and is reported separately.  The rhoE margins certify the 2x2
// Hessian of the Eulerian rho E(rho, tau): leading entry (rho e_I)'' and
// determinant (rho e_I)'' rho G''(tau) - G'(tau)^2, with tau sampled on the
// equilibrium image [P(rho_lo), P(rho_hi)].
struct GasConditionReport {
  int n_samples = 0;
  double a0_margin = 0.0;
  double a1_margin = 0.0;
  double a2_pair_margin = 0.0;
  double a2_diag_margin = 0.0;
  double a3_pair_margin = 0.0;
  double rhoE_lead_margin = 0.0;
  double rhoE_det_margin = 0.0;
  bool a0_pass = false;
  bool a1_pass = false;
  bool a2_pair_pass = false;
  bool a2_diag_pass = false;
  bool a3_pass = false;
  bool rhoE_pass = false;
  bool pass = false;  // all of the above, a2 in its literal all-pairs form
};
GasConditionReport check_a_conditions(const GasModel& gas, int n_samples,
                                      uint64_t seed = 20240817);

// H(rho, m, tau) = m^2/(2 rho) + rho e_I(rho) + tau + rho G(tau).
double entropy_H(const GasModel& gas, double rho, double m, double tau);
// Hessian of H in the (rho, m, tau) ordering; positive definite iff (a3).
Mat entropy_H_hessian(const GasModel& gas, double rho, double m, double tau);
// rho (tau - P(rho)) (1/rho - 1/P^{-1}(tau)): the relaxation entropy
// production, nonnegative exactly when P is increasing.
double gas_dissipation(const GasModel& gas, double rho, double tau);

// Periodic 1D cell data for the Eulerian solver.
struct EulerState {
  SlabGrid grid;
  double t = 0.0;
  Vec rho, m, tau;
  int cells() const { return static_cast<int>(rho.size()); }
  double u(int j) const { return m[j] / rho[j]; }
};

// rho = 1 + rho_amp cos(2 pi k x), u = vel_amp sin(2 pi k x),
// tau = P(rho) + tau_amp cos(2 pi k x).
EulerState gas_init(const SlabGrid& grid, const GasModel& gas, double rho_amp,
                    double vel_amp, int wavenumber = 1, double tau_amp = 0.0);

double gas_wave_speed(const GasModel& gas, const EulerState& state);  // max |u|+sqrt(p_I')
double total_gas_entropy(const GasModel& gas, const EulerState& state);  // dx-weighted H

struct GasStepOptions {
  double cfl = 0.4;
  double wave_speed_hint = 0.0;    // > 0: reuse a precomputed gas_wave_speed
  bool track_dissipation = false;  // accumulate the exact source entropy drop
};
struct GasStepReport {
  double wave_speed = 0.0;
  double dissipation_integral = 0.0;  // ∫ (1/eps) rho(...)(...) dx dt, exact
};

// Strang split: exact exponential relaxation of tau toward P(rho) with rho
// frozen, around an LLF/SSP-RK2 step for the conservative triple
// (rho, m, rho tau).  eps = 0 projects tau onto P(rho); eps = inf switches
// the source off.  Aborts when any cell density falls below rho_min.
EulerState step_euler_relax(const EulerState& state, const GasModel& gas, double dt,
                            double eps, const GasStepOptions& opts = {},
                            GasStepReport* report = nullptr);

struct GasRunOptions {
  double t_end = 0.2;
  double eps = 0.1;
  double cfl = 0.4;
  int snapshot_stride = 0;  // in steps; 0 disables stride snapshots
  std::vector<double> target_times;  // exact landing times (also snapshotted)
  bool h_monitor = true;
};
struct GasRecord {
  double t = 0.0;
  double total_H = 0.0;
  double dissipation_cum = 0.0;
};
struct GasTrajectory {
  std::vector<EulerState> snapshots;
  std::vector<GasRecord> records;
  int steps = 0;
  double h_violation_max = 0.0;  // positive increments of H + ∫ dissipation
  double h_violation_total = 0.0;
};
GasTrajectory run_euler_relax(const EulerState& init, const GasModel& gas,
                              const GasRunOptions& opts);

// Runs the slab solver with the matching Lagrangean gas model and the
// Eulerian solver from the same data (rho0 = 1, a velocity pulse), maps the
// slab run to Eulerian coordinates via rho = 1/det F together with particle
// transport dy/dt = v1, and reports the L1 density gap at t_end.  The Abel
// residual is the L1 norm of d/dt det F - d1(v . cof F e1) on the slab run,
// centered differences in time and space, maximised over sampled interior
// times.  Default family only.
struct CrossCheckOptions {
  int n_cells = 64;
  double t_end = 0.25;
  double eps = 0.1;
  double cfl = 0.4;
  double vel_amp = 0.05;
  int wavenumber = 1;
  double tau_amp = 0.0;  // initial offset of tau from P(1)
  bool muscl = false;    // slab-side reconstruction (raises the Abel order)
  double w_min = 0.1;
};
struct CrossCheckReport {
  int n_cells = 0;
  double l1_density_gap = 0.0;
  double abel_residual_l1 = 0.0;
  double map_min_slope = 0.0;  // min dy/dx of the transported points (> 0)
};
CrossCheckReport lagrangean_cross_check(const GasModel& gas,
                                        const CrossCheckOptions& opts);

// Refinement of the Eulerian model in eps against its own eps = 0 projection
// run: L1 density and velocity gaps, sup over the comparison times
// k t_end / n_compare, k = 1..n_compare.
struct GasEpsStudyOptions {
  int n_cells = 128;
  double t_end = 0.4;
  double cfl = 0.4;
  double rho_amp = 0.05;
  double vel_amp = 0.05;
  int wavenumber = 1;
  double tau_amp = 0.0;
  int n_compare = 4;
};
struct GasEpsRow {
  double eps = 0.0;
  double l1_rho_gap = 0.0;
  double l1_u_gap = 0.0;
};
struct GasEpsStudy {
  std::vector<GasEpsRow> rows;
  bool rho_monotone = false;
  bool u_monotone = false;
};
GasEpsStudy gas_eps_study(const GasModel& gas, const GasEpsStudyOptions& opts,
                          const std::vector<double>& eps_list);

}  // namespace polyrelax
