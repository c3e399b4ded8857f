#pragma once

#include <vector>

#include "polyrelax/dynamics.hpp"
#include "polyrelax/sampling.hpp"

namespace polyrelax {

// dx-weighted sum of a per-cell field. Ordered left-to-right summation by
// default (bit-reproducible); pairwise recursion behind the flag.
double weighted_total(const Vec& field, double dx, bool pairwise = false);

// Slab derivatives d/dx1 of the comparison solution: dv (d x N) and
// dxi = d/dx1 Phi(F-hat) (D x N), by centered differences.
struct HatGradients {
  Mat dv;
  Mat dxi;
};
HatGradients hat_gradients(const EquilState& hat);
// Centered differences on the fine grid, then cell-averaged onto the coarse
// grid (factor cells per coarse cell): keeps the error terms free of
// coarse-grid differentiation noise.
HatGradients hat_gradients_restricted(const EquilState& fine, int factor);

// Cell-average restriction of a fine equilibrium state onto a grid coarser
// by `factor`.
EquilState restrict_state(const EquilState& fine, int factor);

// The four signed per-cell error terms of the relative-entropy identity
// (slab: only alpha = 1 contributes to the d/dx_alpha contractions).
struct ErrorTermFields {
  Vec Q1, Q2, Q3, L;
};
ErrorTermFields error_terms(const ConstitutiveModel& model, const RelaxState& state,
                            const EquilState& hat, const HatGradients* hg = nullptr);

struct RelEntropyReport {
  Vec e_r_field;               // per-cell relative entropy
  double total_e_r = 0.0;      // dx-weighted sum
  Vec flux_field;              // f_1 per cell
  double Q1_L1 = 0.0, Q2_L1 = 0.0, Q3_L1 = 0.0, L_L1 = 0.0;
  double dissipation_total = 0.0;  // dx-weighted sum of D(Phi(F), tau)
  double balance_residual = 0.0;   // filled by relen_balance_residual
};

// e_r = 1/2|v - v_hat|^2 + Psi(Phi(F), tau)
//       - sigma_E(Phi(F_hat)) - grad sigma_E(Phi(F_hat)) . (Phi(F) - Phi(F_hat)),
// f_1  = (T^A - d sigma_E/d Xi^A(Phi(F_hat))) (v_i - v_hat_i) dPhi^A/dF_{i1}(F).
RelEntropyReport relative_entropy(const EntropyStructure& structure,
                                  const RelaxState& state, const EquilState& hat,
                                  const HatGradients* hg = nullptr);

// Space-integrated residual of
//   d/dt e_r - d/dx1 f_1 + (1/eps) D = Q1 + Q2 + Q3 + L
// with centered time differencing across stored snapshots (>= 3 required);
// the flux term integrates to zero over the periodic slab. Returns the
// largest |residual| over interior snapshot times.
double relen_balance_residual(const EntropyStructure& structure,
                              const std::vector<RelaxState>& states,
                              const std::vector<EquilState>& hats, double eps);

// Diffusion tensor of the formal second-order expansion in eps:
// K[(i,alpha),(j,beta)] = d2(sigma_I - sigma_E)/dXi^A dXi^B
//                         * dPhi^A/dF_{i alpha} * dPhi^B/dF_{j beta},
// returned as the symmetric d^2 x d^2 matrix with row index i*d + alpha.
Mat chapman_enskog_tensor(const ConstitutiveModel& model, const Mat& F);
// Smallest eigenvalue of a symmetric matrix (ellipticity check).
double ellipticity_min_eig(const Mat& K);

struct EquilRelEntropyReport {
  Vec eta_field;
  double total_eta = 0.0;
  Vec flux_field;              // q_1 per cell
  Vec Q_field;                 // signed three-term quadratic error
  double Q_total = 0.0;
  double Q_L1 = 0.0;
  double balance_residual = 0.0;
};

// Relative entropy between two equilibrium solutions:
// eta = 1/2|v - v_hat|^2 + sigma_E(Xi) - sigma_E(Xi_hat)
//       - grad sigma_E(Xi_hat) . (Xi - Xi_hat),  Xi = Phi(F).
EquilRelEntropyReport equilibrium_relative_entropy(const ConstitutiveModel& model,
                                                   const EquilState& state,
                                                   const EquilState& hat,
                                                   const HatGradients* hg = nullptr);

// Residual of d/dt eta - d/dx1 q_1 = Q over snapshots, as above.
double equil_balance_residual(const ConstitutiveModel& model,
                              const std::vector<EquilState>& states,
                              const std::vector<EquilState>& hats);

struct StudyOptions {
  int n_cells = 128;
  int refine_factor = 4;  // reference grid refinement
  double t_end = 0.1;
  double cfl = 0.4;
  bool muscl = true;
  int n_compare = 10;     // comparison times k*t_end/n_compare, k = 1..n_compare
  double w_min = 0.1;
  double floor_safety = 3.0;  // rows with sup e_r <= safety*floor are excluded
};

struct ConvergenceRow {
  double eps = 0.0;
  double sup_e_r = 0.0;       // sup over comparison times of total e_r
  double v_gap = 0.0;         // sup over comparison times of the L2 gaps
  double F_gap = 0.0;
  double tau_gap = 0.0;       // tau - tau_inf(F_hat)
  bool aborted = false;
  bool floor_limited = false;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double floor_estimate = 0.0;  // eps-free coarse/fine equilibrium gap
  SlopeFit fit;                 // log sup e_r vs log eps over usable rows
  bool slope_valid = false;
  std::vector<double> compare_times;
};

// The eps-convergence experiment: prepared relax runs on the coarse grid
// against a refined equilibrium reference restricted by cell averaging.
ConvergenceTable convergence_study(const ConstitutiveModel& model,
                                   const EntropyStructure& structure,
                                   const SlabMotion& motion, const StudyOptions& opt,
                                   const std::vector<double>& eps_list);

}  // namespace polyrelax
