#pragma once

#include <functional>
#include <vector>

#include "polyrelax/entropy.hpp"
#include "polyrelax/minors.hpp"

namespace polyrelax {

// Plane-wave (slab) geometry: all fields depend on x1 only, periodic in x1.
struct SlabGrid {
  int n_cells = 0;
  double x_min = 0.0;
  double x_max = 1.0;
  SlabGrid() = default;
  SlabGrid(int n, double a = 0.0, double b = 1.0);
  double dx() const { return (x_max - x_min) / n_cells; }
  double center(int j) const { return x_min + (j + 0.5) * dx(); }
  bool operator==(const SlabGrid& o) const {
    return n_cells == o.n_cells && x_min == o.x_min && x_max == o.x_max;
  }
};

// Deformation gradient columns alpha >= 2 are a shared constant background:
// the slab form of the involution (curl-free rows of F).
struct RelaxState {
  SlabGrid grid;
  int dim = 3;
  double t = 0.0;
  Mat v;     // d x N
  Mat f1;    // d x N: first column of F per cell
  Mat f_bg;  // d x (d-1): columns alpha >= 2
  Mat tau;   // D x N
  int cells() const { return static_cast<int>(v.cols()); }
  Mat deformation(int j) const;
};

struct EquilState {
  SlabGrid grid;
  int dim = 3;
  double t = 0.0;
  Mat v, f1, f_bg;
  int cells() const { return static_cast<int>(v.cols()); }
  Mat deformation(int j) const;
};

struct AugmentedState {
  SlabGrid grid;
  int dim = 3;
  double t = 0.0;
  Mat v, f1, f_bg;
  Mat xi;   // D x N: independent minors variable
  Mat tau;  // D x N
  int cells() const { return static_cast<int>(v.cols()); }
  Mat deformation(int j) const;
};

// Smooth periodic slab motion y(x) = A x + u(x1): F(x1) = A + u'(x1) e1^T.
struct SlabMotion {
  int dim = 3;
  Mat affine;
  std::function<Vec(double)> disp_grad;  // u'(x1)
  std::function<Vec(double)> velocity;   // v0(x1)
};

// u = amp sin(2 pi k x)(e0 + shear e1), v0 = vel_amp cos(2 pi k x)(e0 + shear e1).
SlabMotion sine_motion(int dim, double amp, int wavenumber, double vel_amp = 0.0,
                       double shear = 0.4);

RelaxState init_from_motion(const SlabGrid& grid, const SlabMotion& motion,
                            const ConstitutiveModel& model, bool prepare,
                            const Mat* tau0 = nullptr, double w_min = 0.1);
EquilState init_equilibrium(const SlabGrid& grid, const SlabMotion& motion,
                            const ConstitutiveModel& model, double w_min = 0.1);
AugmentedState init_augmented(const SlabGrid& grid, const SlabMotion& motion,
                              const ConstitutiveModel& model, bool prepare,
                              double w_min = 0.1);

// Flux column S_{i1} = sum_A (d sigma_I/d Xi^A(Phi(F)) + tau^A) dPhi^A/dF_{i1}.
Vec instantaneous_stress(const ConstitutiveModel& model, const Mat& F, const Vec& tau);
// Same with the equilibrium energy sigma_E and no internal variable.
Vec equilibrium_stress(const ConstitutiveModel& model, const Mat& F);
// Augmented system stress: T^A(xi, tau) dPhi^A/dF_{i1}(F).
Vec augmented_stress(const ConstitutiveModel& model, const Mat& F, const Vec& xi,
                     const Vec& tau);

// max over cells of sqrt(lambda_max(sym dS_{i1}/dF_{j1})), by central differences.
double max_wave_speed(const ConstitutiveModel& model, const RelaxState& state);
double max_wave_speed(const ConstitutiveModel& model, const EquilState& state);
double max_wave_speed(const ConstitutiveModel& model, const AugmentedState& state);

// Exact solution of d tau/dt = -(1/eps)(tau - tau_eq(xi)) over dt with xi
// frozen. eps = 0 is the projection limit (tau jumps to tau_eq); eps = inf
// switches the source off.
Vec relax_source_exact(const ConstitutiveModel& model, const Vec& xi, const Vec& tau,
                       double dt, double eps);

struct StepOptions {
  double cfl = 0.4;
  bool muscl = false;  // minmod-limited linear reconstruction
  double w_min = 0.1;
  bool track_dissipation = false;  // accumulate the exact source entropy drop
  double wave_speed_hint = 0.0;    // > 0: reuse a precomputed max_wave_speed
};

struct StepReport {
  double wave_speed = 0.0;
  double dissipation_integral = 0.0;  // ∫ (1/eps) D dx dt over the source sub-steps
};

RelaxState step_relax(const RelaxState& state, const ConstitutiveModel& model,
                      const EntropyStructure& structure, double dt, double eps,
                      const StepOptions& opts = {}, StepReport* report = nullptr);
EquilState step_equilibrium(const EquilState& state, const ConstitutiveModel& model,
                            double dt, const StepOptions& opts = {},
                            StepReport* report = nullptr);
AugmentedState step_augmented(const AugmentedState& state, const ConstitutiveModel& model,
                              const EntropyStructure& structure, double dt, double eps,
                              const StepOptions& opts = {}, StepReport* report = nullptr);

// Dx-weighted totals.
double total_entropy_relax(const EntropyStructure& structure, const RelaxState& state);
double total_energy_equil(const ConstitutiveModel& model, const EquilState& state);
Vec total_velocity(const Mat& v, double dx);
Vec total_f1(const Mat& f1, double dx);
double max_grad_f1(const Mat& f1, double dx);  // centered, periodic

struct RunOptions {
  double t_end = 0.1;
  double eps = 0.1;
  double cfl = 0.4;
  int snapshot_stride = 10;  // in steps; 0 disables stride snapshots
  bool muscl = false;
  double w_min = 0.1;
  double blowup_factor = 50.0;  // abort when max|d1 F| grows by this factor
  bool h_monitor = true;
  std::vector<double> target_times;  // exact landing times (also snapshotted)
};

struct DiagnosticsRecord {
  double t = 0.0;
  double total_entropy = 0.0;
  double dissipation_cum = 0.0;  // cumulative ∫(1/eps) D dx dt
  double max_grad_f = 0.0;
};

struct RelaxTrajectory {
  std::vector<RelaxState> snapshots;
  std::vector<DiagnosticsRecord> records;
  int steps = 0;
  double h_violation_max = 0.0;    // largest single-step increase of H + ∫D
  double h_violation_total = 0.0;  // summed positive increases
};

struct EquilTrajectory {
  std::vector<EquilState> snapshots;
  std::vector<DiagnosticsRecord> records;
  int steps = 0;
  double h_violation_max = 0.0;
  double h_violation_total = 0.0;
};

struct AugmentedTrajectory {
  std::vector<AugmentedState> snapshots;
  int steps = 0;
  double max_constraint_gap = 0.0;  // sup over time of max_j |xi_j - Phi(F_j)|_inf
};

RelaxTrajectory run_relax(const RelaxState& init, const ConstitutiveModel& model,
                          const EntropyStructure& structure, const RunOptions& opts);
EquilTrajectory run_equilibrium(const EquilState& init, const ConstitutiveModel& model,
                                const RunOptions& opts);
AugmentedTrajectory run_augmented(const AugmentedState& init, const ConstitutiveModel& model,
                                  const EntropyStructure& structure, const RunOptions& opts);

}  // namespace polyrelax
