#include "polyrelax/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "polyrelax/errors.hpp"

namespace polyrelax {

SlabGrid::SlabGrid(int n, double a, double b) : n_cells(n), x_min(a), x_max(b) {
  if (n < 8) throw ConfigError("slab grid needs at least 8 cells");
  if (!(b > a)) throw ConfigError("slab grid needs x_max > x_min");
}

namespace {

Mat assemble(const Mat& f1, const Mat& f_bg, int j) {
  const int d = static_cast<int>(f1.rows());
  Mat F(d, d);
  F.col(0) = f1.col(j);
  for (int a = 1; a < d; ++a) F.col(a) = f_bg.col(a - 1);
  return F;
}

void check_det_floor(const Mat& f1, const Mat& f_bg, double w_min, double t) {
  for (int j = 0; j < f1.cols(); ++j) {
    const double w = determinant(assemble(f1, f_bg, j));
    if (!(w > w_min)) {
      std::ostringstream msg;
      msg << "determinant floor breached: det F = " << w << " <= " << w_min
          << " at cell " << j << ", t = " << t;
      throw SolverAbort(msg.str());
    }
  }
}

double minmod(double a, double b) {
  if (a > 0.0 && b > 0.0) return std::min(a, b);
  if (a < 0.0 && b < 0.0) return std::max(a, b);
  return 0.0;
}

using FluxFn = std::function<Vec(const Vec&)>;

// One right-hand side of the semi-discrete FV scheme for the stacked cell
// data U (first n_adv rows conservative, trailing rows cell-local parameters
// that only feed the flux evaluation and receive no update).
Mat hyperbolic_rhs(const Mat& U, const FluxFn& flux, int n_adv, double lam, double dx,
                   bool muscl) {
  const int m = static_cast<int>(U.rows());
  const int N = static_cast<int>(U.cols());
  Mat hface(m, N);  // numerical flux at interface j+1/2
  if (muscl) {
    Mat slope(m, N);
    for (int j = 0; j < N; ++j) {
      const int jm = (j + N - 1) % N;
      const int jp = (j + 1) % N;
      for (int r = 0; r < m; ++r)
        slope(r, j) = minmod(U(r, j) - U(r, jm), U(r, jp) - U(r, j));
    }
    for (int j = 0; j < N; ++j) {
      const int jp = (j + 1) % N;
      const Vec ul = U.col(j) + 0.5 * slope.col(j);
      const Vec ur = U.col(jp) - 0.5 * slope.col(jp);
      Vec h = 0.5 * (flux(ul) + flux(ur));
      h.head(n_adv) -= 0.5 * lam * (ur.head(n_adv) - ul.head(n_adv));
      h.tail(m - n_adv).setZero();
      hface.col(j) = h;
    }
  } else {
    Mat hcell(m, N);
    for (int j = 0; j < N; ++j) hcell.col(j) = flux(U.col(j));
    for (int j = 0; j < N; ++j) {
      const int jp = (j + 1) % N;
      Vec h = 0.5 * (hcell.col(j) + hcell.col(jp));
      h.head(n_adv) -= 0.5 * lam * (U.col(jp).head(n_adv) - U.col(j).head(n_adv));
      h.tail(m - n_adv).setZero();
      hface.col(j) = h;
    }
  }
  Mat rhs = Mat::Zero(m, N);
  for (int j = 0; j < N; ++j) {
    const int jm = (j + N - 1) % N;
    rhs.col(j) = -(hface.col(j) - hface.col(jm)) / dx;
  }
  return rhs;
}

void ssp_rk2(Mat& U, const FluxFn& flux, int n_adv, double lam, double dx, double dt,
             bool muscl) {
  const Mat k1 = hyperbolic_rhs(U, flux, n_adv, lam, dx, muscl);
  const Mat U1 = U + dt * k1;
  const Mat k2 = hyperbolic_rhs(U1, flux, n_adv, lam, dx, muscl);
  U = 0.5 * (U + U1 + dt * k2);
}

double fd_wave_speed(const std::function<Vec(const Mat&)>& stress, Mat F) {
  const int d = static_cast<int>(F.rows());
  const double h = 1e-6;
  Mat A(d, d);
  for (int j = 0; j < d; ++j) {
    const double orig = F(j, 0);
    F(j, 0) = orig + h;
    const Vec sp = stress(F);
    F(j, 0) = orig - h;
    const Vec sm = stress(F);
    F(j, 0) = orig;
    A.col(j) = (sp - sm) / (2.0 * h);
  }
  const Mat sym = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  const double lam = es.eigenvalues().maxCoeff();
  if (!std::isfinite(lam)) throw SolverAbort("non-finite wave speed");
  return std::sqrt(std::max(lam, 0.0));
}

void require_dims(const ConstitutiveModel& model, int dim) {
  if (model.dim != dim) throw ConfigError("model/state dimension mismatch");
}

double effective_cfl_bound(double cfl, double dx, double lam) {
  return cfl * dx / std::max(lam, 1e-300) * (1.0 + 1e-9);
}

}  // namespace

Mat RelaxState::deformation(int j) const { return assemble(f1, f_bg, j); }
Mat EquilState::deformation(int j) const { return assemble(f1, f_bg, j); }
Mat AugmentedState::deformation(int j) const { return assemble(f1, f_bg, j); }

SlabMotion sine_motion(int dim, double amp, int wavenumber, double vel_amp, double shear) {
  SlabMotion m;
  m.dim = dim;
  m.affine = Mat::Identity(dim, dim);
  Vec dir = Vec::Zero(dim);
  dir[0] = 1.0;
  if (dim > 1) dir[1] = shear;
  const double k = 2.0 * M_PI * wavenumber;
  m.disp_grad = [amp, k, dir](double x) -> Vec { return amp * k * std::cos(k * x) * dir; };
  m.velocity = [vel_amp, k, dir](double x) -> Vec { return vel_amp * std::cos(k * x) * dir; };
  return m;
}

namespace {

template <typename State>
void fill_kinematics(State& s, const SlabGrid& grid, const SlabMotion& motion,
                     double w_min) {
  const int d = motion.dim;
  if (motion.affine.rows() != d || motion.affine.cols() != d)
    throw ConfigError("motion affine part has wrong shape");
  s.grid = grid;
  s.dim = d;
  s.t = 0.0;
  const int N = grid.n_cells;
  s.v.resize(d, N);
  s.f1.resize(d, N);
  s.f_bg.resize(d, d - 1);
  for (int a = 1; a < d; ++a) s.f_bg.col(a - 1) = motion.affine.col(a);
  for (int j = 0; j < N; ++j) {
    const double x = grid.center(j);
    s.f1.col(j) = motion.affine.col(0) + motion.disp_grad(x);
    s.v.col(j) = motion.velocity(x);
  }
  check_det_floor(s.f1, s.f_bg, w_min, 0.0);
}

}  // namespace

RelaxState init_from_motion(const SlabGrid& grid, const SlabMotion& motion,
                            const ConstitutiveModel& model, bool prepare, const Mat* tau0,
                            double w_min) {
  require_dims(model, motion.dim);
  RelaxState s;
  fill_kinematics(s, grid, motion, w_min);
  const int D = model.D();
  s.tau.resize(D, grid.n_cells);
  if (prepare) {
    for (int j = 0; j < grid.n_cells; ++j)
      s.tau.col(j) = -model.Sigma->grad(phi_flat(s.deformation(j)));
  } else if (tau0 != nullptr) {
    if (tau0->rows() != D || tau0->cols() != grid.n_cells)
      throw ConfigError("tau0 has wrong shape");
    s.tau = *tau0;
  } else {
    s.tau.setZero();
  }
  return s;
}

EquilState init_equilibrium(const SlabGrid& grid, const SlabMotion& motion,
                            const ConstitutiveModel& model, double w_min) {
  require_dims(model, motion.dim);
  EquilState s;
  fill_kinematics(s, grid, motion, w_min);
  return s;
}

AugmentedState init_augmented(const SlabGrid& grid, const SlabMotion& motion,
                              const ConstitutiveModel& model, bool prepare, double w_min) {
  require_dims(model, motion.dim);
  AugmentedState s;
  fill_kinematics(s, grid, motion, w_min);
  const int D = model.D();
  s.xi.resize(D, grid.n_cells);
  s.tau.resize(D, grid.n_cells);
  for (int j = 0; j < grid.n_cells; ++j) {
    s.xi.col(j) = phi_flat(s.deformation(j));
    if (prepare)
      s.tau.col(j) = -model.Sigma->grad(s.xi.col(j));
    else
      s.tau.col(j).setZero();
  }
  return s;
}

Vec instantaneous_stress(const ConstitutiveModel& model, const Mat& F, const Vec& tau) {
  const int d = static_cast<int>(F.rows());
  const Vec g = model.sigma_I->grad(phi_flat(F)) + tau;
  const Mat J = dphi(F);
  Vec S(d);
  for (int i = 0; i < d; ++i) S[i] = J.col(i * d).dot(g);
  return S;
}

Vec equilibrium_stress(const ConstitutiveModel& model, const Mat& F) {
  const int d = static_cast<int>(F.rows());
  const Vec g = model.sigma_E->grad(phi_flat(F));
  const Mat J = dphi(F);
  Vec S(d);
  for (int i = 0; i < d; ++i) S[i] = J.col(i * d).dot(g);
  return S;
}

Vec augmented_stress(const ConstitutiveModel& model, const Mat& F, const Vec& xi,
                     const Vec& tau) {
  const int d = static_cast<int>(F.rows());
  const Vec g = model.sigma_I->grad(xi) + tau;
  const Mat J = dphi(F);
  Vec S(d);
  for (int i = 0; i < d; ++i) S[i] = J.col(i * d).dot(g);
  return S;
}

double max_wave_speed(const ConstitutiveModel& model, const RelaxState& state) {
  require_dims(model, state.dim);
  double lam = 0.0;
  for (int j = 0; j < state.cells(); ++j) {
    const Vec tau = state.tau.col(j);
    const auto stress = [&](const Mat& F) { return instantaneous_stress(model, F, tau); };
    lam = std::max(lam, fd_wave_speed(stress, state.deformation(j)));
  }
  return lam;
}

double max_wave_speed(const ConstitutiveModel& model, const EquilState& state) {
  require_dims(model, state.dim);
  double lam = 0.0;
  for (int j = 0; j < state.cells(); ++j) {
    const auto stress = [&](const Mat& F) { return equilibrium_stress(model, F); };
    lam = std::max(lam, fd_wave_speed(stress, state.deformation(j)));
  }
  return lam;
}

double max_wave_speed(const ConstitutiveModel& model, const AugmentedState& state) {
  require_dims(model, state.dim);
  double lam = 0.0;
  for (int j = 0; j < state.cells(); ++j) {
    const Vec tau = state.tau.col(j);
    // Speed from the cell's instantaneous stress at Phi(F); the augmented Xi
    // stays within O(dx) of Phi(F), so this bounds the coupled speeds.
    const auto stress = [&](const Mat& F) { return instantaneous_stress(model, F, tau); };
    lam = std::max(lam, fd_wave_speed(stress, state.deformation(j)));
  }
  return lam;
}

Vec relax_source_exact(const ConstitutiveModel& model, const Vec& xi, const Vec& tau,
                       double dt, double eps) {
  if (!std::isfinite(eps)) return tau;  // eps = inf: source off
  const Vec tau_eq = -model.Sigma->grad(xi);
  return tau_eq + (tau - tau_eq) * std::exp(-dt / eps);
}

namespace {

// Exact exponential relaxation of tau toward -grad Sigma(xi) with xi frozen.
// When diss is non-null, accumulates sum_j (Psi before - Psi after): the exact
// value of ∫ (1/eps) D dt over the sub-step (without the dx weight).
void source_update(Mat& tau, const std::function<Vec(int)>& xi_of, int n_cells,
                   const ConstitutiveModel& model, const EntropyStructure& structure,
                   double dt, double eps, double* diss) {
  if (!std::isfinite(eps)) return;  // eps = inf: source off
  const double decay = std::exp(-dt / eps);
  EntropyStructure::Cursor cur;
  for (int j = 0; j < n_cells; ++j) {
    const Vec xi = xi_of(j);
    const Vec tau_eq = -model.Sigma->grad(xi);
    const Vec tau_old = tau.col(j);
    const Vec tau_new = tau_eq + (tau_old - tau_eq) * decay;
    if (diss != nullptr)
      *diss += structure.psi(xi, tau_old, &cur) - structure.psi(xi, tau_new, &cur);
    tau.col(j) = tau_new;
  }
}

}  // namespace

RelaxState step_relax(const RelaxState& state, const ConstitutiveModel& model,
                      const EntropyStructure& structure, double dt, double eps,
                      const StepOptions& opts, StepReport* report) {
  require_dims(model, state.dim);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("step: dt must be positive");
  if (!(eps >= 0.0)) throw ConfigError("step: eps must be non-negative");
  const double dx = state.grid.dx();
  const double lam =
      opts.wave_speed_hint > 0.0 ? opts.wave_speed_hint : max_wave_speed(model, state);
  if (dt > effective_cfl_bound(opts.cfl, dx, lam))
    throw SolverAbort("CFL violation: dt exceeds cfl*dx/wave_speed");

  RelaxState out = state;
  const int d = state.dim;
  const int D = model.D();
  const int N = state.cells();
  double diss = 0.0;
  double* diss_ptr = opts.track_dissipation ? &diss : nullptr;

  const auto xi_of = [&out](int j) { return phi_flat(out.deformation(j)); };
  source_update(out.tau, xi_of, N, model, structure, 0.5 * dt, eps, diss_ptr);

  Mat U(2 * d + D, N);
  U.topRows(d) = out.v;
  U.middleRows(d, d) = out.f1;
  U.bottomRows(D) = out.tau;
  const Mat f_bg = out.f_bg;
  const FluxFn flux = [d, D, f_bg, &model](const Vec& u) {
    Mat F(d, d);
    F.col(0) = u.segment(d, d);
    for (int a = 1; a < d; ++a) F.col(a) = f_bg.col(a - 1);
    Vec h = Vec::Zero(2 * d + D);
    h.head(d) = -instantaneous_stress(model, F, u.tail(D));
    h.segment(d, d) = -u.head(d);
    return h;
  };
  ssp_rk2(U, flux, 2 * d, lam, dx, dt, opts.muscl);
  out.v = U.topRows(d);
  out.f1 = U.middleRows(d, d);

  source_update(out.tau, xi_of, N, model, structure, 0.5 * dt, eps, diss_ptr);
  out.t = state.t + dt;
  check_det_floor(out.f1, out.f_bg, opts.w_min, out.t);
  if (report != nullptr) {
    report->wave_speed = lam;
    report->dissipation_integral = diss * dx;
  }
  return out;
}

EquilState step_equilibrium(const EquilState& state, const ConstitutiveModel& model,
                            double dt, const StepOptions& opts, StepReport* report) {
  require_dims(model, state.dim);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("step: dt must be positive");
  const double dx = state.grid.dx();
  const double lam =
      opts.wave_speed_hint > 0.0 ? opts.wave_speed_hint : max_wave_speed(model, state);
  if (dt > effective_cfl_bound(opts.cfl, dx, lam))
    throw SolverAbort("CFL violation: dt exceeds cfl*dx/wave_speed");

  EquilState out = state;
  const int d = state.dim;
  const int N = state.cells();
  Mat U(2 * d, N);
  U.topRows(d) = out.v;
  U.bottomRows(d) = out.f1;
  const Mat f_bg = out.f_bg;
  const FluxFn flux = [d, f_bg, &model](const Vec& u) {
    Mat F(d, d);
    F.col(0) = u.tail(d);
    for (int a = 1; a < d; ++a) F.col(a) = f_bg.col(a - 1);
    Vec h(2 * d);
    h.head(d) = -equilibrium_stress(model, F);
    h.tail(d) = -u.head(d);
    return h;
  };
  ssp_rk2(U, flux, 2 * d, lam, dx, dt, opts.muscl);
  out.v = U.topRows(d);
  out.f1 = U.bottomRows(d);
  out.t = state.t + dt;
  check_det_floor(out.f1, out.f_bg, opts.w_min, out.t);
  if (report != nullptr) report->wave_speed = lam;
  return out;
}

AugmentedState step_augmented(const AugmentedState& state, const ConstitutiveModel& model,
                              const EntropyStructure& structure, double dt, double eps,
                              const StepOptions& opts, StepReport* report) {
  require_dims(model, state.dim);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("step: dt must be positive");
  if (!(eps >= 0.0)) throw ConfigError("step: eps must be non-negative");
  const double dx = state.grid.dx();
  const double lam =
      opts.wave_speed_hint > 0.0 ? opts.wave_speed_hint : max_wave_speed(model, state);
  if (dt > effective_cfl_bound(opts.cfl, dx, lam))
    throw SolverAbort("CFL violation: dt exceeds cfl*dx/wave_speed");

  AugmentedState out = state;
  const int d = state.dim;
  const int D = model.D();
  const int N = state.cells();
  double diss = 0.0;
  double* diss_ptr = opts.track_dissipation ? &diss : nullptr;

  const auto xi_of = [&out](int j) -> Vec { return out.xi.col(j); };
  source_update(out.tau, xi_of, N, model, structure, 0.5 * dt, eps, diss_ptr);

  Mat U(2 * d + 2 * D, N);
  U.topRows(d) = out.v;
  U.middleRows(d, d) = out.f1;
  U.middleRows(2 * d, D) = out.xi;
  U.bottomRows(D) = out.tau;
  const Mat f_bg = out.f_bg;
  const FluxFn flux = [d, D, f_bg, &model](const Vec& u) {
    Mat F(d, d);
    F.col(0) = u.segment(d, d);
    for (int a = 1; a < d; ++a) F.col(a) = f_bg.col(a - 1);
    const Mat J = dphi(F);
    const Vec g = model.sigma_I->grad(u.segment(2 * d, D)) + u.tail(D);
    Vec h = Vec::Zero(2 * d + 2 * D);
    for (int i = 0; i < d; ++i) {
      h[i] = -J.col(i * d).dot(g);
      h.segment(2 * d, D) -= u[i] * J.col(i * d);
    }
    h.segment(d, d) = -u.head(d);
    return h;
  };
  ssp_rk2(U, flux, 2 * d + D, lam, dx, dt, opts.muscl);
  out.v = U.topRows(d);
  out.f1 = U.middleRows(d, d);
  out.xi = U.middleRows(2 * d, D);

  source_update(out.tau, xi_of, N, model, structure, 0.5 * dt, eps, diss_ptr);
  out.t = state.t + dt;
  check_det_floor(out.f1, out.f_bg, opts.w_min, out.t);
  if (report != nullptr) {
    report->wave_speed = lam;
    report->dissipation_integral = diss * dx;
  }
  return out;
}

double total_entropy_relax(const EntropyStructure& structure, const RelaxState& state) {
  double sum = 0.0;
  EntropyStructure::Cursor cur;
  for (int j = 0; j < state.cells(); ++j) {
    const Vec xi = phi_flat(state.deformation(j));
    sum += 0.5 * state.v.col(j).squaredNorm() + structure.psi(xi, state.tau.col(j), &cur);
  }
  return sum * state.grid.dx();
}

double total_energy_equil(const ConstitutiveModel& model, const EquilState& state) {
  double sum = 0.0;
  for (int j = 0; j < state.cells(); ++j) {
    sum += 0.5 * state.v.col(j).squaredNorm() +
           model.sigma_E->value(phi_flat(state.deformation(j)));
  }
  return sum * state.grid.dx();
}

Vec total_velocity(const Mat& v, double dx) { return v.rowwise().sum() * dx; }
Vec total_f1(const Mat& f1, double dx) { return f1.rowwise().sum() * dx; }

double max_grad_f1(const Mat& f1, double dx) {
  const int N = static_cast<int>(f1.cols());
  double g = 0.0;
  for (int j = 0; j < N; ++j) {
    const int jm = (j + N - 1) % N;
    const int jp = (j + 1) % N;
    g = std::max(g, ((f1.col(jp) - f1.col(jm)) / (2.0 * dx)).cwiseAbs().maxCoeff());
  }
  return g;
}

namespace {

// Shared driver: advances `state` with `do_step`, handling dt selection,
// exact landing on target times, snapshot cadence and the blow-up monitor.
template <typename State, typename Step, typename Snap>
int drive(State& state, const ConstitutiveModel& model, const RunOptions& opts,
          const Step& do_step, const Snap& on_snapshot) {
  if (opts.t_end < 0.0) throw ConfigError("run: t_end must be nonnegative");
  std::vector<double> targets = opts.target_times;
  std::sort(targets.begin(), targets.end());
  size_t ti = 0;
  const double dx = state.grid.dx();
  const double grad0 = std::max(max_grad_f1(state.f1, dx), 1e-6);
  on_snapshot(state);
  int step = 0;
  while (state.t < opts.t_end - 1e-13) {
    while (ti < targets.size() && targets[ti] <= state.t + 1e-13) ++ti;
    const double lam = max_wave_speed(model, state);
    double dt = opts.cfl * dx / std::max(lam, 1e-12);
    double bound = opts.t_end;
    if (ti < targets.size()) bound = std::min(bound, targets[ti]);
    bool landed = false;
    if (state.t + dt >= bound - 1e-13) {
      dt = bound - state.t;
      landed = true;
    }
    do_step(state, dt, lam);
    ++step;
    if (landed) state.t = bound;

    if (max_grad_f1(state.f1, dx) > opts.blowup_factor * grad0) {
      std::ostringstream msg;
      msg << "gradient blow-up: max|d1 F| grew past " << opts.blowup_factor
          << "x its initial value at t = " << state.t;
      throw SolverAbort(msg.str());
    }

    bool snap = opts.snapshot_stride > 0 && step % opts.snapshot_stride == 0;
    if (ti < targets.size() && std::abs(state.t - targets[ti]) <= 1e-13) {
      snap = true;
      ++ti;
    }
    if (state.t >= opts.t_end - 1e-13) snap = true;
    if (snap) on_snapshot(state);
  }
  return step;
}

}  // namespace

RelaxTrajectory run_relax(const RelaxState& init, const ConstitutiveModel& model,
                          const EntropyStructure& structure, const RunOptions& opts) {
  RelaxTrajectory out;
  RelaxState s = init;
  StepOptions sopts;
  sopts.cfl = opts.cfl;
  sopts.muscl = opts.muscl;
  sopts.w_min = opts.w_min;
  sopts.track_dissipation = opts.h_monitor;
  const double dx = s.grid.dx();
  double diss_cum = 0.0;
  double h_comb_prev = 0.0;
  bool have_prev = false;

  const auto do_step = [&](RelaxState& st, double dt, double lam) {
    StepOptions so = sopts;
    so.wave_speed_hint = lam;
    StepReport rep;
    st = step_relax(st, model, structure, dt, opts.eps, so, &rep);
    diss_cum += rep.dissipation_integral;
    if (opts.h_monitor) {
      const double comb = total_entropy_relax(structure, st) + diss_cum;
      if (have_prev && comb > h_comb_prev) {
        out.h_violation_max = std::max(out.h_violation_max, comb - h_comb_prev);
        out.h_violation_total += comb - h_comb_prev;
      }
      h_comb_prev = comb;
      have_prev = true;
      DiagnosticsRecord r;
      r.t = st.t;
      r.total_entropy = comb - diss_cum;
      r.dissipation_cum = diss_cum;
      r.max_grad_f = max_grad_f1(st.f1, dx);
      out.records.push_back(r);
    }
  };
  const auto on_snapshot = [&](const RelaxState& st) { out.snapshots.push_back(st); };

  if (opts.h_monitor) {
    h_comb_prev = total_entropy_relax(structure, s);
    have_prev = true;
    DiagnosticsRecord r;
    r.t = s.t;
    r.total_entropy = h_comb_prev;
    r.dissipation_cum = 0.0;
    r.max_grad_f = max_grad_f1(s.f1, dx);
    out.records.push_back(r);
  }
  out.steps = drive(s, model, opts, do_step, on_snapshot);
  return out;
}

EquilTrajectory run_equilibrium(const EquilState& init, const ConstitutiveModel& model,
                                const RunOptions& opts) {
  EquilTrajectory out;
  EquilState s = init;
  StepOptions sopts;
  sopts.cfl = opts.cfl;
  sopts.muscl = opts.muscl;
  sopts.w_min = opts.w_min;
  const double dx = s.grid.dx();
  double h_prev = 0.0;
  bool have_prev = false;

  const auto do_step = [&](EquilState& st, double dt, double lam) {
    StepOptions so = sopts;
    so.wave_speed_hint = lam;
    st = step_equilibrium(st, model, dt, so);
    if (opts.h_monitor) {
      const double h = total_energy_equil(model, st);
      if (have_prev && h > h_prev) {
        out.h_violation_max = std::max(out.h_violation_max, h - h_prev);
        out.h_violation_total += h - h_prev;
      }
      h_prev = h;
      have_prev = true;
      DiagnosticsRecord r;
      r.t = st.t;
      r.total_entropy = h;
      r.max_grad_f = max_grad_f1(st.f1, dx);
      out.records.push_back(r);
    }
  };
  const auto on_snapshot = [&](const EquilState& st) { out.snapshots.push_back(st); };

  if (opts.h_monitor) {
    h_prev = total_energy_equil(model, s);
    have_prev = true;
    DiagnosticsRecord r;
    r.t = s.t;
    r.total_entropy = h_prev;
    r.max_grad_f = max_grad_f1(s.f1, dx);
    out.records.push_back(r);
  }
  out.steps = drive(s, model, opts, do_step, on_snapshot);
  return out;
}

AugmentedTrajectory run_augmented(const AugmentedState& init, const ConstitutiveModel& model,
                                  const EntropyStructure& structure, const RunOptions& opts) {
  AugmentedTrajectory out;
  AugmentedState s = init;
  StepOptions sopts;
  sopts.cfl = opts.cfl;
  sopts.muscl = opts.muscl;
  sopts.w_min = opts.w_min;

  const auto gap = [](const AugmentedState& st) {
    double g = 0.0;
    for (int j = 0; j < st.cells(); ++j)
      g = std::max(g, (st.xi.col(j) - phi_flat(st.deformation(j))).cwiseAbs().maxCoeff());
    return g;
  };
  const auto do_step = [&](AugmentedState& st, double dt, double lam) {
    StepOptions so = sopts;
    so.wave_speed_hint = lam;
    st = step_augmented(st, model, structure, dt, opts.eps, so);
    out.max_constraint_gap = std::max(out.max_constraint_gap, gap(st));
  };
  const auto on_snapshot = [&](const AugmentedState& st) { out.snapshots.push_back(st); };

  out.max_constraint_gap = gap(s);
  out.steps = drive(s, model, opts, do_step, on_snapshot);
  return out;
}

}  // namespace polyrelax
