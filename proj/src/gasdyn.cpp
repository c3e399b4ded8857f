#include "polyrelax/gasdyn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "polyrelax/constitutive.hpp"
#include "polyrelax/errors.hpp"
#include "polyrelax/sampling.hpp"

namespace polyrelax {

namespace {

double effective_cfl_bound(double cfl, double dx, double lam) {
  return cfl * dx / std::max(lam, 1e-300) * (1.0 + 1e-9);
}

// Adaptive Simpson on [a, b] (a < b), absolute tolerance tol.
template <typename F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  const double sgn = a < b ? 1.0 : -1.0;
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
  const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
  return sgn * simpson_rec(f, lo, hi, fa, fm, fb, whole, tol, 40);
}

}  // namespace

double GasModel::P_inv(double tau) const {
  if (P.single_monomial()) {
    const Monomial& t = P.terms()[0];
    const double ratio = tau / t.coef;
    if (!(ratio > 0.0) || t.expnt == 0.0)
      throw SolverAbort("gas: tau outside the image of P");
    return std::pow(ratio, 1.0 / t.expnt);
  }
  if (!(tau > 0.0)) throw SolverAbort("gas: tau outside the image of P");
  double r = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double f = P.p(r) - tau;
    if (std::abs(f) <= 1e-13 * std::max(1.0, std::abs(tau))) return r;
    const double dp = P.dp(r);
    if (!(std::abs(dp) > 0.0) || !std::isfinite(dp))
      throw NoConvergenceError("gas: P_inv hit a flat spot of P");
    double step = f / dp;
    double rn = r - step;
    while (rn <= 0.0) {
      step *= 0.5;
      rn = r - step;
    }
    if (!std::isfinite(rn)) throw NoConvergenceError("gas: P_inv diverged");
    r = rn;
  }
  throw NoConvergenceError("gas: P_inv Newton did not converge");
}

double GasModel::G(double tau) const {
  if (P.single_monomial()) {
    const Monomial& t = P.terms()[0];
    if (!(tau > 0.0) || !(t.coef > 0.0) || !(t.expnt > 0.0))
      throw SolverAbort("gas: G undefined: tau range leaves the image of P");
    // -int_1^tau (c/s)^{1/e} ds, with a log at e = 1.
    if (std::abs(t.expnt - 1.0) < 1e-14) return -t.coef * std::log(tau);
    const double q = 1.0 - 1.0 / t.expnt;
    return -std::pow(t.coef, 1.0 / t.expnt) * (std::pow(tau, q) - 1.0) / q;
  }
  if (!(tau > 0.0)) throw SolverAbort("gas: G undefined: tau range leaves the image of P");
  return -integrate([this](double s) { return 1.0 / P_inv(s); }, 1.0, tau, 1e-12);
}

double GasModel::dG(double tau) const { return -1.0 / P_inv(tau); }

double GasModel::d2G(double tau) const {
  const double r = P_inv(tau);
  return 1.0 / (r * r * P.dp(r));
}

GasModel builtin_gas(const std::string& name, const GasParams& q) {
  if (!(q.rho_lo > 0.0) || !(q.rho_hi > q.rho_lo) || !(q.rho_min > 0.0))
    throw ConfigError("builtin_gas: invalid density box");
  GasModel g;
  g.family = name;
  g.rho_lo = q.rho_lo;
  g.rho_hi = q.rho_hi;
  g.rho_min = q.rho_min;
  g.kappa = q.kappa;
  g.gamma = q.gamma;
  g.a = q.a;
  g.beta = q.beta;
  g.p_E = PressureLaw({{q.kappa, q.gamma}});
  if (name == "default") {
    g.p_I = PressureLaw({{q.kappa, q.gamma}, {q.a, q.beta}});
  } else if (name == "two-term") {
    g.b = q.b;
    g.p_I = PressureLaw({{q.kappa, q.gamma}, {q.a, q.beta}, {q.b, q.beta + 2.0}});
  } else {
    throw ConfigError("builtin_gas: unknown family '" + name + "'");
  }
  g.P = PressureLaw::difference(g.p_I, g.p_E);
  // (a0)/(a1) on the box are build-time preconditions, scanned densely.
  const int n_scan = 2001;
  for (int i = 0; i < n_scan; ++i) {
    const double rho = q.rho_lo + (q.rho_hi - q.rho_lo) * i / (n_scan - 1);
    if (!(g.p_I.p(rho) > 0.0 && g.p_E.p(rho) > 0.0 && g.p_I.dp(rho) > 0.0 &&
          g.p_E.dp(rho) > 0.0))
      throw ConfigError("builtin_gas: (a0) positivity fails on the density box");
    if (!(g.P.dp(rho) > 0.0))
      throw ConfigError("builtin_gas: (a1) P' > 0 fails on the density box");
  }
  return g;
}

GasConditionReport check_a_conditions(const GasModel& gas, int n_samples, uint64_t seed) {
  if (n_samples < 2) throw ConfigError("check_a_conditions: need at least 2 samples");
  GasConditionReport rep;
  rep.n_samples = n_samples;

  // Half deterministic grid including both endpoints, half uniform draws.
  const int n_grid = (n_samples + 1) / 2;
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(gas.rho_lo, gas.rho_hi);
  std::vector<double> rhos;
  rhos.reserve(n_samples);
  for (int i = 0; i < n_grid; ++i)
    rhos.push_back(gas.rho_lo + (gas.rho_hi - gas.rho_lo) * i / (n_grid - 1));
  for (int i = n_grid; i < n_samples; ++i) rhos.push_back(unif(rng));

  double min_a0 = 1e300, min_dP = 1e300;
  double min_pIr2 = 1e300, max_Pr2 = -1e300, min_diag = 1e300;
  double min_dpI = 1e300, max_dP = -1e300, min_lead = 1e300;
  for (const double rho : rhos) {
    const double pI = gas.p_I.p(rho), pE = gas.p_E.p(rho);
    const double dpI = gas.p_I.dp(rho), dpE = gas.p_E.dp(rho);
    const double dP = gas.P.dp(rho);
    min_a0 = std::min({min_a0, pI, pE, dpI, dpE});
    min_dP = std::min(min_dP, dP);
    min_pIr2 = std::min(min_pIr2, dpI * rho * rho);
    max_Pr2 = std::max(max_Pr2, dP * rho * rho);
    min_diag = std::min(min_diag, (dpI - dP) * rho * rho);
    min_dpI = std::min(min_dpI, dpI);
    max_dP = std::max(max_dP, dP);
    min_lead = std::min(min_lead, dpI / rho);
  }

  // tau on the equilibrium image of the box; the determinant margin uses
  // min_rho p_I' since det = p_I'(rho) G''(tau) - G'(tau)^2.
  const double tau_lo = gas.P.p(gas.rho_lo), tau_hi = gas.P.p(gas.rho_hi);
  std::uniform_real_distribution<double> unif_tau(std::min(tau_lo, tau_hi),
                                                  std::max(tau_lo, tau_hi));
  double min_det = 1e300;
  for (int i = 0; i < n_samples; ++i) {
    const double tau = i < n_grid
                           ? tau_lo + (tau_hi - tau_lo) * i / (n_grid - 1)
                           : unif_tau(rng);
    const double g1 = gas.dG(tau), g2 = gas.d2G(tau);
    min_det = std::min(min_det, min_dpI * g2 - g1 * g1);
  }

  rep.a0_margin = min_a0;
  rep.a1_margin = min_dP;
  rep.a2_pair_margin = min_pIr2 - max_Pr2;
  rep.a2_diag_margin = min_diag;
  rep.a3_pair_margin = min_dpI - max_dP;
  rep.rhoE_lead_margin = min_lead;
  rep.rhoE_det_margin = min_det;
  rep.a0_pass = rep.a0_margin > 0.0;
  rep.a1_pass = rep.a1_margin > 0.0;
  rep.a2_pair_pass = rep.a2_pair_margin > 0.0;
  rep.a2_diag_pass = rep.a2_diag_margin > 0.0;
  rep.a3_pass = rep.a3_pair_margin > 0.0;
  rep.rhoE_pass = rep.rhoE_lead_margin > 0.0 && rep.rhoE_det_margin > 0.0;
  rep.pass = rep.a0_pass && rep.a1_pass && rep.a2_pair_pass && rep.a2_diag_pass &&
             rep.a3_pass && rep.rhoE_pass;
  return rep;
}

double entropy_H(const GasModel& gas, double rho, double m, double tau) {
  return 0.5 * m * m / rho + rho * gas.e_I(rho) + tau + rho * gas.G(tau);
}

Mat entropy_H_hessian(const GasModel& gas, double rho, double m, double tau) {
  Mat H = Mat::Zero(3, 3);
  H(0, 0) = m * m / (rho * rho * rho) + gas.p_I.dp(rho) / rho;
  H(0, 1) = H(1, 0) = -m / (rho * rho);
  H(0, 2) = H(2, 0) = gas.dG(tau);
  H(1, 1) = 1.0 / rho;
  H(2, 2) = rho * gas.d2G(tau);
  return H;
}

double gas_dissipation(const GasModel& gas, double rho, double tau) {
  return rho * (tau - gas.P.p(rho)) * (1.0 / rho - 1.0 / gas.P_inv(tau));
}

EulerState gas_init(const SlabGrid& grid, const GasModel& gas, double rho_amp,
                    double vel_amp, int wavenumber, double tau_amp) {
  if (wavenumber < 1) throw ConfigError("gas_init: wavenumber must be >= 1");
  EulerState s;
  s.grid = grid;
  const int N = grid.n_cells;
  s.rho.resize(N);
  s.m.resize(N);
  s.tau.resize(N);
  const double k = 2.0 * M_PI * wavenumber;
  for (int j = 0; j < N; ++j) {
    const double x = grid.center(j);
    const double rho = 1.0 + rho_amp * std::cos(k * x);
    if (!(rho > 0.0)) throw ConfigError("gas_init: density profile not positive");
    s.rho[j] = rho;
    s.m[j] = rho * vel_amp * std::sin(k * x);
    s.tau[j] = gas.P.p(rho) + tau_amp * std::cos(k * x);
  }
  return s;
}

double gas_wave_speed(const GasModel& gas, const EulerState& state) {
  double lam = 0.0;
  for (int j = 0; j < state.cells(); ++j) {
    const double rho = state.rho[j];
    lam = std::max(lam, std::abs(state.m[j] / rho) + std::sqrt(gas.p_I.dp(rho)));
  }
  return lam;
}

double total_gas_entropy(const GasModel& gas, const EulerState& state) {
  double sum = 0.0;
  for (int j = 0; j < state.cells(); ++j)
    sum += entropy_H(gas, state.rho[j], state.m[j], state.tau[j]);
  return sum * state.grid.dx();
}

namespace {

void check_vacuum(const Mat& U, const GasModel& gas, double t) {
  for (int j = 0; j < U.cols(); ++j) {
    if (!(U(0, j) > gas.rho_min)) {
      std::ostringstream msg;
      msg << "vacuum approach: rho = " << U(0, j) << " <= " << gas.rho_min
          << " at cell " << j << ", t = " << t;
      throw SolverAbort(msg.str());
    }
  }
}

// Flux of the conservative triple (rho, m, rho tau).
inline Vec gas_flux(const GasModel& gas, const Vec& u) {
  const double rho = u[0], vel = u[1] / u[0], tau = u[2] / u[0];
  Vec h(3);
  h[0] = u[1];
  h[1] = u[1] * vel + gas.p_I.p(rho) - tau;
  h[2] = u[1] * tau;
  return h;
}

Mat gas_rhs(const Mat& U, const GasModel& gas, double lam, double dx) {
  const int N = static_cast<int>(U.cols());
  Mat hcell(3, N);
  for (int j = 0; j < N; ++j) hcell.col(j) = gas_flux(gas, U.col(j));
  Mat hface(3, N);
  for (int j = 0; j < N; ++j) {
    const int jp = (j + 1) % N;
    hface.col(j) =
        0.5 * (hcell.col(j) + hcell.col(jp)) - 0.5 * lam * (U.col(jp) - U.col(j));
  }
  Mat rhs(3, N);
  for (int j = 0; j < N; ++j) {
    const int jm = (j + N - 1) % N;
    rhs.col(j) = -(hface.col(j) - hface.col(jm)) / dx;
  }
  return rhs;
}

// Exact exponential relaxation of tau toward P(rho) with rho frozen.  When
// diss is non-null, accumulates the exact per-cell drop of tau + rho G(tau):
// the value of ∫ (1/eps) rho(tau-P)(1/rho - 1/P_inv) dt over the sub-step
// (without the dx weight).
void gas_source(Vec& tau, const Vec& rho, const GasModel& gas, double dt, double eps,
                double* diss) {
  if (!std::isfinite(eps)) return;  // eps = inf: source off
  const double decay = std::exp(-dt / eps);
  for (int j = 0; j < tau.size(); ++j) {
    const double teq = gas.P.p(rho[j]);
    const double told = tau[j];
    const double tnew = teq + (told - teq) * decay;
    if (diss != nullptr)
      *diss += (told + rho[j] * gas.G(told)) - (tnew + rho[j] * gas.G(tnew));
    tau[j] = tnew;
  }
}

}  // namespace

EulerState step_euler_relax(const EulerState& state, const GasModel& gas, double dt,
                            double eps, const GasStepOptions& opts,
                            GasStepReport* report) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("gas step: dt must be positive");
  if (!(eps >= 0.0)) throw ConfigError("gas step: eps must be non-negative");
  if (state.cells() != state.grid.n_cells || state.m.size() != state.rho.size() ||
      state.tau.size() != state.rho.size())
    throw ConfigError("gas step: field sizes do not match the grid");
  const double dx = state.grid.dx();
  const double lam =
      opts.wave_speed_hint > 0.0 ? opts.wave_speed_hint : gas_wave_speed(gas, state);
  if (dt > effective_cfl_bound(opts.cfl, dx, lam))
    throw SolverAbort("CFL violation: dt exceeds cfl*dx/wave_speed");

  EulerState out = state;
  double diss = 0.0;
  double* diss_ptr = opts.track_dissipation ? &diss : nullptr;

  gas_source(out.tau, out.rho, gas, 0.5 * dt, eps, diss_ptr);

  const int N = out.cells();
  Mat U(3, N);
  U.row(0) = out.rho.transpose();
  U.row(1) = out.m.transpose();
  U.row(2) = (out.rho.array() * out.tau.array()).matrix().transpose();
  check_vacuum(U, gas, state.t);
  const Mat U1 = U + dt * gas_rhs(U, gas, lam, dx);
  check_vacuum(U1, gas, state.t);
  U = 0.5 * (U + U1 + dt * gas_rhs(U1, gas, lam, dx));
  check_vacuum(U, gas, state.t + dt);
  out.rho = U.row(0).transpose();
  out.m = U.row(1).transpose();
  out.tau = (U.row(2).array() / U.row(0).array()).matrix().transpose();

  gas_source(out.tau, out.rho, gas, 0.5 * dt, eps, diss_ptr);
  out.t = state.t + dt;
  if (report != nullptr) {
    report->wave_speed = lam;
    report->dissipation_integral = diss * dx;
  }
  return out;
}

GasTrajectory run_euler_relax(const EulerState& init, const GasModel& gas,
                              const GasRunOptions& opts) {
  if (opts.t_end < 0.0) throw ConfigError("gas run: t_end must be nonnegative");
  if (!(opts.eps >= 0.0)) throw ConfigError("gas run: eps must be non-negative");
  GasTrajectory out;
  EulerState s = init;
  const double dx = s.grid.dx();
  double diss_cum = 0.0;
  double h_comb_prev = 0.0;
  bool have_prev = false;

  const auto record = [&](const EulerState& st) {
    const double H = total_gas_entropy(gas, st);
    const double comb = H + diss_cum;
    if (have_prev && comb > h_comb_prev) {
      out.h_violation_max = std::max(out.h_violation_max, comb - h_comb_prev);
      out.h_violation_total += comb - h_comb_prev;
    }
    h_comb_prev = comb;
    have_prev = true;
    GasRecord r;
    r.t = st.t;
    r.total_H = H;
    r.dissipation_cum = diss_cum;
    out.records.push_back(r);
  };

  std::vector<double> targets = opts.target_times;
  std::sort(targets.begin(), targets.end());
  size_t ti = 0;
  out.snapshots.push_back(s);
  if (opts.h_monitor) record(s);
  int step = 0;
  while (s.t < opts.t_end - 1e-13) {
    while (ti < targets.size() && targets[ti] <= s.t + 1e-13) ++ti;
    const double lam = gas_wave_speed(gas, s);
    double dt = opts.cfl * dx / std::max(lam, 1e-12);
    double bound = opts.t_end;
    if (ti < targets.size()) bound = std::min(bound, targets[ti]);
    bool landed = false;
    if (s.t + dt >= bound - 1e-13) {
      dt = bound - s.t;
      landed = true;
    }
    GasStepOptions so;
    so.cfl = opts.cfl;
    so.wave_speed_hint = lam;
    so.track_dissipation = opts.h_monitor;
    GasStepReport rep;
    s = step_euler_relax(s, gas, dt, opts.eps, so, &rep);
    diss_cum += rep.dissipation_integral;
    ++step;
    if (landed) s.t = bound;
    if (opts.h_monitor) record(s);

    bool snap = opts.snapshot_stride > 0 && step % opts.snapshot_stride == 0;
    if (ti < targets.size() && std::abs(s.t - targets[ti]) <= 1e-13) {
      snap = true;
      ++ti;
    }
    if (s.t >= opts.t_end - 1e-13) snap = true;
    if (snap) out.snapshots.push_back(s);
  }
  out.steps = step;
  return out;
}

namespace {

// Piecewise-linear periodic interpolation through monotone scattered samples.
struct PeriodicInterp {
  std::vector<double> x;  // strictly increasing within one period
  std::vector<double> f;
  double x_min = 0.0, length = 1.0;

  double eval(double q) const {
    const int n = static_cast<int>(x.size());
    double qq = std::fmod(q - x_min, length);
    if (qq < 0.0) qq += length;
    qq += x_min;
    const auto it = std::upper_bound(x.begin(), x.end(), qq);
    double xl, xr, fl, fr;
    if (it == x.begin()) {
      xl = x[n - 1] - length;
      fl = f[n - 1];
      xr = x[0];
      fr = f[0];
    } else if (it == x.end()) {
      xl = x[n - 1];
      fl = f[n - 1];
      xr = x[0] + length;
      fr = f[0];
    } else {
      const int i = static_cast<int>(it - x.begin());
      xl = x[i - 1];
      fl = f[i - 1];
      xr = x[i];
      fr = f[i];
    }
    const double w = (qq - xl) / (xr - xl);
    return (1.0 - w) * fl + w * fr;
  }
};

}  // namespace

CrossCheckReport lagrangean_cross_check(const GasModel& gas,
                                        const CrossCheckOptions& opts) {
  if (gas.family != "default")
    throw ConfigError("lagrangean_cross_check: default gas family only");
  if (!(opts.t_end > 0.0)) throw ConfigError("lagrangean_cross_check: t_end must be positive");

  // Lagrangean twin of the gas model on the slab.
  ModelParams mp;
  mp.dim = 3;
  mp.value = {{"kappa", gas.kappa}, {"gamma", gas.gamma},   {"a", gas.a},
              {"beta", gas.beta},   {"rho_lo", gas.rho_lo}, {"rho_hi", gas.rho_hi}};
  const ConstitutiveModel model = builtin_model("gas-lagrangean", mp);
  const EntropyStructure structure = build_G(model, default_tau_box(model), model.xi0);

  const SlabGrid grid(opts.n_cells);
  const double k = 2.0 * M_PI * opts.wavenumber;
  SlabMotion motion;
  motion.dim = 3;
  motion.affine = Mat::Identity(3, 3);
  motion.disp_grad = [](double) { return Vec::Zero(3); };
  motion.velocity = [&](double x) {
    Vec v = Vec::Zero(3);
    v[0] = opts.vel_amp * std::sin(k * x);
    return v;
  };
  RelaxState init = init_from_motion(grid, motion, model, /*prepare=*/true);
  for (int j = 0; j < grid.n_cells; ++j)
    init.tau(w_index(3), j) += opts.tau_amp * std::cos(k * grid.center(j));

  RunOptions ro;
  ro.t_end = opts.t_end;
  ro.eps = opts.eps;
  ro.cfl = opts.cfl;
  ro.snapshot_stride = 1;
  ro.muscl = opts.muscl;
  ro.w_min = opts.w_min;
  ro.h_monitor = false;
  // F starts at the identity, so the relative gradient monitor has no
  // meaningful baseline; the fold-over and vacuum guards cover this run.
  ro.blowup_factor = 1e12;
  ro.target_times = {opts.t_end};
  const RelaxTrajectory slab = run_relax(init, model, structure, ro);

  GasRunOptions go;
  go.t_end = opts.t_end;
  go.eps = opts.eps;
  go.cfl = opts.cfl;
  go.snapshot_stride = 0;
  go.h_monitor = false;
  go.target_times = {opts.t_end};
  const EulerState einit =
      gas_init(grid, gas, 0.0, opts.vel_amp, opts.wavenumber, opts.tau_amp);
  const GasTrajectory euler = run_euler_relax(einit, gas, go);

  CrossCheckReport rep;
  rep.n_cells = opts.n_cells;

  // Particle transport dy/dt = v1(x_j, t), trapezoid over the per-step
  // snapshots of the slab run.
  const int N = grid.n_cells;
  const double L = grid.x_max - grid.x_min;
  Vec y(N);
  for (int j = 0; j < N; ++j) y[j] = grid.center(j);
  for (size_t kx = 0; kx + 1 < slab.snapshots.size(); ++kx) {
    const RelaxState& s0 = slab.snapshots[kx];
    const RelaxState& s1 = slab.snapshots[kx + 1];
    const double h = s1.t - s0.t;
    for (int j = 0; j < N; ++j) y[j] += 0.5 * h * (s0.v(0, j) + s1.v(0, j));
  }

  double min_slope = 1e300;
  for (int j = 0; j < N; ++j) {
    const double dy = j + 1 < N ? y[j + 1] - y[j] : y[0] + L - y[N - 1];
    min_slope = std::min(min_slope, dy / grid.dx());
  }
  rep.map_min_slope = min_slope;
  if (!(min_slope > 0.0))
    throw SolverAbort("lagrangean_cross_check: transported sample points fold over");

  // Slab density at the transported points, interpolated onto the Euler grid.
  const RelaxState& sf = slab.snapshots.back();
  PeriodicInterp interp;
  interp.x_min = grid.x_min;
  interp.length = L;
  {
    std::vector<double> yr(N);
    int start = 0;
    for (int j = 0; j < N; ++j) {
      double v = std::fmod(y[j] - grid.x_min, L);
      if (v < 0.0) v += L;
      yr[j] = grid.x_min + v;
      if (yr[j] < yr[start]) start = j;
    }
    interp.x.resize(N);
    interp.f.resize(N);
    for (int j = 0; j < N; ++j) {
      const int src = (start + j) % N;
      interp.x[j] = yr[src];
      interp.f[j] = 1.0 / determinant(sf.deformation(src));
    }
    for (int j = 0; j + 1 < N; ++j)
      if (!(interp.x[j + 1] > interp.x[j]))
        throw SolverAbort("lagrangean_cross_check: transported sample points fold over");
  }

  const EulerState& ef = euler.snapshots.back();
  double gap = 0.0;
  for (int j = 0; j < N; ++j)
    gap += std::abs(interp.eval(grid.center(j)) - ef.rho[j]);
  rep.l1_density_gap = gap * grid.dx();

  // Abel residual d/dt det F - d1 (v . cof F e1), centered in time and space,
  // on up to 9 interior snapshot times.
  const int K = static_cast<int>(slab.snapshots.size());
  if (K >= 3) {
    const int n_eval = std::min(9, K - 2);
    double worst = 0.0;
    for (int e = 0; e < n_eval; ++e) {
      const int n = 1 + (K - 3) * e / std::max(1, n_eval - 1);
      const RelaxState& sm = slab.snapshots[n - 1];
      const RelaxState& sc = slab.snapshots[n];
      const RelaxState& sp = slab.snapshots[n + 1];
      Vec flux(N);
      for (int j = 0; j < N; ++j) {
        const Mat F = sc.deformation(j);
        flux[j] = sc.v.col(j).dot(cofactor(F).col(0));
      }
      double l1 = 0.0;
      for (int j = 0; j < N; ++j) {
        const int jm = (j + N - 1) % N;
        const int jp = (j + 1) % N;
        const double ddet = (determinant(sp.deformation(j)) -
                             determinant(sm.deformation(j))) /
                            (sp.t - sm.t);
        const double dflux = (flux[jp] - flux[jm]) / (2.0 * grid.dx());
        l1 += std::abs(ddet - dflux);
      }
      worst = std::max(worst, l1 * grid.dx());
    }
    rep.abel_residual_l1 = worst;
  }
  return rep;
}

GasEpsStudy gas_eps_study(const GasModel& gas, const GasEpsStudyOptions& opts,
                          const std::vector<double>& eps_list) {
  if (eps_list.empty()) throw ConfigError("gas_eps_study: eps list is empty");
  for (size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0) || !std::isfinite(eps_list[i]))
      throw ConfigError("gas_eps_study: eps values must be positive and finite");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
      throw ConfigError("gas_eps_study: eps list must be strictly decreasing");
  }
  if (opts.n_compare < 1) throw ConfigError("gas_eps_study: n_compare must be >= 1");

  const SlabGrid grid(opts.n_cells);
  const EulerState init = gas_init(grid, gas, opts.rho_amp, opts.vel_amp,
                                   opts.wavenumber, opts.tau_amp);
  std::vector<double> compare;
  for (int kc = 1; kc <= opts.n_compare; ++kc)
    compare.push_back(opts.t_end * kc / opts.n_compare);

  GasRunOptions go;
  go.t_end = opts.t_end;
  go.cfl = opts.cfl;
  go.snapshot_stride = 0;
  go.h_monitor = false;
  go.target_times = compare;

  const auto snapshot_at = [](const GasTrajectory& tr, double t) -> const EulerState& {
    for (const auto& s : tr.snapshots)
      if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return s;
    throw SolverAbort("gas_eps_study: missing snapshot at a comparison time");
  };

  go.eps = 0.0;
  const GasTrajectory ref = run_euler_relax(init, gas, go);

  GasEpsStudy study;
  const double dx = grid.dx();
  for (const double eps : eps_list) {
    go.eps = eps;
    const GasTrajectory tr = run_euler_relax(init, gas, go);
    GasEpsRow row;
    row.eps = eps;
    for (const double t : compare) {
      const EulerState& s = snapshot_at(tr, t);
      const EulerState& h = snapshot_at(ref, t);
      double rgap = 0.0, ugap = 0.0;
      for (int j = 0; j < s.cells(); ++j) {
        rgap += std::abs(s.rho[j] - h.rho[j]);
        ugap += std::abs(s.u(j) - h.u(j));
      }
      row.l1_rho_gap = std::max(row.l1_rho_gap, rgap * dx);
      row.l1_u_gap = std::max(row.l1_u_gap, ugap * dx);
    }
    study.rows.push_back(row);
  }
  study.rho_monotone = true;
  study.u_monotone = true;
  for (size_t i = 1; i < study.rows.size(); ++i) {
    if (!(study.rows[i].l1_rho_gap < study.rows[i - 1].l1_rho_gap))
      study.rho_monotone = false;
    if (!(study.rows[i].l1_u_gap < study.rows[i - 1].l1_u_gap)) study.u_monotone = false;
  }
  return study;
}

}  // namespace polyrelax
