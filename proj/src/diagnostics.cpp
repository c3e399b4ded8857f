#include "polyrelax/diagnostics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstddef>

#include "polyrelax/errors.hpp"

namespace polyrelax {

namespace {

double ordered_sum(const double* p, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += p[i];
  return s;
}

double pairwise_sum(const double* p, int n) {
  if (n <= 8) return ordered_sum(p, n);
  const int h = n / 2;
  return pairwise_sum(p, h) + pairwise_sum(p + h, n - h);
}

void require_pair(const SlabGrid& a, double ta, const SlabGrid& b, double tb) {
  if (!(a == b)) throw ConfigError("relative entropy: states live on different grids");
  if (std::abs(ta - tb) > 1e-9 * std::max(1.0, std::abs(ta)))
    throw ConfigError("relative entropy: states are at different times");
}

Mat xi_field(const EquilState& s) {
  Mat out(minors_size(s.dim), s.cells());
  for (int j = 0; j < s.cells(); ++j) out.col(j) = phi_flat(s.deformation(j));
  return out;
}

Mat centered_dx(const Mat& field, double dx) {
  const int N = static_cast<int>(field.cols());
  Mat out(field.rows(), N);
  for (int j = 0; j < N; ++j) {
    const int jm = (j + N - 1) % N;
    const int jp = (j + 1) % N;
    out.col(j) = (field.col(jp) - field.col(jm)) / (2.0 * dx);
  }
  return out;
}

Mat average_columns(const Mat& fine, int factor) {
  const int Nc = static_cast<int>(fine.cols()) / factor;
  Mat out(fine.rows(), Nc);
  for (int j = 0; j < Nc; ++j)
    out.col(j) = fine.middleCols(j * factor, factor).rowwise().mean();
  return out;
}

}  // namespace

double weighted_total(const Vec& field, double dx, bool pairwise) {
  const int n = static_cast<int>(field.size());
  return dx * (pairwise ? pairwise_sum(field.data(), n) : ordered_sum(field.data(), n));
}

HatGradients hat_gradients(const EquilState& hat) {
  HatGradients g;
  g.dv = centered_dx(hat.v, hat.grid.dx());
  g.dxi = centered_dx(xi_field(hat), hat.grid.dx());
  return g;
}

HatGradients hat_gradients_restricted(const EquilState& fine, int factor) {
  if (factor < 1 || fine.cells() % factor != 0)
    throw ConfigError("hat_gradients_restricted: factor must divide the cell count");
  const HatGradients gf = hat_gradients(fine);
  HatGradients g;
  g.dv = average_columns(gf.dv, factor);
  g.dxi = average_columns(gf.dxi, factor);
  return g;
}

EquilState restrict_state(const EquilState& fine, int factor) {
  if (factor < 1 || fine.cells() % factor != 0)
    throw ConfigError("restrict_state: factor must divide the cell count");
  EquilState out;
  out.grid = SlabGrid(fine.cells() / factor, fine.grid.x_min, fine.grid.x_max);
  out.dim = fine.dim;
  out.t = fine.t;
  out.v = average_columns(fine.v, factor);
  out.f1 = average_columns(fine.f1, factor);
  out.f_bg = fine.f_bg;
  return out;
}

ErrorTermFields error_terms(const ConstitutiveModel& model, const RelaxState& state,
                            const EquilState& hat, const HatGradients* hg) {
  require_pair(state.grid, state.t, hat.grid, hat.t);
  const int N = state.cells();
  const int d = state.dim;
  HatGradients local;
  if (hg == nullptr) {
    local = hat_gradients(hat);
    hg = &local;
  }
  ErrorTermFields out;
  out.Q1.resize(N);
  out.Q2.resize(N);
  out.Q3.resize(N);
  out.L.resize(N);
  for (int j = 0; j < N; ++j) {
    const Mat F = state.deformation(j);
    const Mat Fh = hat.deformation(j);
    const Vec xi = phi_flat(F);
    const Vec xih = phi_flat(Fh);
    const Mat J = dphi(F);
    const Mat Jh = dphi(Fh);
    const Vec g1 = model.sigma_E->grad(xi);
    const Vec gh = model.sigma_E->grad(xih);
    const Mat Hh = model.sigma_E->hess(xih);
    const Vec dsig = Hh * hg->dxi.col(j);            // d/dx1 of grad sigma_E(Xi_hat)
    const Vec rem = g1 - gh - Hh * (xi - xih);       // quadratic remainder
    const Vec T = model.sigma_I->grad(xi) + state.tau.col(j);
    double q1 = 0.0, q2 = 0.0, q3 = 0.0, l = 0.0;
    for (int i = 0; i < d; ++i) {
      const Vec dJ = J.col(i * d) - Jh.col(i * d);
      const double dv = state.v(i, j) - hat.v(i, j);
      const double dvh = hg->dv(i, j);
      q1 += dsig.dot(dJ) * dv;
      q2 += dvh * Jh.col(i * d).dot(rem);
      q3 += dvh * (g1 - gh).dot(dJ);
      l += dvh * (T - g1).dot(J.col(i * d));
    }
    out.Q1[j] = q1;
    out.Q2[j] = q2;
    out.Q3[j] = q3;
    out.L[j] = l;
  }
  return out;
}

RelEntropyReport relative_entropy(const EntropyStructure& structure,
                                  const RelaxState& state, const EquilState& hat,
                                  const HatGradients* hg) {
  require_pair(state.grid, state.t, hat.grid, hat.t);
  const ConstitutiveModel& model = structure.model();
  const int N = state.cells();
  const int d = state.dim;
  const double dx = state.grid.dx();

  RelEntropyReport rep;
  rep.e_r_field.resize(N);
  rep.flux_field.resize(N);
  Vec diss(N);
  EntropyStructure::Cursor cur;
  for (int j = 0; j < N; ++j) {
    const Mat F = state.deformation(j);
    const Mat Fh = hat.deformation(j);
    const Vec xi = phi_flat(F);
    const Vec xih = phi_flat(Fh);
    const Vec tau = state.tau.col(j);
    const Vec gh = model.sigma_E->grad(xih);
    const Vec dvd = state.v.col(j) - hat.v.col(j);
    rep.e_r_field[j] = 0.5 * dvd.squaredNorm() + structure.psi(xi, tau, &cur) -
                       model.sigma_E->value(xih) - gh.dot(xi - xih);
    const Mat J = dphi(F);
    const Vec T = model.sigma_I->grad(xi) + tau;
    double f = 0.0;
    for (int i = 0; i < d; ++i) f += (T - gh).dot(J.col(i * d)) * dvd[i];
    rep.flux_field[j] = f;
    diss[j] = structure.dissipation(xi, tau, &cur);
  }
  rep.total_e_r = weighted_total(rep.e_r_field, dx);
  rep.dissipation_total = weighted_total(diss, dx);
  const ErrorTermFields q = error_terms(model, state, hat, hg);
  rep.Q1_L1 = weighted_total(q.Q1.cwiseAbs(), dx);
  rep.Q2_L1 = weighted_total(q.Q2.cwiseAbs(), dx);
  rep.Q3_L1 = weighted_total(q.Q3.cwiseAbs(), dx);
  rep.L_L1 = weighted_total(q.L.cwiseAbs(), dx);
  return rep;
}

double relen_balance_residual(const EntropyStructure& structure,
                              const std::vector<RelaxState>& states,
                              const std::vector<EquilState>& hats, double eps) {
  if (states.size() != hats.size() || states.size() < 3)
    throw ConfigError("relen_balance_residual: need >= 3 paired snapshots");
  const ConstitutiveModel& model = structure.model();
  const size_t n = states.size();
  std::vector<double> totals(n);
  for (size_t k = 0; k < n; ++k)
    totals[k] = relative_entropy(structure, states[k], hats[k]).total_e_r;

  double worst = 0.0;
  for (size_t k = 1; k + 1 < n; ++k) {
    const double dt = states[k + 1].t - states[k - 1].t;
    if (!(dt > 0.0)) throw ConfigError("relen_balance_residual: snapshots not ordered in time");
    const double dEdt = (totals[k + 1] - totals[k - 1]) / dt;
    const RelEntropyReport rep = relative_entropy(structure, states[k], hats[k]);
    const ErrorTermFields q = error_terms(model, states[k], hats[k]);
    const double dx = states[k].grid.dx();
    const double rhs = weighted_total(q.Q1 + q.Q2 + q.Q3 + q.L, dx);
    // The flux divergence sums to zero over the periodic slab.
    const double res = dEdt + rep.dissipation_total / eps - rhs;
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

Mat chapman_enskog_tensor(const ConstitutiveModel& model, const Mat& F) {
  const Mat J = dphi(F);
  const Mat H = model.Sigma->hess(phi_flat(F));
  return J.transpose() * H * J;
}

double ellipticity_min_eig(const Mat& K) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (K + K.transpose()));
  return es.eigenvalues().minCoeff();
}

EquilRelEntropyReport equilibrium_relative_entropy(const ConstitutiveModel& model,
                                                   const EquilState& state,
                                                   const EquilState& hat,
                                                   const HatGradients* hg) {
  require_pair(state.grid, state.t, hat.grid, hat.t);
  const int N = state.cells();
  const int d = state.dim;
  const double dx = state.grid.dx();
  HatGradients local;
  if (hg == nullptr) {
    local = hat_gradients(hat);
    hg = &local;
  }

  EquilRelEntropyReport rep;
  rep.eta_field.resize(N);
  rep.flux_field.resize(N);
  rep.Q_field.resize(N);
  for (int j = 0; j < N; ++j) {
    const Mat F = state.deformation(j);
    const Mat Fh = hat.deformation(j);
    const Vec xi = phi_flat(F);
    const Vec xih = phi_flat(Fh);
    const Mat J = dphi(F);
    const Mat Jh = dphi(Fh);
    const Vec g1 = model.sigma_E->grad(xi);
    const Vec gh = model.sigma_E->grad(xih);
    const Mat Hh = model.sigma_E->hess(xih);
    const Vec dvd = state.v.col(j) - hat.v.col(j);
    rep.eta_field[j] = 0.5 * dvd.squaredNorm() + model.sigma_E->value(xi) -
                       model.sigma_E->value(xih) - gh.dot(xi - xih);
    const Vec dsig = Hh * hg->dxi.col(j);
    const Vec rem = g1 - gh - Hh * (xi - xih);
    double fq = 0.0, q = 0.0;
    for (int i = 0; i < d; ++i) {
      const Vec dJ = J.col(i * d) - Jh.col(i * d);
      fq += (g1 - gh).dot(J.col(i * d)) * dvd[i];
      q += dsig.dot(dJ) * dvd[i];                      // first term of the quadratic error
      q += hg->dv(i, j) * (g1 - gh).dot(dJ);           // second term
      q += hg->dv(i, j) * rem.dot(Jh.col(i * d));      // third term
    }
    rep.flux_field[j] = fq;
    rep.Q_field[j] = q;
  }
  rep.total_eta = weighted_total(rep.eta_field, dx);
  rep.Q_total = weighted_total(rep.Q_field, dx);
  rep.Q_L1 = weighted_total(rep.Q_field.cwiseAbs(), dx);
  return rep;
}

double equil_balance_residual(const ConstitutiveModel& model,
                              const std::vector<EquilState>& states,
                              const std::vector<EquilState>& hats) {
  if (states.size() != hats.size() || states.size() < 3)
    throw ConfigError("equil_balance_residual: need >= 3 paired snapshots");
  const size_t n = states.size();
  std::vector<double> totals(n);
  for (size_t k = 0; k < n; ++k)
    totals[k] = equilibrium_relative_entropy(model, states[k], hats[k]).total_eta;

  double worst = 0.0;
  for (size_t k = 1; k + 1 < n; ++k) {
    const double dt = states[k + 1].t - states[k - 1].t;
    if (!(dt > 0.0)) throw ConfigError("equil_balance_residual: snapshots not ordered in time");
    const double dEdt = (totals[k + 1] - totals[k - 1]) / dt;
    const EquilRelEntropyReport rep =
        equilibrium_relative_entropy(model, states[k], hats[k]);
    worst = std::max(worst, std::abs(dEdt - rep.Q_total));
  }
  return worst;
}

namespace {

template <typename State>
const State& snapshot_at(const std::vector<State>& snaps, double t) {
  for (const auto& s : snaps)
    if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return s;
  throw SolverAbort("convergence_study: missing snapshot at a comparison time");
}

}  // namespace

ConvergenceTable convergence_study(const ConstitutiveModel& model,
                                   const EntropyStructure& structure,
                                   const SlabMotion& motion, const StudyOptions& opt,
                                   const std::vector<double>& eps_list) {
  if (eps_list.empty()) throw ConfigError("convergence_study: empty eps list");
  for (size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw ConfigError("convergence_study: eps list must be strictly decreasing");
  if (opt.n_compare < 1 || opt.refine_factor < 2)
    throw ConfigError("convergence_study: need n_compare >= 1 and refine_factor >= 2");

  ConvergenceTable table;
  for (int k = 1; k <= opt.n_compare; ++k)
    table.compare_times.push_back(opt.t_end * k / opt.n_compare);

  const SlabGrid grid_c(opt.n_cells, 0.0, 1.0);
  const SlabGrid grid_f(opt.n_cells * opt.refine_factor, 0.0, 1.0);

  RunOptions ro;
  ro.t_end = opt.t_end;
  ro.cfl = opt.cfl;
  ro.muscl = opt.muscl;
  ro.w_min = opt.w_min;
  ro.snapshot_stride = 0;
  ro.target_times = table.compare_times;

  // Refined equilibrium reference, restricted per comparison time.
  const EquilTrajectory ref =
      run_equilibrium(init_equilibrium(grid_f, motion, model, opt.w_min), model, ro);
  std::vector<EquilState> hats;
  std::vector<HatGradients> hgs;
  for (double t : table.compare_times) {
    const EquilState& fine = snapshot_at(ref.snapshots, t);
    hats.push_back(restrict_state(fine, opt.refine_factor));
    hgs.push_back(hat_gradients_restricted(fine, opt.refine_factor));
  }

  // Discretization floor: the same relax scheme in its eps = 0 projection
  // limit against the same reference and functional. (Comparing two
  // equilibrium runs instead underestimates the floor: it misses the
  // systematic wave-speed/diffusion mismatch between the two solvers.)
  {
    RunOptions rf = ro;
    rf.eps = 0.0;
    rf.h_monitor = false;
    const RelaxTrajectory eq = run_relax(
        init_from_motion(grid_c, motion, model, /*prepare=*/true, nullptr, opt.w_min),
        model, structure, rf);
    double floor = 0.0;
    for (size_t k = 0; k < hats.size(); ++k) {
      const RelaxState& coarse = snapshot_at(eq.snapshots, table.compare_times[k]);
      floor = std::max(floor,
                       std::abs(relative_entropy(structure, coarse, hats[k], &hgs[k])
                                    .total_e_r));
    }
    table.floor_estimate = floor;
  }

  for (double eps : eps_list) {
    ConvergenceRow row;
    row.eps = eps;
    RunOptions rr = ro;
    rr.eps = eps;
    rr.h_monitor = false;
    try {
      const RelaxTrajectory traj = run_relax(
          init_from_motion(grid_c, motion, model, /*prepare=*/true, nullptr, opt.w_min),
          model, structure, rr);
      const double dx = grid_c.dx();
      for (size_t k = 0; k < hats.size(); ++k) {
        const RelaxState& st = snapshot_at(traj.snapshots, table.compare_times[k]);
        row.sup_e_r = std::max(
            row.sup_e_r, relative_entropy(structure, st, hats[k], &hgs[k]).total_e_r);
        // sup over comparison times of the three L2 gaps
        double v2 = 0.0, f2 = 0.0, t2 = 0.0;
        for (int j = 0; j < st.cells(); ++j) {
          v2 += (st.v.col(j) - hats[k].v.col(j)).squaredNorm() * dx;
          f2 += (st.f1.col(j) - hats[k].f1.col(j)).squaredNorm() * dx;
          const Vec tau_inf = -model.Sigma->grad(phi_flat(hats[k].deformation(j)));
          t2 += (st.tau.col(j) - tau_inf).squaredNorm() * dx;
        }
        row.v_gap = std::max(row.v_gap, std::sqrt(v2));
        row.F_gap = std::max(row.F_gap, std::sqrt(f2));
        row.tau_gap = std::max(row.tau_gap, std::sqrt(t2));
      }
      row.floor_limited =
          table.floor_estimate > 0.0 && row.sup_e_r <= opt.floor_safety * table.floor_estimate;
    } catch (const SolverAbort&) {
      row.aborted = true;
    }
    table.rows.push_back(row);
  }

  std::vector<double> xs, ys;
  for (const auto& row : table.rows)
    if (!row.aborted && !row.floor_limited && row.sup_e_r > 0.0) {
      xs.push_back(row.eps);
      ys.push_back(row.sup_e_r);
    }
  if (xs.size() >= 2) {
    table.fit = loglog_fit(xs, ys);
    table.slope_valid = true;
  }
  return table;
}

}  // namespace polyrelax
