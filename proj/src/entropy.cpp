#include "polyrelax/entropy.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "polyrelax/sampling.hpp"

namespace polyrelax {

namespace {

NewtonOptions newton_for(const ConstitutiveModel& model) {
  NewtonOptions opts;
  if (model.w_only) {
    opts.active_index = w_index(model.dim);
    opts.active_lower = 1e-10;
  }
  return opts;
}

// Smallest / largest eigenvalue of a symmetric matrix, restricted to the
// w-slot for w-only models (off-slot rows are identically zero there).
double sym_min_eig(const Mat& h, const ConstitutiveModel& model) {
  if (model.w_only) return h(w_index(model.dim), w_index(model.dim));
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  return es.eigenvalues().minCoeff();
}

double sym_max_eig(const Mat& h, const ConstitutiveModel& model) {
  if (model.w_only) return h(w_index(model.dim), w_index(model.dim));
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

Vec invert_grad_sigma(const ConstitutiveModel& model, const Vec& p) {
  return newton_invert_gradient(*model.Sigma, p, model.xi0, newton_for(model));
}

Vec EntropyStructure::invert(const Vec& p, Cursor* cursor) const {
  const Vec guess = (cursor && cursor->valid) ? cursor->xi : anchor_;
  Vec xi = newton_invert_gradient(*model_.Sigma, p, guess, newton_);
  if (cursor) {
    cursor->xi = xi;
    cursor->valid = true;
  }
  return xi;
}

Vec EntropyStructure::G_grad(const Vec& tau, Cursor* cursor) const {
  return -invert(-tau, cursor);
}

double EntropyStructure::G_value(const Vec& tau, Cursor* cursor) const {
  // Legendre transform of Sigma at p = -tau: p.Xi(p) - Sigma(Xi(p)).
  const Vec xi = invert(-tau, cursor);
  return -tau.dot(xi) - model_.Sigma->value(xi) + normalization_;
}

Mat EntropyStructure::G_hess(const Vec& tau, Cursor* cursor) const {
  const Vec xi = invert(-tau, cursor);
  const Mat hs = model_.Sigma->hess(xi);
  const int n = model_.D();
  Mat out = Mat::Zero(n, n);
  if (model_.w_only) {
    const int k = w_index(model_.dim);
    out(k, k) = 1.0 / hs(k, k);
  } else {
    out = hs.ldlt().solve(Mat::Identity(n, n));
  }
  return out;
}

double EntropyStructure::psi(const Vec& xi, const Vec& tau, Cursor* cursor) const {
  return model_.sigma_I->value(xi) + xi.dot(tau) + G_value(tau, cursor);
}

double EntropyStructure::dissipation(const Vec& xi, const Vec& tau, Cursor* cursor) const {
  const Vec lhs = xi + G_grad(tau, cursor);
  const Vec rhs = tau + model_.Sigma->grad(xi);
  return lhs.dot(rhs);
}

double EntropyStructure::hessian_psi_min_eig(const Vec& xi, const Vec& tau,
                                             Cursor* cursor) const {
  const Mat hg = G_hess(tau, cursor);
  const Mat hi = model_.sigma_I->hess(xi);
  if (model_.w_only) {
    const int k = w_index(model_.dim);
    Mat block(2, 2);
    block << hi(k, k), 1.0, 1.0, hg(k, k);
    Eigen::SelfAdjointEigenSolver<Mat> es(block);
    return es.eigenvalues().minCoeff();
  }
  const int n = model_.D();
  Mat block = Mat::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = hi;
  block.bottomRightCorner(n, n) = hg;
  block.topRightCorner(n, n) = Mat::Identity(n, n);
  block.bottomLeftCorner(n, n) = Mat::Identity(n, n);
  Eigen::SelfAdjointEigenSolver<Mat> es(block);
  return es.eigenvalues().minCoeff();
}

EntropyStructure build_G(const ConstitutiveModel& model, const Box& tau_box,
                         const Vec& anchor) {
  if (anchor.size() != model.D()) throw std::invalid_argument("build_G: anchor size");
  if (tau_box.dim() != model.D()) throw std::invalid_argument("build_G: tau box size");
  EntropyStructure s;
  s.model_ = model;
  s.tau_box_ = tau_box;
  s.anchor_ = anchor;
  s.newton_ = newton_for(model);
  s.normalization_ = 0.0;
  // Pin the additive constant of G so that Psi(anchor, -grad Sigma(anchor))
  // equals sigma_E(anchor) exactly.
  const Vec tau_eq = -model.Sigma->grad(anchor);
  const double raw = s.psi(anchor, tau_eq, nullptr);
  s.normalization_ = model.sigma_E->value(anchor) - raw;
  return s;
}

Box default_tau_box(const ConstitutiveModel& model, int n_samples, uint64_t seed) {
  Rng rng(seed);
  const auto points = latin_hypercube(model.box, n_samples, rng);
  const int n = model.D();
  Vec lo = Vec::Constant(n, 1e300);
  Vec hi = Vec::Constant(n, -1e300);
  for (const auto& xi : points) {
    const Vec tau = -model.Sigma->grad(xi);
    lo = lo.cwiseMin(tau);
    hi = hi.cwiseMax(tau);
  }
  // Pad by 5% of the spread (absolute floor keeps degenerate slots usable).
  for (int i = 0; i < n; ++i) {
    const double pad = 0.05 * (hi[i] - lo[i]);
    lo[i] -= pad;
    hi[i] += pad;
  }
  Box box;
  box.lo = lo;
  box.hi = hi;
  return box;
}

double delta_estimate(double gamma_I, double gamma_v) {
  const double a = gamma_I;
  const double b = 1.0 / gamma_v;
  const double mid = 0.5 * (a + b);
  const double off = 0.5 * (a - b);
  return mid - std::sqrt(off * off + 1.0);
}

CharReport check_char(const EntropyStructure& structure, int n_samples, uint64_t seed) {
  const ConstitutiveModel& model = structure.model();
  CharReport rep;
  rep.n_samples = n_samples;
  Rng rng(seed);
  const auto xi_pts = latin_hypercube(model.box, n_samples, rng);
  const auto tau_pts = latin_hypercube(structure.tau_box(), n_samples, rng);

  rep.min_eig_Sigma = 1e300;
  rep.min_eig_G = 1e300;
  rep.convexity_gap_min = 1e300;
  rep.ineq2_min = 1e300;
  rep.monotone_min = 1e300;

  EntropyStructure::Cursor cur;
  for (int i = 0; i < n_samples; ++i) {
    const Vec& xi = xi_pts[i];
    const Vec& tau = tau_pts[i];

    // Zero set of D traced both ways.
    const Vec tau_star = -model.Sigma->grad(xi);
    const Vec back_xi = -structure.G_grad(tau_star, &cur);
    rep.zero_set_xi_max = std::max(rep.zero_set_xi_max, (xi - back_xi).norm());
    const Vec xi_star = -structure.G_grad(tau, &cur);
    const Vec back_tau = -model.Sigma->grad(xi_star);
    rep.zero_set_tau_max = std::max(rep.zero_set_tau_max, (tau - back_tau).norm());

    const Mat hs = model.Sigma->hess(xi);
    rep.min_eig_Sigma = std::min(rep.min_eig_Sigma, sym_min_eig(hs, model));

    const Mat hg = structure.G_hess(tau, &cur);
    const double eig_g = sym_min_eig(hg, model);
    rep.min_eig_G = std::min(rep.min_eig_G, eig_g);
    const Mat hs_star = model.Sigma->hess(xi_star);
    rep.convexity_gap_min =
        std::min(rep.convexity_gap_min, eig_g - 1.0 / sym_max_eig(hs_star, model));

    rep.ineq2_min = std::min(rep.ineq2_min, structure.dissipation(xi, tau, &cur));

    const Vec& xi2 = xi_pts[(i + 1) % n_samples];
    const Vec dg = model.Sigma->grad(xi) - model.Sigma->grad(xi2);
    rep.monotone_min = std::min(rep.monotone_min, (xi - xi2).dot(dg));
  }

  rep.pass = rep.zero_set_xi_max <= 1e-9 && rep.zero_set_tau_max <= 1e-9 &&
             rep.min_eig_Sigma > 0.0 && rep.min_eig_G > 0.0 &&
             rep.convexity_gap_min >= -1e-7 && rep.ineq2_min >= -1e-12 &&
             rep.monotone_min >= -1e-12;
  return rep;
}

}  // namespace polyrelax
