#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "polyrelax/entropy.hpp"
#include "polyrelax/errors.hpp"
#include "polyrelax/sampling.hpp"

#include <cmath>

using namespace polyrelax;

namespace {

ModelParams quad_params(double gE, double gv, const std::string& xi0 = "identity") {
  ModelParams p;
  p.value = {{"gamma_E", gE}, {"gamma_v", gv}};
  p.xi0 = xi0;
  return p;
}

ModelParams polyquad_params() {
  ModelParams p;
  p.value = {{"a", 1.0}, {"b", 0.8}, {"c", 1.2}, {"h_coef", 0.1}, {"gamma_v", 0.5}};
  return p;
}

EntropyStructure build_default(const ConstitutiveModel& m) {
  return build_G(m, default_tau_box(m), m.xi0);
}

}  // namespace

TEST_CASE("quadratic G is the conjugate of a quadratic") {
  // Sigma = (gamma_v/2)|Xi - Xi0|^2 => G(tau) = -tau.Xi0 + |tau|^2/(2 gamma_v) + const.
  const auto m0 = builtin_model("quadratic", quad_params(3.5, 0.5, "zero"));
  const auto mi = builtin_model("quadratic", quad_params(3.5, 0.5, "identity"));
  const auto s0 = build_default(m0);
  const auto si = build_default(mi);
  const double gv = 0.5;

  Rng rng(7);
  const auto taus0 = uniform_box(s0.tau_box(), 40, rng);
  for (size_t k = 0; k + 1 < taus0.size(); ++k) {
    const Vec& t1 = taus0[k];
    const Vec& t2 = taus0[k + 1];
    const double diff = s0.G_value(t1) - s0.G_value(t2);
    const double exact = (t1.squaredNorm() - t2.squaredNorm()) / (2.0 * gv);
    CHECK(std::abs(diff - exact) <= 1e-12 * (1.0 + std::abs(exact)));
    CHECK((s0.G_grad(t1) - t1 / gv).norm() <= 1e-10);
  }
  const auto tausi = uniform_box(si.tau_box(), 20, rng);
  for (const Vec& t : tausi) {
    CHECK((si.G_grad(t) - (t / gv - mi.xi0)).norm() <= 1e-10);
    const Mat hg = si.G_hess(t);
    CHECK((hg - Mat::Identity(mi.D(), mi.D()) / gv).norm() <= 1e-10);
  }

  // Anchor normalization is exact by construction.
  const Vec tau_anchor = -mi.Sigma->grad(mi.xi0);
  CHECK(std::abs(si.psi(mi.xi0, tau_anchor) - mi.sigma_E->value(mi.xi0)) <= 1e-13);
}

TEST_CASE("gas closed form G(tau_w) = -a ln tau_w + const") {
  ModelParams p;
  p.value = {{"kappa", 1.0}, {"gamma", 2.0}, {"a", 1.0}};
  const auto gas = builtin_model("gas-lagrangean", p);
  const auto s = build_default(gas);
  const int wi = w_index(gas.dim);

  Rng rng(11);
  const auto taus = uniform_box(s.tau_box(), 50, rng);
  for (size_t k = 0; k + 1 < taus.size(); ++k) {
    const double t1 = taus[k][wi];
    const double t2 = taus[k + 1][wi];
    const double diff = s.G_value(taus[k]) - s.G_value(taus[k + 1]);
    CHECK(std::abs(diff - (-std::log(t1 / t2))) <= 1e-9);
    // G'(tau) = -1/Pinv(tau) = -a/tau for P = a rho.
    CHECK(std::abs(s.G_grad(taus[k])[wi] - (-1.0 / t1)) <= 1e-9);
    CHECK(std::abs(s.G_hess(taus[k])(wi, wi) - 1.0 / (t1 * t1)) <= 1e-8);
  }
}

TEST_CASE("round trip, prop2 and prop3 on the equilibrium manifold") {
  const auto quad = builtin_model("quadratic", quad_params(2.0, 0.5));
  const auto poly = builtin_model("polyquad", polyquad_params());
  for (const auto& m : {quad, poly}) {
    const auto s = build_default(m);
    Rng rng(23);
    const auto pts = latin_hypercube(m.box, 200, rng);
    EntropyStructure::Cursor cur;
    for (const Vec& xi : pts) {
      const Vec p = m.Sigma->grad(xi);
      const Vec back = s.invert(p, &cur);
      CHECK((m.Sigma->grad(back) - p).norm() <= 1e-9);

      const Vec tau_star = -p;
      // (prop2): d Psi / d tau = Xi + grad G(tau) vanishes at tau = -grad Sigma(Xi).
      CHECK((xi + s.G_grad(tau_star, &cur)).norm() <= 1e-8);
      // (prop3): Psi on the equilibrium manifold reduces to sigma_E.
      CHECK(std::abs(s.psi(xi, tau_star, &cur) - m.sigma_E->value(xi)) <=
            1e-8 * (1.0 + std::abs(m.sigma_E->value(xi))));
    }
  }
}

TEST_CASE("finite-difference identities for psi") {
  const auto poly = builtin_model("polyquad", polyquad_params());
  const auto s = build_default(poly);
  Rng rng(31);
  const auto xis = latin_hypercube(poly.box, 5, rng);
  const auto taus = uniform_box(s.tau_box(), 5, rng);
  const double h = 1e-5;
  for (int k = 0; k < 5; ++k) {
    const Vec& xi = xis[k];
    const Vec& tau = taus[k];
    // (entrodef)_1: d Psi / d Xi = grad sigma_I + tau.
    const Vec gi = poly.sigma_I->grad(xi);
    for (int i = 0; i < poly.D(); ++i) {
      Vec xp = xi, xm = xi;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (s.psi(xp, tau) - s.psi(xm, tau)) / (2.0 * h);
      CHECK(std::abs(fd - (gi[i] + tau[i])) <= 1e-6 * (1.0 + std::abs(gi[i] + tau[i])));
    }
    // d Psi / d tau = Xi + grad G.
    const Vec gg = s.G_grad(tau);
    for (int i = 0; i < poly.D(); ++i) {
      Vec tp = tau, tm = tau;
      tp[i] += h;
      tm[i] -= h;
      const double fd = (s.psi(xi, tp) - s.psi(xi, tm)) / (2.0 * h);
      CHECK(std::abs(fd - (xi[i] + gg[i])) <= 1e-6 * (1.0 + std::abs(xi[i] + gg[i])));
    }
  }
}

TEST_CASE("(prop1)_2: G Hessian inverts the Sigma Hessian") {
  const auto poly = builtin_model("polyquad", polyquad_params());
  ModelParams gp;
  gp.value = {{"kappa", 1.0}, {"gamma", 2.0}, {"a", 1.0}};
  const auto gas = builtin_model("gas-lagrangean", gp);
  for (const auto& m : {poly, gas}) {
    const auto s = build_default(m);
    Rng rng(41);
    const auto taus = uniform_box(s.tau_box(), 50, rng);
    EntropyStructure::Cursor cur;
    for (const Vec& tau : taus) {
      const Vec xi_star = -s.G_grad(tau, &cur);
      const Mat hg = s.G_hess(tau, &cur);
      const Mat hs = m.Sigma->hess(xi_star);
      if (m.w_only) {
        const int wi = w_index(m.dim);
        CHECK(std::abs(hg(wi, wi) * hs(wi, wi) - 1.0) <= 1e-7);
      } else {
        CHECK((hg * hs - Mat::Identity(m.D(), m.D())).norm() <= 1e-7);
      }
    }
  }
}

TEST_CASE("dissipation: equilibrium zero, quadratic closed form, lower bound") {
  const auto quad = builtin_model("quadratic", quad_params(2.0, 0.5));
  const auto poly = builtin_model("polyquad", polyquad_params());
  for (const auto& m : {quad, poly}) {
    const auto s = build_default(m);
    Rng rng(53);
    const auto xis = latin_hypercube(m.box, 100, rng);
    const auto taus = uniform_box(s.tau_box(), 100, rng);
    EntropyStructure::Cursor cur;
    for (int k = 0; k < 100; ++k) {
      const Vec& xi = xis[k];
      const Vec& tau = taus[k];
      const double d = s.dissipation(xi, tau, &cur);
      const Vec resid = tau + m.Sigma->grad(xi);
      // Sigma is quadratic for both families: the bound is an identity.
      CHECK(d >= resid.squaredNorm() / m.gamma_v - 1e-10);
      CHECK(std::abs(d - resid.squaredNorm() / m.gamma_v) <=
            1e-12 * (1.0 + std::abs(d)));
      CHECK(std::abs(s.dissipation(xi, -m.Sigma->grad(xi), &cur)) <= 1e-12);
    }
  }
}

TEST_CASE("Psi Hessian: 3 - sqrt(2) oracle and polyquad positivity") {
  CHECK(std::abs(delta_estimate(4.0, 0.5) - (3.0 - std::sqrt(2.0))) <= 1e-15);

  // gamma_E = 3.5, gamma_v = 0.5 => gamma_I = 4; blocks [4I, I; I, 2I].
  const auto quad = builtin_model("quadratic", quad_params(3.5, 0.5));
  const auto s = build_default(quad);
  Rng rng(61);
  const auto xis = latin_hypercube(quad.box, 10, rng);
  const auto taus = uniform_box(s.tau_box(), 10, rng);
  for (int k = 0; k < 10; ++k) {
    const double lam = s.hessian_psi_min_eig(xis[k], taus[k]);
    CHECK(std::abs(lam - (3.0 - std::sqrt(2.0))) <= 1e-10);
  }

  const auto poly = builtin_model("polyquad", polyquad_params());
  const auto sp = build_default(poly);
  const auto pxis = latin_hypercube(poly.box, 50, rng);
  EntropyStructure::Cursor cur;
  for (const Vec& xi : pxis) {
    const Vec tau_star = -poly.Sigma->grad(xi);
    CHECK(sp.hessian_psi_min_eig(xi, tau_star, &cur) > 0.0);
  }
}

TEST_CASE("violated (h1) toy model reports a nonconvex Psi Hessian") {
  // sigma_I = 0.2|Xi|^2, sigma_E = -0.05|Xi|^2: Sigma = 0.25|Xi|^2 is convex
  // (G exists) but gamma_I = 0.4 < gamma_v = 0.5 breaks (h1).
  const int d = 3;
  const int n = minors_size(d);
  auto sI = std::make_shared<QuadraticPotential>(0.4, Vec::Zero(n), d);
  auto sE = std::make_shared<QuadraticPotential>(-0.1, Vec::Zero(n), d);
  const auto m = make_model(d, "toy", sI, sE, 0.4, 0.5, 0.1, Vec::Zero(n),
                            Box::centered(Vec::Zero(n), 0.5));
  const auto s = build_default(m);
  const double expect = delta_estimate(0.4, 0.5);
  CHECK(expect < 0.0);
  Vec tau = Vec::Zero(n);
  tau[0] = 0.1;
  Vec xi = Vec::Zero(n);
  xi[1] = 0.2;
  CHECK(std::abs(s.hessian_psi_min_eig(xi, tau) - expect) <= 1e-10);
}

TEST_CASE("check_char certifies the built-in families") {
  const auto quad = builtin_model("quadratic", quad_params(2.0, 0.5));
  const auto poly = builtin_model("polyquad", polyquad_params());
  ModelParams gp;
  gp.value = {{"kappa", 1.0}, {"gamma", 2.0}, {"a", 1.0}};
  const auto gas = builtin_model("gas-lagrangean", gp);
  for (const auto& m : {quad, poly, gas}) {
    const auto s = build_default(m);
    const auto rep = check_char(s, 100);
    CHECK(rep.pass);
    CHECK(rep.zero_set_xi_max <= 1e-9);
    CHECK(rep.zero_set_tau_max <= 1e-9);
    CHECK(rep.min_eig_Sigma > 0.0);
    CHECK(rep.min_eig_G > 0.0);
    CHECK(rep.ineq2_min >= -1e-12);
    CHECK(rep.monotone_min >= -1e-12);
    CHECK(rep.convexity_gap_min >= -1e-7);
  }
}

TEST_CASE("inversion failure outside the image") {
  ModelParams gp;
  gp.value = {{"kappa", 1.0}, {"gamma", 2.0}, {"a", 1.0}};
  const auto gas = builtin_model("gas-lagrangean", gp);
  // grad Sigma image on w > 0 is (-inf, 0): a positive w-slot target fails.
  Vec p = Vec::Zero(gas.D());
  p[w_index(gas.dim)] = 0.5;
  CHECK_THROWS_AS(invert_grad_sigma(gas, p), NoConvergenceError);
  // Nonzero component outside the w-subspace is not representable either.
  Vec q = Vec::Zero(gas.D());
  q[0] = 1.0;
  q[w_index(gas.dim)] = -1.0;
  CHECK_THROWS_AS(invert_grad_sigma(gas, q), NoConvergenceError);
}

TEST_CASE("warm start does not change results") {
  const auto poly = builtin_model("polyquad", polyquad_params());
  const auto s = build_default(poly);
  Rng rng(71);
  const auto taus = uniform_box(s.tau_box(), 30, rng);
  EntropyStructure::Cursor cur;
  for (const Vec& tau : taus) {
    const Vec warm = s.G_grad(tau, &cur);
    const Vec cold = s.G_grad(tau);
    CHECK((warm - cold).norm() <= 1e-9);
    CHECK(std::abs(s.G_value(tau, &cur) - s.G_value(tau)) <= 1e-9);
  }
}

TEST_CASE("default_tau_box covers the equilibrium image") {
  const auto quad = builtin_model("quadratic", quad_params(2.0, 0.5));
  const auto box = default_tau_box(quad);
  Rng rng(83);
  const auto pts = latin_hypercube(quad.box, 100, rng);
  for (const Vec& xi : pts) {
    CHECK(box.contains(-quad.Sigma->grad(xi), 1e-12));
  }
}
