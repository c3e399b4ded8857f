#include "polyrelax/constitutive.hpp"

#include "polyrelax/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace polyrelax {

namespace {

Vec reference_point(int d, const std::string& kind) {
  if (kind == "identity") return phi_flat(Mat::Identity(d, d));
  if (kind == "zero") return Vec::Zero(minors_size(d));
  throw std::invalid_argument("builtin_model: xi0 must be 'identity' or 'zero'");
}

double spectral_norm(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Hessian eigenvalue range restricted to the model's active subspace.
std::pair<double, double> eig_range(const ConstitutiveModel& model, const Mat& H) {
  if (model.w_only) {
    const double h = H(w_index(model.dim), w_index(model.dim));
    return {h, h};
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace

double ModelParams::get(const std::string& key, double fallback) const {
  const auto it = value.find(key);
  return it == value.end() ? fallback : it->second;
}

double ModelParams::require(const std::string& key) const {
  const auto it = value.find(key);
  if (it == value.end())
    throw std::invalid_argument("builtin_model: missing parameter '" + key + "'");
  return it->second;
}

ConstitutiveModel make_model(int dim, std::string family, PotentialPtr sigma_I,
                             PotentialPtr sigma_E, double gamma_I, double gamma_v,
                             double M, Vec xi0, Box box, bool w_only) {
  if (!sigma_I || !sigma_E) throw std::invalid_argument("make_model: null potentials");
  if (sigma_I->dim() != dim || sigma_E->dim() != dim)
    throw std::invalid_argument("make_model: potential dimension mismatch");
  ConstitutiveModel m;
  m.dim = dim;
  m.family = std::move(family);
  m.sigma_I = sigma_I;
  m.sigma_E = sigma_E;
  m.Sigma = std::make_shared<SumPotential>(
      std::vector<std::pair<double, PotentialPtr>>{{1.0, sigma_I}, {-1.0, sigma_E}});
  m.gamma_I = gamma_I;
  m.gamma_v = gamma_v;
  m.M = M;
  m.w_only = w_only;
  m.xi0 = std::move(xi0);
  m.box = std::move(box);
  return m;
}

PressureLaw gas_equilibrium_pressure(double kappa, double gamma) {
  return PressureLaw({{kappa, gamma}});
}

PressureLaw gas_instantaneous_pressure(double kappa, double gamma, double a, double beta) {
  if (std::abs(beta - gamma) < 1e-14) return PressureLaw({{kappa + a, gamma}});
  return PressureLaw({{kappa, gamma}, {a, beta}});
}

ConstitutiveModel builtin_model(const std::string& name, const ModelParams& params) {
  const int d = params.dim;
  if (d != 2 && d != 3) throw std::invalid_argument("builtin_model: dim must be 2 or 3");
  const int D = minors_size(d);

  if (name == "quadratic") {
    const double gE = params.require("gamma_E");
    const double gv = params.require("gamma_v");
    if (gE <= 0 || gv <= 0)
      throw std::invalid_argument("builtin_model: quadratic needs gamma_E, gamma_v > 0");
    const Vec xi0 = reference_point(d, params.xi0);
    const auto sE = std::make_shared<QuadraticPotential>(gE, xi0, d);
    const auto sI = std::make_shared<QuadraticPotential>(gE + gv, xi0, d);
    const Box box = Box::centered(xi0, params.box_halfwidth.value_or(0.5));
    return make_model(d, "quadratic", sI, sE, gE + gv, gv, gE, xi0, box);
  }

  if (name == "polyquad") {
    const double a = params.get("a", 1.0);
    const double b = params.get("b", 1.0);
    const double c = params.get("c", 1.0);
    const double h = params.get("h_coef", 0.1);
    const double gv = params.require("gamma_v");
    if (a <= 0 || c <= 0 || h < 0 || gv <= 0 || (d == 3 && b <= 0))
      throw std::invalid_argument("builtin_model: polyquad coefficients must be positive");
    const Vec xi0 = reference_point(d, params.xi0);
    const auto sE = std::make_shared<PolyquadEnergy>(a, b, c, h, d);
    const auto sI = std::make_shared<SumPotential>(std::vector<std::pair<double, PotentialPtr>>{
        {1.0, sE},
        {1.0, std::make_shared<QuadraticPotential>(gv, Vec::Zero(D), d)}});
    const double hw = params.box_halfwidth.value_or(5.0);
    const Box box = Box::centered(Vec::Zero(D), hw);
    // Curvature extremes of the w-slot over the box: 2c + h*cosh(w-1).
    const double wlo = box.lo[w_index(d)], whi = box.hi[w_index(d)];
    const double dlo = (wlo <= 1.0 && 1.0 <= whi)
                           ? 0.0
                           : std::min(std::abs(wlo - 1.0), std::abs(whi - 1.0));
    const double dhi = std::max(std::abs(wlo - 1.0), std::abs(whi - 1.0));
    double eig_lo = std::min(a, 2.0 * c + h * std::cosh(dlo));
    double eig_hi = std::max(a, 2.0 * c + h * std::cosh(dhi));
    if (d == 3) {
      eig_lo = std::min(eig_lo, b);
      eig_hi = std::max(eig_hi, b);
    }
    const double M = std::max(eig_hi, h * std::sinh(dhi));
    return make_model(d, "polyquad", sI, sE, gv + eig_lo, gv, M, xi0, box);
  }

  if (name == "gas-lagrangean") {
    const double kappa = params.get("kappa", 1.0);
    const double gamma = params.get("gamma", 2.0);
    const double a = params.get("a", 1.0);
    const double beta = params.get("beta", 1.0);
    const double rho_lo = params.get("rho_lo", 0.5);
    const double rho_hi = params.get("rho_hi", 2.0);
    if (kappa <= 0 || gamma <= 0 || a <= 0 || beta <= 0 || rho_lo <= 0 || rho_hi <= rho_lo)
      throw std::invalid_argument("builtin_model: gas-lagrangean parameters out of range");
    const PressureLaw pE = gas_equilibrium_pressure(kappa, gamma);
    const PressureLaw pI = gas_instantaneous_pressure(kappa, gamma, a, beta);
    const PressureLaw P = PressureLaw::difference(pI, pE);
    const double w_lo = 1.0 / rho_hi, w_hi = 1.0 / rho_lo;
    // (a0)/(a1) on the box, scanned densely, are build-time preconditions.
    double gI = 1e300, gv = 0.0, M = 0.0;
    const int n_scan = 2001;
    for (int i = 0; i < n_scan; ++i) {
      const double w = w_lo + (w_hi - w_lo) * i / (n_scan - 1);
      const double rho = 1.0 / w;
      if (!(pI.p(rho) > 0 && pE.p(rho) > 0 && pI.dp(rho) > 0 && pE.dp(rho) > 0))
        throw std::invalid_argument("builtin_model: gas-lagrangean violates positivity on box");
      if (!(P.dp(rho) > 0))
        throw std::invalid_argument(
            "builtin_model: gas-lagrangean pressure difference not increasing on box");
      gI = std::min(gI, pI.d2sigma(w));
      gv = std::max(gv, P.d2sigma(w));
      const double sE2 = pE.d2sigma(w);
      const double sE3 = -pE.d2p(rho) / (w * w * w * w) - 2.0 * pE.dp(rho) / (w * w * w);
      M = std::max({M, std::abs(sE2), std::abs(sE3)});
    }
    const auto sI = std::make_shared<WOnlyPotential>(
        [pI](double w) { return pI.sigma(w); }, [pI](double w) { return pI.dsigma(w); },
        [pI](double w) { return pI.d2sigma(w); }, d);
    const auto sE = std::make_shared<WOnlyPotential>(
        [pE](double w) { return pE.sigma(w); }, [pE](double w) { return pE.dsigma(w); },
        [pE](double w) { return pE.d2sigma(w); }, d);
    const Vec xi0 = reference_point(d, "identity");
    Box box;
    box.lo = xi0;
    box.hi = xi0;
    box.lo[w_index(d)] = w_lo;
    box.hi[w_index(d)] = w_hi;
    return make_model(d, "gas-lagrangean", sI, sE, gI, gv, M, xi0, box, /*w_only=*/true);
  }

  throw std::invalid_argument("builtin_model: unknown family '" + name + "'");
}

Vec newton_invert_gradient(const Potential& pot, const Vec& p, const Vec& guess,
                           const NewtonOptions& opts) {
  if (p.size() != pot.size() || guess.size() != pot.size())
    throw std::invalid_argument("newton_invert_gradient: size mismatch");

  if (opts.active_index >= 0) {
    // Single-slot solve; the target must lie in the potential's image, which
    // has zero components off the active slot.
    const int k = opts.active_index;
    for (int i = 0; i < p.size(); ++i) {
      if (i != k && std::abs(p[i]) > std::max(1e-9, 10.0 * opts.tol))
        throw NoConvergenceError("newton_invert_gradient: target outside w-only image");
    }
    Vec x = guess;
    double r = pot.grad(x)[k] - p[k];
    for (int it = 0; it < opts.max_iter; ++it) {
      if (std::abs(r) <= opts.tol) return x;
      const double h = pot.hess(x)(k, k);
      if (!(std::abs(h) > 0.0) || !std::isfinite(h))
        throw NoConvergenceError("newton_invert_gradient: singular scalar Hessian");
      double step = -r / h;
      double lambda = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        const double xn = x[k] + lambda * step;
        if (xn <= opts.active_lower) {
          lambda *= 0.5;
          continue;
        }
        Vec xt = x;
        xt[k] = xn;
        double rn;
        try {
          rn = pot.grad(xt)[k] - p[k];
        } catch (const std::domain_error&) {
          lambda *= 0.5;
          continue;
        }
        if (std::abs(rn) <= (1.0 - 1e-4 * lambda) * std::abs(r)) {
          x = xt;
          r = rn;
          accepted = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!accepted) throw NoConvergenceError("newton_invert_gradient: line search stalled");
    }
    if (std::abs(r) <= opts.tol) return x;
    throw NoConvergenceError("newton_invert_gradient: no convergence");
  }

  Vec x = guess;
  Vec r = pot.grad(x) - p;
  double rn = r.norm();
  for (int it = 0; it < opts.max_iter; ++it) {
    if (rn <= opts.tol) return x;
    const Mat H = pot.hess(x);
    const Vec step = H.ldlt().solve(-r);
    if (!step.allFinite())
      throw NoConvergenceError("newton_invert_gradient: singular Hessian");
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vec xn = x + lambda * step;
      Vec rv;
      try {
        rv = pot.grad(xn) - p;
      } catch (const std::domain_error&) {
        lambda *= 0.5;
        continue;
      }
      const double nn = rv.norm();
      if (nn <= (1.0 - 1e-4 * lambda) * rn) {
        x = xn;
        r = rv;
        rn = nn;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) throw NoConvergenceError("newton_invert_gradient: line search stalled");
  }
  if (rn <= opts.tol) return x;
  throw NoConvergenceError("newton_invert_gradient: no convergence");
}

H0Report check_h0(const ConstitutiveModel& model, const Box& sample_box, int n_samples,
                  uint64_t seed) {
  if (sample_box.dim() != model.D())
    throw std::invalid_argument("check_h0: box dimension mismatch");
  Rng rng(seed);
  const auto samples = latin_hypercube(sample_box, n_samples, rng);

  H0Report rep;
  rep.box = sample_box;
  rep.subspace = model.w_only ? "w" : "full";
  rep.min_eig_Sigma = 1e300;

  // (i) curvature evidence.
  std::vector<Vec> images;
  images.reserve(samples.size());
  for (const auto& xi : samples) {
    rep.min_eig_Sigma = std::min(rep.min_eig_Sigma, eig_range(model, model.Sigma->hess(xi)).first);
    images.push_back(model.Sigma->grad(xi));
  }

  // (ii) surjectivity evidence: invert grad Sigma at targets inside the
  // bounding box of the sampled image.
  Box image_box;
  image_box.lo = images.front();
  image_box.hi = images.front();
  for (const auto& g : images) {
    image_box.lo = image_box.lo.cwiseMin(g);
    image_box.hi = image_box.hi.cwiseMax(g);
  }
  NewtonOptions opts;
  if (model.w_only) {
    opts.active_index = w_index(model.dim);
    opts.active_lower = 1e-10;
  }
  const auto targets = latin_hypercube(image_box, n_samples, rng);
  for (const auto& p : targets) {
    try {
      const Vec xi = newton_invert_gradient(*model.Sigma, p, model.xi0, opts);
      const double res = (model.Sigma->grad(xi) - p).norm();
      rep.max_roundtrip_residual = std::max(rep.max_roundtrip_residual, res);
      ++rep.inversions_ok;
    } catch (const NoConvergenceError&) {
      ++rep.inversions_failed;
    }
  }
  return rep;
}

H1Report check_h1(const ConstitutiveModel& model, int n_samples, uint64_t seed) {
  Rng rng(seed);
  const auto samples = latin_hypercube(model.box, n_samples, rng);
  H1Report rep;
  rep.subspace = model.w_only ? "w" : "full";
  rep.gamma_I_est = 1e300;
  rep.gamma_v_est = -1e300;
  rep.min_eig_sigma_E = 1e300;
  for (const auto& xi : samples) {
    rep.gamma_I_est = std::min(rep.gamma_I_est, eig_range(model, model.sigma_I->hess(xi)).first);
    rep.gamma_v_est = std::max(rep.gamma_v_est, eig_range(model, model.Sigma->hess(xi)).second);
    rep.min_eig_sigma_E =
        std::min(rep.min_eig_sigma_E, eig_range(model, model.sigma_E->hess(xi)).first);
  }
  rep.pass = rep.gamma_I_est > rep.gamma_v_est && rep.gamma_v_est > 0.0 &&
             rep.gamma_I_est >= model.gamma_I - 1e-9 && rep.gamma_v_est <= model.gamma_v + 1e-9;
  return rep;
}

H2Report check_h2(const ConstitutiveModel& model, int n_samples, uint64_t seed) {
  Rng rng(seed);
  const auto samples = latin_hypercube(model.box, n_samples, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  H2Report rep;
  const double h = 1e-4;
  for (const auto& xi : samples) {
    Mat H0;
    if (model.w_only) {
      const int k = w_index(model.dim);
      H0 = Mat::Constant(1, 1, model.sigma_E->hess(xi)(k, k));
      Vec xp = xi;
      xp[k] += h;
      const Mat H1 = Mat::Constant(1, 1, model.sigma_E->hess(xp)(k, k));
      rep.third_fd_max = std::max(rep.third_fd_max, std::abs((H1(0, 0) - H0(0, 0)) / h));
    } else {
      H0 = model.sigma_E->hess(xi);
      Vec u(xi.size());
      for (int i = 0; i < u.size(); ++i) u[i] = gauss(rng);
      u.normalize();
      const Mat H1 = model.sigma_E->hess(xi + h * u);
      rep.third_fd_max = std::max(rep.third_fd_max, spectral_norm((H1 - H0) / h));
    }
    rep.hess_norm_max = std::max(rep.hess_norm_max, spectral_norm(H0));
  }
  rep.M_est = std::max(rep.hess_norm_max, rep.third_fd_max);
  return rep;
}

}  // namespace polyrelax
