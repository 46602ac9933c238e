#include "fkrig/kron_kriging.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "fkrig/errors.hpp"

namespace fkrig {

namespace {

MatrixXd column_as_grid(const MatrixXd& v, Index l, Index n, Index m) {
  MatrixXd out(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      out(i, j) = v(i * m + j, l);
    }
  }
  return out;
}

MatrixXd mean_grid(const MatrixXd& v, const VectorXd& mu, Index n, Index m) {
  const VectorXd flat = v * mu;
  MatrixXd out(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      out(i, j) = flat(i * m + j);
    }
  }
  return out;
}

void check_shapes(std::span<const MatrixXd> ys, const MatrixXd& v, Index n, Index m) {
  if (ys.empty()) {
    throw DimensionMismatch("no response matrices supplied");
  }
  for (const auto& y : ys) {
    if (y.rows() != n || y.cols() != m) {
      throw DimensionMismatch("response matrix is " + std::to_string(y.rows()) + "x" +
                              std::to_string(y.cols()) + ", expected " + std::to_string(n) + "x" +
                              std::to_string(m));
    }
  }
  if (v.rows() != n * m) {
    throw DimensionMismatch("basis matrix has " + std::to_string(v.rows()) + " rows, expected " +
                            std::to_string(n * m));
  }
}

// Pieces of the GLS normal equations shared by estimation and prediction.
struct NormalSystem {
  std::vector<MatrixXd> v_cols;
  std::vector<MatrixXd> rinv_v;
  MatrixXd a;
};

NormalSystem normal_system(const MatrixXd& v, const SpdFactor& rx, const StructuredCorrT& rt) {
  const Index n = rx.size();
  const Index m = rt.size();
  const Index l_count = v.cols();
  NormalSystem sys;
  sys.a.resize(l_count, l_count);
  for (Index l = 0; l < l_count; ++l) {
    sys.v_cols.push_back(column_as_grid(v, l, n, m));
    sys.rinv_v.push_back(kron_solve(rx, rt, sys.v_cols.back()));
  }
  for (Index l = 0; l < l_count; ++l) {
    for (Index k = 0; k <= l; ++k) {
      const double s = 0.5 * ((sys.v_cols[static_cast<size_t>(k)].array() *
                               sys.rinv_v[static_cast<size_t>(l)].array())
                                  .sum() +
                              (sys.v_cols[static_cast<size_t>(l)].array() *
                               sys.rinv_v[static_cast<size_t>(k)].array())
                                  .sum());
      sys.a(l, k) = sys.a(k, l) = s;
    }
  }
  return sys;
}

SpdFactor factor_normal(const MatrixXd& a) {
  try {
    return SpdFactor(a);
  } catch (const SingularMatrix&) {
    throw RankDeficientBasis("basis matrix V'R^-1 V is singular; remove redundant mean terms");
  }
}

VectorXd solve_mu(const NormalSystem& sys, const SpdFactor& normal, std::span<const MatrixXd> ys) {
  VectorXd b = VectorXd::Zero(sys.a.rows());
  for (const auto& y : ys) {
    for (Index l = 0; l < b.size(); ++l) {
      b(l) += (y.array() * sys.rinv_v[static_cast<size_t>(l)].array()).sum();
    }
  }
  b /= static_cast<double>(ys.size());
  return normal.solve(b);
}

struct Profile {
  double objective = 0.0;
  VectorXd mu;
  double sigma2 = 0.0;
};

Profile profile(const CorrParams& xi, const Design& design, const VectorXd& grid,
                std::span<const MatrixXd> ys, const MatrixXd& v) {
  const SpdFactor rx = build_R_x(design, xi);
  const StructuredCorrT rt = build_R_t(grid, xi.beta, xi.d, xi.nugget);
  Profile p;
  p.mu = gls_mu(ys, v, rx, rt);
  p.sigma2 = std::max(sigma2_hat(ys, v, p.mu, rx, rt), kSigma2Floor);
  const double big_n = static_cast<double>(rx.size() * rt.size());
  p.objective = big_n * std::log(p.sigma2) + logdet_kron(rx, rt);
  return p;
}

}  // namespace

VectorXd gls_mu(std::span<const MatrixXd> ys, const MatrixXd& v, const SpdFactor& rx,
                const StructuredCorrT& rt) {
  check_shapes(ys, v, rx.size(), rt.size());
  const NormalSystem sys = normal_system(v, rx, rt);
  return solve_mu(sys, factor_normal(sys.a), ys);
}

VectorXd gls_mu(const MatrixXd& y, const MatrixXd& v, const SpdFactor& rx,
                const StructuredCorrT& rt) {
  return gls_mu(std::span<const MatrixXd>(&y, 1), v, rx, rt);
}

double sigma2_hat(std::span<const MatrixXd> ys, const MatrixXd& v, const VectorXd& mu,
                  const SpdFactor& rx, const StructuredCorrT& rt) {
  const Index n = rx.size();
  const Index m = rt.size();
  check_shapes(ys, v, n, m);
  const MatrixXd mean = mean_grid(v, mu, n, m);
  double total = 0.0;
  for (const auto& y : ys) {
    const MatrixXd resid = y - mean;
    total += (resid.array() * kron_solve(rx, rt, resid).array()).sum();
  }
  const double s2 = total / (static_cast<double>(ys.size()) * static_cast<double>(n * m));
  return std::max(s2, 0.0);
}

double sigma2_hat(const MatrixXd& y, const MatrixXd& v, const VectorXd& mu, const SpdFactor& rx,
                  const StructuredCorrT& rt) {
  return sigma2_hat(std::span<const MatrixXd>(&y, 1), v, mu, rx, rt);
}

double neg_profile_loglik(const CorrParams& xi, const Design& design, const VectorXd& grid,
                          std::span<const MatrixXd> ys, const BasisSpec& basis) {
  const MatrixXd v = basis_matrix(basis, design, grid);
  return profile(xi, design, grid, ys, v).objective;
}

double neg_profile_loglik(const CorrParams& xi, const RegularData& data, const BasisSpec& basis) {
  return neg_profile_loglik(xi, data.design, data.grid, std::span<const MatrixXd>(&data.y, 1),
                            basis);
}

double complete_neg_loglik(const MatrixXd& c, const Design& design, const VectorXd& grid,
                           const BasisSpec& basis, const CorrParams& xi, const VectorXd& mu,
                           double sigma2) {
  const SpdFactor rx = build_R_x(design, xi);
  const StructuredCorrT rt = build_R_t(grid, xi.beta, xi.d, xi.nugget);
  const MatrixXd resid = c - mean_surface(basis, design, grid, mu);
  const double quad = (resid.array() * kron_solve(rx, rt, resid).array()).sum();
  const double big_n = static_cast<double>(c.size());
  return 0.5 * big_n * std::log(2.0 * std::numbers::pi) + 0.5 * big_n * std::log(sigma2) +
         0.5 * logdet_kron(rx, rt) + quad / (2.0 * sigma2);
}

ParameterFit fit_parameters(const Design& design, const VectorXd& grid,
                            std::span<const MatrixXd> ys, const BasisSpec& basis,
                            const CorrParams& init, const FitOptions& opts) {
  init.validate();
  const MatrixXd v = basis_matrix(basis, design, grid);
  check_shapes(ys, v, design.size(), grid.size());

  const bool alphas_active = opts.fit_alphas && design.size() > 1 && design.dim() > 0;
  const bool beta_active = opts.fit_beta && grid.size() > 1;
  const Index n_alpha = alphas_active ? design.dim() : 0;
  const Index dim = n_alpha + (beta_active ? 1 : 0);

  const auto clamp_log = [&](double u) {
    return std::clamp(u, opts.log_rate_lo, opts.log_rate_hi);
  };
  const auto to_params = [&](const VectorXd& u) {
    CorrParams xi = init;
    for (Index k = 0; k < n_alpha; ++k) {
      xi.alphas(k) = std::exp(clamp_log(u(k)));
    }
    if (beta_active) {
      xi.beta = std::exp(clamp_log(u(n_alpha)));
    }
    return xi;
  };
  const auto objective = [&](const VectorXd& u) {
    return profile(to_params(u), design, grid, ys, v).objective;
  };

  VectorXd u0(dim);
  const double floor_rate = std::exp(opts.log_rate_lo);
  for (Index k = 0; k < n_alpha; ++k) {
    u0(k) = clamp_log(std::log(std::max(init.alphas(k), floor_rate)));
  }
  if (beta_active) {
    u0(n_alpha) = clamp_log(std::log(std::max(init.beta, floor_rate)));
  }

  std::vector<VectorXd> starts{u0};
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (int r = 0; r < opts.n_restarts && dim > 0; ++r) {
    VectorXd u = u0;
    for (Index k = 0; k < dim; ++k) {
      u(k) = clamp_log(u(k) + jitter(rng));
    }
    starts.push_back(u);
  }

  ParameterFit fit;
  VectorXd best_u;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const NelderMeadResult r = nelder_mead(objective, s, opts.nm);
    fit.evals += r.evals;
    fit.start_values.push_back(r.value);
    if (r.value < 1e299 && r.value < best) {
      best = r.value;
      best_u = r.x;
    }
  }
  if (!std::isfinite(best)) {
    throw OptimFailed("correlation parameter fit failed from every start (singular matrices)");
  }
  VectorXd clamped = best_u;
  for (Index k = 0; k < clamped.size(); ++k) {
    clamped(k) = clamp_log(clamped(k));
  }
  fit.params = to_params(clamped);
  const Profile p = profile(fit.params, design, grid, ys, v);
  fit.mu = p.mu;
  fit.sigma2 = p.sigma2;
  fit.objective = p.objective;
  return fit;
}

KrigingModel KrigingModel::build(RegularData data, BasisSpec basis, CorrParams params) {
  KrigingModel model;
  model.data_ = std::move(data);
  model.basis_ = std::move(basis);
  model.params_ = std::move(params);
  model.finalize(true);
  return model;
}

KrigingModel KrigingModel::build(RegularData data, BasisSpec basis, CorrParams params, VectorXd mu,
                                 double sigma2) {
  KrigingModel model;
  model.data_ = std::move(data);
  model.basis_ = std::move(basis);
  model.params_ = std::move(params);
  model.mu_ = std::move(mu);
  model.sigma2_ = sigma2;
  model.finalize(false);
  return model;
}

void KrigingModel::finalize(bool estimate_mean) {
  params_.validate();
  basis_.validate(data_.design.dim());
  const Index n = data_.runs();
  const Index m = data_.points();
  rx_ = build_R_x(data_.design, params_);
  rt_ = build_R_t(data_.grid, params_.beta, params_.d, params_.nugget);
  v_ = basis_matrix(basis_, data_.design, data_.grid);
  NormalSystem sys = normal_system(v_, rx_, rt_);
  normal_ = factor_normal(sys.a);
  v_cols_ = std::move(sys.v_cols);
  rinv_v_ = std::move(sys.rinv_v);
  if (estimate_mean) {
    NormalSystem view;
    view.a = normal_.matrix();
    view.rinv_v = rinv_v_;
    mu_ = solve_mu(view, normal_, std::span<const MatrixXd>(&data_.y, 1));
  }
  if (mu_.size() != basis_.size()) {
    throw DimensionMismatch("mu has " + std::to_string(mu_.size()) + " entries, basis has " +
                            std::to_string(basis_.size()));
  }
  const MatrixXd resid = data_.y - mean_grid(v_, mu_, n, m);
  weights_ = kron_solve(rx_, rt_, resid);
  if (estimate_mean) {
    const double quad = (resid.array() * weights_.array()).sum();
    sigma2_ = std::max(quad / static_cast<double>(n * m), kSigma2Floor);
  }
  if (!(sigma2_ > 0.0)) {
    throw InputError("sigma2 must be positive");
  }
  objective_ = static_cast<double>(n * m) * std::log(sigma2_) + logdet_kron(rx_, rt_);
}

double KrigingModel::mean_at(const VectorXd& x, double t) const {
  return basis_.eval(data_.design, x, t).dot(mu_);
}

double KrigingModel::predict(const VectorXd& x, double t) const {
  const VectorXd rx = cross_corr_x(data_.design, params_, x);
  const VectorXd rt = rt_.cross(t);
  const double y = mean_at(x, t) + rx.dot(weights_ * rt);
  return decay_rate_ == 0.0 ? y : std::exp(-decay_rate_ * t) * y;
}

VectorXd KrigingModel::predict_profile(const VectorXd& x, const VectorXd& ts) const {
  VectorXd out(ts.size());
  const VectorXd rx = cross_corr_x(data_.design, params_, x);
  const VectorXd left = weights_.transpose() * rx;
  for (Index j = 0; j < ts.size(); ++j) {
    const double y = mean_at(x, ts(j)) + left.dot(rt_.cross(ts(j)));
    out(j) = decay_rate_ == 0.0 ? y : std::exp(-decay_rate_ * ts(j)) * y;
  }
  return out;
}

Interval KrigingModel::predict_ci(const VectorXd& x, double t, double kappa) const {
  const double z = normal_upper_point(kappa);
  const VectorXd rx = cross_corr_x(data_.design, params_, x);
  const VectorXd rt = rt_.cross(t);
  const VectorXd a = rx_.solve(rx);
  const VectorXd b = rt_.solve(rt);
  const double r_rinv_r = rx.dot(a) * rt.dot(b);
  VectorXd h = basis_.eval(data_.design, x, t);
  for (Index l = 0; l < h.size(); ++l) {
    h(l) -= a.dot(v_cols_[static_cast<size_t>(l)] * b);
  }
  const double var = std::max(0.0, 1.0 - r_rinv_r + h.dot(normal_.solve(h)));
  const double scale = decay_rate_ == 0.0 ? 1.0 : std::exp(-decay_rate_ * t);
  Interval out;
  out.center = scale * (mean_at(x, t) + rx.dot(weights_ * rt));
  const double half = scale * z * std::sqrt(sigma2_ * var);
  out.lo = out.center - half;
  out.hi = out.center + half;
  out.extrapolated = !data_.design.contains(x) || t < data_.grid.minCoeff() ||
                     t > data_.grid.maxCoeff();
  return out;
}

MatrixXd KrigingModel::loo_residuals() const {
  const Index n = data_.runs();
  const Index m = data_.points();
  const VectorXd dx = rx_.inverse().diagonal();
  const VectorXd dt = rt_.inverse().diagonal();
  MatrixXd out(n, m);
  VectorXd g(basis_.size());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      for (Index l = 0; l < g.size(); ++l) {
        g(l) = rinv_v_[static_cast<size_t>(l)](i, j);
      }
      const double q = dx(i) * dt(j) - g.dot(normal_.solve(g));
      out(i, j) = weights_(i, j) / q;
    }
  }
  return out;
}

KrigingModel fit_regular(const RegularData& data, const BasisSpec& basis, const CorrParams& init,
                         const FitOptions& opts) {
  const ParameterFit fit =
      fit_parameters(data.design, data.grid, std::span<const MatrixXd>(&data.y, 1), basis, init,
                     opts);
  KrigingModel model = KrigingModel::build(data, basis, fit.params);
  model.fit_evals = fit.evals;
  model.fit_start_values = fit.start_values;
  return model;
}

double normal_upper_point(double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) {
    throw InputError("kappa must lie in (0, 1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - kappa / 2.0);
}

LooProfile loo_profile(const KrigingModel& model, Index i, const LooOptions& opts) {
  const RegularData& data = model.data();
  if (data.runs() < 3) {
    throw InputError("leave-one-out needs at least 3 runs");
  }
  if (i < 0 || i >= data.runs()) {
    throw InputError("leave-one-out run index out of range");
  }
  const RegularData reduced = data.without_run(i);
  KrigingModel sub = opts.refit ? fit_regular(reduced, model.basis(), model.params(), opts.fit)
                                : KrigingModel::build(reduced, model.basis(), model.params());
  sub.set_decay_rate(model.decay_rate());
  const VectorXd x = data.design.rows.row(i).transpose();
  LooProfile out;
  out.t = data.grid;
  out.mean.resize(data.points());
  out.lo.resize(data.points());
  out.hi.resize(data.points());
  for (Index j = 0; j < data.points(); ++j) {
    const Interval ci = sub.predict_ci(x, data.grid(j), opts.kappa);
    out.mean(j) = ci.center;
    out.lo(j) = ci.lo;
    out.hi(j) = ci.hi;
  }
  return out;
}

}  // namespace fkrig
