#include "fkrig/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fkrig/errors.hpp"

namespace fkrig::oracle {

namespace {

double unit(const VarKind& kind, double v) {
  if (kind.type == VarKind::Type::categorical) {
    return v;
  }
  return (v - kind.lo) / (kind.hi - kind.lo);
}

// Sum of per-variable exponents; exp(-sum) is the x correlation.
double x_exponent(const Design& design, const CorrParams& xi, const double* a, Index stride_a,
                  const double* b, Index stride_b) {
  double s = 0.0;
  for (Index k = 0; k < design.dim(); ++k) {
    const VarKind& kind = design.kinds[static_cast<size_t>(k)];
    const double ua = unit(kind, a[k * stride_a]);
    const double ub = unit(kind, b[k * stride_b]);
    if (kind.type == VarKind::Type::categorical) {
      s += ua == ub ? 0.0 : xi.alphas(k);
    } else {
      const double diff = std::abs(ua - ub);
      s += xi.alphas(k) * (xi.d == 1 ? diff : diff * diff);
    }
  }
  return s;
}

double t_corr(double a, double b, const CorrParams& xi) {
  const double diff = std::abs(a - b);
  return std::exp(-xi.beta * (xi.d == 1 ? diff : diff * diff));
}

VectorXd basis_row(const BasisSpec& basis, const Design& design, const VectorXd& x, double t) {
  VectorXd v(1 + basis.t_powers.size() + basis.x_terms.size());
  Index k = 0;
  v(k++) = 1.0;
  for (int p : basis.t_powers) {
    v(k++) = std::pow((t - basis.t_center) / basis.t_scale, p);
  }
  for (const auto& term : basis.x_terms) {
    v(k++) = std::pow(unit(design.kinds[static_cast<size_t>(term.var)], x(term.var)), term.power);
  }
  return v;
}

// Entry-by-entry N x N correlation over stacked (run, t) pairs.
MatrixXd stacked_corr(const Design& design, const MatrixXd& xs, const VectorXd& ts,
                      const std::vector<Index>& run, const CorrParams& xi, bool t_nugget) {
  const Index big_n = ts.size();
  MatrixXd r(big_n, big_n);
  for (Index a = 0; a < big_n; ++a) {
    for (Index b = 0; b <= a; ++b) {
      double cx;
      if (run[static_cast<size_t>(a)] == run[static_cast<size_t>(b)]) {
        cx = 1.0 + xi.nugget;
      } else {
        cx = std::exp(-x_exponent(design, xi, &xs(a, 0), xs.rows(), &xs(b, 0), xs.rows()));
      }
      double ct;
      if (ts(a) == ts(b)) {
        ct = t_nugget ? 1.0 + xi.nugget : 1.0;
      } else {
        ct = t_corr(ts(a), ts(b), xi);
      }
      r(a, b) = r(b, a) = cx * ct;
    }
  }
  return r;
}

}  // namespace

DenseCholesky::DenseCholesky(const MatrixXd& a) : n_(a.rows()) {
  l_.assign(static_cast<size_t>(n_ * n_), 0.0);
  const auto at = [&](Index i, Index j) -> double& { return l_[static_cast<size_t>(i * n_ + j)]; };
  for (Index i = 0; i < n_; ++i) {
    const double* li = &at(i, 0);
    for (Index j = 0; j <= i; ++j) {
      const double* lj = &at(j, 0);
      double s = a(i, j);
      for (Index k = 0; k < j; ++k) {
        s -= li[k] * lj[k];
      }
      if (i == j) {
        if (!(s > 0.0)) {
          throw SingularMatrix("dense Cholesky: non-positive pivot at row " + std::to_string(i));
        }
        at(i, i) = std::sqrt(s);
        log_det_ += 2.0 * std::log(at(i, i));
      } else {
        at(i, j) = s / at(j, j);
      }
    }
  }
}

VectorXd DenseCholesky::solve(const VectorXd& b) const {
  const auto at = [&](Index i, Index j) { return l_[static_cast<size_t>(i * n_ + j)]; };
  VectorXd z = b;
  for (Index i = 0; i < n_; ++i) {
    double s = z(i);
    for (Index k = 0; k < i; ++k) {
      s -= at(i, k) * z(k);
    }
    z(i) = s / at(i, i);
  }
  for (Index i = n_ - 1; i >= 0; --i) {
    double s = z(i);
    for (Index k = i + 1; k < n_; ++k) {
      s -= at(k, i) * z(k);
    }
    z(i) = s / at(i, i);
  }
  return z;
}

MatrixXd DenseCholesky::solve(const MatrixXd& b) const {
  MatrixXd out(b.rows(), b.cols());
  for (Index c = 0; c < b.cols(); ++c) {
    out.col(c) = solve(VectorXd(b.col(c)));
  }
  return out;
}

DenseSystem dense_system(const FunctionalDataset& data, const BasisSpec& basis,
                         const CorrParams& xi, Index cap) {
  const Index big_n = data.total_points();
  if (big_n > cap) {
    throw SizeCapExceeded("dense oracle: " + std::to_string(big_n) + " observations exceed cap " +
                          std::to_string(cap));
  }
  DenseSystem sys;
  const Index p = data.design.dim();
  sys.x.resize(big_n, p);
  sys.t.resize(big_n);
  sys.y.resize(big_n);
  sys.v.resize(big_n, basis.size());
  Index a = 0;
  for (Index i = 0; i < data.runs(); ++i) {
    const VectorXd x = data.design.rows.row(i).transpose();
    const auto& ti = data.t[static_cast<size_t>(i)];
    for (Index j = 0; j < ti.size(); ++j, ++a) {
      sys.x.row(a) = x.transpose();
      sys.t(a) = ti(j);
      sys.y(a) = data.y[static_cast<size_t>(i)](j);
      sys.run.push_back(i);
      sys.v.row(a) = basis_row(basis, data.design, x, ti(j)).transpose();
    }
  }
  const bool t_nugget = data.union_grid().size() > 1;
  sys.r = stacked_corr(data.design, sys.x, sys.t, sys.run, xi, t_nugget);
  return sys;
}

double dense_neg_loglik(const FunctionalDataset& data, const BasisSpec& basis, const CorrParams& xi,
                        Index cap) {
  const DenseSystem sys = dense_system(data, basis, xi, cap);
  const DenseCholesky chol(sys.r);
  const MatrixXd rinv_v = chol.solve(sys.v);
  const MatrixXd normal = sys.v.transpose() * rinv_v;
  const VectorXd mu = normal.ldlt().solve(rinv_v.transpose() * sys.y);
  const VectorXd resid = sys.y - sys.v * mu;
  const double big_n = static_cast<double>(sys.y.size());
  const double s2 = std::max(resid.dot(chol.solve(resid)) / big_n, kSigma2Floor);
  return big_n * std::log(s2) + chol.log_det();
}

DenseModel::DenseModel(const FunctionalDataset& data, const BasisSpec& basis, const CorrParams& xi,
                       Index cap)
    : design_(data.design),
      basis_(basis),
      xi_(xi),
      sys_(dense_system(data, basis, xi, cap)),
      chol_(sys_.r) {
  rinv_v_ = chol_.solve(sys_.v);
  normal_ = sys_.v.transpose() * rinv_v_;
  mu_ = normal_.ldlt().solve(rinv_v_.transpose() * sys_.y);
  const VectorXd resid = sys_.y - sys_.v * mu_;
  weights_ = chol_.solve(resid);
  const double big_n = static_cast<double>(sys_.y.size());
  sigma2_ = resid.dot(weights_) / big_n;
  objective_ = big_n * std::log(std::max(sigma2_, kSigma2Floor)) + chol_.log_det();
}

VectorXd DenseModel::cross(const VectorXd& x, double t) const {
  const Index big_n = sys_.t.size();
  VectorXd r(big_n);
  for (Index a = 0; a < big_n; ++a) {
    r(a) = std::exp(-x_exponent(design_, xi_, x.data(), 1, &sys_.x(a, 0), sys_.x.rows())) *
           t_corr(t, sys_.t(a), xi_);
  }
  return r;
}

VectorXd DenseModel::basis_at(const VectorXd& x, double t) const {
  return basis_row(basis_, design_, x, t);
}

double DenseModel::predict(const VectorXd& x, double t) const {
  return basis_at(x, t).dot(mu_) + cross(x, t).dot(weights_);
}

Interval DenseModel::ci(const VectorXd& x, double t, double kappa) const {
  const VectorXd r = cross(x, t);
  const VectorXd rinv_r = chol_.solve(r);
  const VectorXd h = basis_at(x, t) - sys_.v.transpose() * rinv_r;
  const double var = std::max(0.0, 1.0 - r.dot(rinv_r) + h.dot(normal_.ldlt().solve(h)));
  Interval out;
  out.center = predict(x, t);
  const double half = normal_upper_point(kappa) * std::sqrt(sigma2_ * var);
  out.lo = out.center - half;
  out.hi = out.center + half;
  return out;
}

DenseFit dense_fit(const FunctionalDataset& data, const BasisSpec& basis, const CorrParams& init,
                   const FitOptions& opts, Index cap) {
  if (data.total_points() > cap) {
    throw SizeCapExceeded("dense oracle: " + std::to_string(data.total_points()) +
                          " observations exceed cap " + std::to_string(cap));
  }
  const Index n = data.runs();
  const Index p = data.design.dim();
  const bool alphas_active = opts.fit_alphas && n > 1 && p > 0;
  const bool beta_active = opts.fit_beta && data.union_grid().size() > 1;
  const Index n_alpha = alphas_active ? p : 0;
  const Index dim = n_alpha + (beta_active ? 1 : 0);
  const auto clamp_log = [&](double u) { return std::clamp(u, opts.log_rate_lo, opts.log_rate_hi); };
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
    return dense_neg_loglik(data, basis, to_params(u), cap);
  };
  const double floor_rate = std::exp(opts.log_rate_lo);
  VectorXd u0(dim);
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
  double best = std::numeric_limits<double>::infinity();
  VectorXd best_u;
  for (const auto& s : starts) {
    const NelderMeadResult r = nelder_mead(objective, s, opts.nm);
    if (r.value < 1e299 && r.value < best) {
      best = r.value;
      best_u = r.x;
    }
  }
  if (!std::isfinite(best)) {
    throw OptimFailed("dense fit failed from every start");
  }
  for (Index k = 0; k < best_u.size(); ++k) {
    best_u(k) = clamp_log(best_u(k));
  }
  DenseFit fit;
  fit.params = to_params(best_u);
  const DenseModel model(data, basis, fit.params, cap);
  fit.mu = model.mu();
  fit.sigma2 = model.sigma2();
  fit.objective = model.objective();
  return fit;
}

Conditional gaussian_condition(const VectorXd& mean, const MatrixXd& cov,
                               const std::vector<Index>& hidden, const std::vector<Index>& given,
                               const VectorXd& values) {
  const auto h = static_cast<Index>(hidden.size());
  const auto g = static_cast<Index>(given.size());
  Conditional out;
  out.mean.resize(h);
  out.cov.resize(h, h);
  for (Index a = 0; a < h; ++a) {
    out.mean(a) = mean(hidden[static_cast<size_t>(a)]);
    for (Index b = 0; b < h; ++b) {
      out.cov(a, b) = cov(hidden[static_cast<size_t>(a)], hidden[static_cast<size_t>(b)]);
    }
  }
  if (g == 0 || h == 0) {
    return out;
  }
  MatrixXd s_gg(g, g);
  MatrixXd s_hg(h, g);
  VectorXd dev(g);
  for (Index a = 0; a < g; ++a) {
    dev(a) = values(a) - mean(given[static_cast<size_t>(a)]);
    for (Index b = 0; b < g; ++b) {
      s_gg(a, b) = cov(given[static_cast<size_t>(a)], given[static_cast<size_t>(b)]);
    }
    for (Index b = 0; b < h; ++b) {
      s_hg(b, a) = cov(hidden[static_cast<size_t>(b)], given[static_cast<size_t>(a)]);
    }
  }
  const DenseCholesky chol(s_gg);
  out.mean += s_hg * chol.solve(dev);
  out.cov -= s_hg * chol.solve(MatrixXd(s_hg.transpose()));
  return out;
}

std::pair<VectorXd, MatrixXd> dense_joint(const Design& design, const VectorXd& grid,
                                          const BasisSpec& basis, const CorrParams& xi,
                                          const VectorXd& mu, double sigma2) {
  const Index n = design.size();
  const Index m = grid.size();
  MatrixXd xs(n * m, design.dim());
  VectorXd ts(n * m);
  std::vector<Index> run;
  VectorXd mean(n * m);
  for (Index i = 0; i < n; ++i) {
    const VectorXd x = design.rows.row(i).transpose();
    for (Index j = 0; j < m; ++j) {
      xs.row(i * m + j) = x.transpose();
      ts(i * m + j) = grid(j);
      run.push_back(i);
      mean(i * m + j) = basis_row(basis, design, x, grid(j)).dot(mu);
    }
  }
  MatrixXd cov = sigma2 * stacked_corr(design, xs, ts, run, xi, m > 1);
  return {mean, cov};
}

MissingMoments dense_conditional_mean(const MaskedGridData& data, const BasisSpec& basis,
                                      const CorrParams& xi, const VectorXd& mu, double sigma2,
                                      Index cap) {
  const Index n = data.runs();
  const Index m = data.points();
  if (n * m > cap) {
    throw SizeCapExceeded("dense conditional: grid of " + std::to_string(n * m) +
                          " cells exceeds cap " + std::to_string(cap));
  }
  MissingMoments out;
  std::vector<Index> hidden;
  std::vector<Index> given;
  std::vector<double> vals;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (data.observed(i, j)) {
        given.push_back(i * m + j);
        vals.push_back(data.y(i, j));
      } else {
        hidden.push_back(i * m + j);
        out.cells.emplace_back(i, j);
      }
    }
  }
  if (hidden.empty()) {
    return out;
  }
  const auto [mean, cov] = dense_joint(data.design, data.grid, basis, xi, mu, sigma2);
  const Conditional c = gaussian_condition(
      mean, cov, hidden, given, Eigen::Map<const VectorXd>(vals.data(), static_cast<Index>(vals.size())));
  out.mean = c.mean;
  out.cov = c.cov;
  return out;
}

}  // namespace fkrig::oracle
