#include "fkrig/em_complete.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "fkrig/errors.hpp"

namespace fkrig {

namespace {

constexpr double kEigenFloor = 1e-8;

MatrixXd sub(const MatrixXd& a, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Index>(r), static_cast<Index>(c)) = a(rows[r], cols[c]);
    }
  }
  return out;
}

VectorXd sub(const VectorXd& v, const std::vector<Index>& idx) {
  VectorXd out(static_cast<Index>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    out(static_cast<Index>(k)) = v(idx[k]);
  }
  return out;
}

MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

// Mean and covariance of the missing block given the observed block equals y_O.
struct Restricted {
  VectorXd mean;
  MatrixXd cov;
};

Restricted restrict_to_observed(const RunConditional& g, const std::vector<Index>& obs,
                                const std::vector<Index>& miss, const VectorXd& y_obs) {
  Restricted r;
  r.mean = sub(g.zeta, miss);
  r.cov = sub(g.sigma, miss, miss);
  if (obs.empty() || miss.empty()) {
    return r;
  }
  const MatrixXd s_oo = sub(g.sigma, obs, obs);
  const MatrixXd s_mo = sub(g.sigma, miss, obs);
  const Eigen::LLT<MatrixXd> llt(s_oo);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrix("observed block covariance is not positive definite");
  }
  r.mean += s_mo * llt.solve(VectorXd(y_obs - sub(g.zeta, obs)));
  r.cov = symmetrize(r.cov - s_mo * llt.solve(MatrixXd(s_mo.transpose())));
  return r;
}

MatrixXd spd_inverse(const MatrixXd& a, const char* what) {
  const Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite(std::string(what) + " covariance is not positive definite");
  }
  return llt.solve(MatrixXd::Identity(a.rows(), a.cols()));
}

void check_floor(const MatrixXd& a) {
  if (a.rows() == 0) {
    return;
  }
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  const double trace = std::max(a.trace(), 0.0);
  if (es.eigenvalues().minCoeff() < -kEigenFloor * trace) {
    throw NotPositiveDefinite("combined posterior covariance fails the eigenvalue floor");
  }
}

// Spectral norm by power iteration on A'A.
double spectral_norm(const MatrixXd& a) {
  if (a.size() == 0) {
    return 0.0;
  }
  const MatrixXd ata = a.transpose() * a;
  VectorXd v = VectorXd::Ones(ata.cols()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    VectorXd w = ata * v;
    const double norm = w.norm();
    if (norm == 0.0) {
      return 0.0;
    }
    w /= norm;
    const double next = w.dot(ata * w);
    v = w;
    if (std::abs(next - lambda) <= 1e-8 * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

VectorXd run_row(const MatrixXd& c, Index i) { return c.row(i).transpose(); }

}  // namespace

double max_abs_change(const Theta& a, const Theta& b) {
  double d = std::abs(a.sigma2 - b.sigma2);
  d = std::max(d, std::abs(a.xi.beta - b.xi.beta));
  if (a.mu.size() == b.mu.size() && a.mu.size() > 0) {
    d = std::max(d, (a.mu - b.mu).cwiseAbs().maxCoeff());
  }
  if (a.xi.alphas.size() == b.xi.alphas.size() && a.xi.alphas.size() > 0) {
    d = std::max(d, (a.xi.alphas - b.xi.alphas).cwiseAbs().maxCoeff());
  }
  return d;
}

EMState EMState::init(const MaskedGridData& data, const BasisSpec& basis, const Theta& theta,
                      const MatrixXd& c0) {
  if (c0.rows() != data.runs() || c0.cols() != data.points()) {
    throw DimensionMismatch("initial fill does not match the grid");
  }
  EMState s;
  s.design = data.design;
  s.basis = basis;
  s.grid = data.grid;
  s.observed = data.observed;
  s.c = c0;
  for (Index i = 0; i < data.runs(); ++i) {
    for (Index j = 0; j < data.points(); ++j) {
      if (data.observed(i, j)) {
        s.c(i, j) = data.y(i, j);
      } else if (!std::isfinite(s.c(i, j))) {
        throw DataError("initial fill is not finite at run " + std::to_string(i + 1) +
                        ", point " + std::to_string(j + 1));
      }
    }
  }
  s.theta = theta;
  return s;
}

EMCache::EMCache(const EMState& state) : theta_(state.theta) {
  const Index n = state.runs();
  const Index m = state.points();
  const SpdFactor rx = build_R_x(state.design, theta_.xi);
  rx_ = rx.matrix();
  rt_ = build_R_t(state.grid, theta_.xi.beta, theta_.xi.d, theta_.xi.nugget).dense();
  mean_ = mean_surface(state.basis, state.design, state.grid, theta_.mu);
  const MatrixXd rx_inv = rx.inverse();
  d_.resize(static_cast<size_t>(n));
  schur_.resize(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    VectorXd full = VectorXd::Zero(n);
    double s = rx_(i, i);
    if (n > 1) {
      const MatrixXd minor_inv = downdate_Rx_inverse(rx_inv, i);
      VectorXd r(n - 1);
      for (Index k = 0, a = 0; k < n; ++k) {
        if (k != i) {
          r(a++) = rx_(k, i);
        }
      }
      const VectorXd dv = minor_inv * r;
      for (Index k = 0, a = 0; k < n; ++k) {
        if (k != i) {
          full(k) = dv(a++);
        }
      }
      s -= dv.dot(r);
    }
    d_[static_cast<size_t>(i)] = full;
    schur_[static_cast<size_t>(i)] = s;
  }
  obs_.resize(static_cast<size_t>(n));
  miss_.resize(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      (state.observed(i, j) ? obs_ : miss_)[static_cast<size_t>(i)].push_back(j);
    }
  }
}

RunConditional prior_conditional(const EMCache& cache, Index i) {
  RunConditional g;
  g.which = RunConditional::Which::prior;
  g.zeta = run_row(cache.prior_mean(), i);
  g.sigma = cache.theta().sigma2 * cache.rx()(i, i) * cache.rt();
  return g;
}

RunConditional own_profile_conditional(const EMCache& cache, const EMState& state, Index i) {
  RunConditional prior = prior_conditional(cache, i);
  const auto& obs = cache.obs(i);
  const auto& miss = cache.miss(i);
  if (obs.empty()) {
    prior.which = RunConditional::Which::own;
    return prior;
  }
  const Restricted r = restrict_to_observed(prior, obs, miss, sub(run_row(state.c, i), obs));
  RunConditional g;
  g.which = RunConditional::Which::own;
  g.zeta = run_row(state.c, i);
  g.sigma = MatrixXd::Zero(state.points(), state.points());
  for (size_t a = 0; a < miss.size(); ++a) {
    g.zeta(miss[a]) = r.mean(static_cast<Index>(a));
    for (size_t b = 0; b < miss.size(); ++b) {
      g.sigma(miss[a], miss[b]) = r.cov(static_cast<Index>(a), static_cast<Index>(b));
    }
  }
  return g;
}

RunConditional others_conditional(const EMCache& cache, const MatrixXd& c, Index i) {
  RunConditional g;
  g.which = RunConditional::Which::others;
  const VectorXd& d = cache.d(i);
  g.zeta = run_row(cache.prior_mean(), i);
  for (Index k = 0; k < c.rows(); ++k) {
    if (k != i && d(k) != 0.0) {
      g.zeta += d(k) * (run_row(c, k) - run_row(cache.prior_mean(), k));
    }
  }
  g.sigma = cache.theta().sigma2 * cache.schur(i) * cache.rt();
  return g;
}

Posterior posterior_combine(const RunConditional& prior, const RunConditional& own,
                            const RunConditional& others, const std::vector<Index>& obs,
                            const std::vector<Index>& miss, const VectorXd& y_obs) {
  Posterior post;
  if (miss.empty()) {
    return post;
  }
  const Restricted pri = restrict_to_observed(prior, obs, miss, y_obs);
  const Restricted oth = restrict_to_observed(others, obs, miss, y_obs);
  const Restricted own_m{sub(own.zeta, miss), sub(own.sigma, miss, miss)};

  const MatrixXd own_prec = spd_inverse(own_m.cov, "own-profile");
  const MatrixXd pri_prec = spd_inverse(pri.cov, "prior");
  const MatrixXd dmat = own_prec - pri_prec;
  const VectorXd shift = own_prec * own_m.mean - pri_prec * pri.mean;
  const Index k = static_cast<Index>(miss.size());
  const Eigen::PartialPivLU<MatrixXd> lu(MatrixXd::Identity(k, k) + oth.cov * dmat);
  post.eta = lu.solve(VectorXd(oth.mean + oth.cov * shift));
  post.gamma = symmetrize(lu.solve(oth.cov));
  if (!post.eta.allFinite() || !post.gamma.allFinite()) {
    throw NotPositiveDefinite("posterior combination is singular");
  }
  check_floor(post.gamma);
  return post;
}

Posterior run_posterior(const EMCache& cache, const EMState& state, Index i) {
  const auto& obs = cache.obs(i);
  const auto& miss = cache.miss(i);
  const RunConditional prior = prior_conditional(cache, i);
  const RunConditional own = own_profile_conditional(cache, state, i);
  const RunConditional others = others_conditional(cache, state.c, i);
  return posterior_combine(prior, own, others, obs, miss, sub(run_row(state.c, i), obs));
}

namespace {

template <typename Draw>
double sweep(EMState& state, const EMCache& cache, Draw draw) {
  double worst_inf = 0.0;
  double worst_2 = 0.0;
  for (Index i = 0; i < state.runs(); ++i) {
    const auto& miss = cache.miss(i);
    if (miss.empty()) {
      continue;
    }
    const Posterior post = run_posterior(cache, state, i);
    const VectorXd z = draw(post);
    double d2 = 0.0;
    for (size_t a = 0; a < miss.size(); ++a) {
      const double diff = z(static_cast<Index>(a)) - state.c(i, miss[a]);
      worst_inf = std::max(worst_inf, std::abs(diff));
      d2 += diff * diff;
      state.c(i, miss[a]) = z(static_cast<Index>(a));
    }
    worst_2 = std::max(worst_2, std::sqrt(d2));
  }
  state.sweep_delta_inf.push_back(worst_inf);
  state.sweep_delta_2.push_back(worst_2);
  ++state.q;
  return worst_inf;
}

}  // namespace

double ce_sweep(EMState& state, const EMCache& cache) {
  return sweep(state, cache, [](const Posterior& p) { return p.eta; });
}

double ce_sweep(EMState& state) {
  const EMCache cache(state);
  return ce_sweep(state, cache);
}

double gibbs_sweep_sample(EMState& state, const EMCache& cache, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return sweep(state, cache, [&](const Posterior& p) {
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(p.gamma);
    const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    VectorXd u(p.eta.size());
    for (Index a = 0; a < u.size(); ++a) {
      u(a) = normal(rng);
    }
    return VectorXd(p.eta + es.eigenvectors() * root.cwiseProduct(u));
  });
}

double fixed_point_residual(const EMState& state, const EMCache& cache) {
  double worst = 0.0;
  for (Index i = 0; i < state.runs(); ++i) {
    const auto& miss = cache.miss(i);
    if (miss.empty()) {
      continue;
    }
    const Posterior post = run_posterior(cache, state, i);
    for (size_t a = 0; a < miss.size(); ++a) {
      worst = std::max(worst, std::abs(post.eta(static_cast<Index>(a)) - state.c(i, miss[a])));
    }
  }
  return worst;
}

EStepResult e_step(EMState& state, int q, EMMode mode, std::mt19937_64& rng) {
  if (q < 1) {
    throw InputError("e-step needs q >= 1");
  }
  const EMCache cache(state);
  EStepResult out;
  const Theta& th = state.theta;
  if (mode == EMMode::expectation) {
    for (int j = 0; j < q; ++j) {
      ce_sweep(state, cache);
    }
    out.completed.push_back(state.c);
    out.q_value =
        complete_neg_loglik(state.c, state.design, state.grid, state.basis, th.xi, th.mu, th.sigma2);
    return out;
  }
  double total = 0.0;
  for (int j = 0; j < q; ++j) {
    gibbs_sweep_sample(state, cache, rng);
    out.completed.push_back(state.c);
    total +=
        complete_neg_loglik(state.c, state.design, state.grid, state.basis, th.xi, th.mu, th.sigma2);
  }
  out.q_value = total / q;
  return out;
}

Theta m_step(std::span<const MatrixXd> completed, const Design& design, const VectorXd& grid,
             const BasisSpec& basis, const Theta& prev, const FitOptions& opts) {
  const ParameterFit fit = fit_parameters(design, grid, completed, basis, prev.xi, opts);
  return Theta{fit.mu, fit.sigma2, fit.params};
}

VectorXd check_prop2(const EMCache& cache) {
  const MatrixXd& rt = cache.rt();
  const Index n = cache.rx().rows();
  const Index m = rt.rows();
  VectorXd out = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const auto& obs = cache.obs(i);
    const auto& miss = cache.miss(i);
    if (miss.empty()) {
      continue;
    }
    // P_i = E_M - R_MO R_OO^-1 E_O: the missing-block mean moves by d_k P_i e
    // when run k moves by e.
    MatrixXd p = MatrixXd::Zero(static_cast<Index>(miss.size()), m);
    for (size_t a = 0; a < miss.size(); ++a) {
      p(static_cast<Index>(a), miss[a]) = 1.0;
    }
    if (!obs.empty()) {
      const MatrixXd r_mo = sub(rt, miss, obs);
      const MatrixXd k = sub(rt, obs, obs).llt().solve(MatrixXd(r_mo.transpose())).transpose();
      for (size_t b = 0; b < obs.size(); ++b) {
        p.col(obs[b]) -= k.col(static_cast<Index>(b));
      }
    }
    double total = 0.0;
    for (Index k = 0; k < n; ++k) {
      const auto& mk = cache.miss(k);
      if (k == i || mk.empty() || cache.d(i)(k) == 0.0) {
        continue;
      }
      MatrixXd block(p.rows(), static_cast<Index>(mk.size()));
      for (size_t b = 0; b < mk.size(); ++b) {
        block.col(static_cast<Index>(b)) = p.col(mk[b]);
      }
      total += std::abs(cache.d(i)(k)) * spectral_norm(block);
    }
    out(i) = total;
  }
  return out;
}

Theta initial_theta(const MaskedGridData& data, const BasisSpec& basis, const CorrParams& xi,
                    const MatrixXd& c0) {
  RegularData reg{data.design, data.grid, c0};
  for (Index i = 0; i < data.runs(); ++i) {
    for (Index j = 0; j < data.points(); ++j) {
      if (data.observed(i, j)) {
        reg.y(i, j) = data.y(i, j);
      }
    }
  }
  const KrigingModel model = KrigingModel::build(reg, basis, xi);
  return Theta{model.mu(), model.sigma2(), model.params()};
}

EMResult run_em(const FunctionalDataset& data, const BasisSpec& basis, const CorrParams& xi0,
                const MatrixXd& c0, const EMOptions& opts) {
  data.validate();
  const MaskedGridData masked = MaskedGridData::from(data);
  EMResult out;
  out.observed = masked.observed;
  if (masked.missing_count() == 0) {
    out.model = fit_regular(RegularData::from(data), basis, xi0, opts.fit);
    out.iterations = 1;
    out.prop2 = VectorXd::Zero(data.runs());
    return out;
  }
  const Theta theta0 = initial_theta(masked, basis, xi0, c0);
  EMState state = EMState::init(masked, basis, theta0, c0);
  std::mt19937_64 rng(opts.seed);
  out.converged = false;
  for (int it = 0; it < opts.max_iter; ++it) {
    const EStepResult e = e_step(state, opts.q, opts.mode, rng);
    const Theta next = m_step(e.completed, state.design, state.grid, basis, state.theta, opts.fit);
    const double delta = max_abs_change(state.theta, next);
    state.theta = next;
    state.param_delta.push_back(delta);
    ++state.k;
    EMIteration rec;
    rec.max_delta = delta;
    rec.q_value = e.q_value;
    rec.last_sweep_delta = state.sweep_delta_inf.back();
    rec.sigma2 = next.sigma2;
    rec.beta = next.xi.beta;
    out.history.push_back(rec);
    if (delta < opts.delta) {
      out.converged = true;
      break;
    }
  }
  out.iterations = state.k;
  out.model = KrigingModel::build(RegularData{state.design, state.grid, state.c}, basis,
                                  state.theta.xi);
  out.prop2 = check_prop2(EMCache(state));
  return out;
}

}  // namespace fkrig
