#include "fkrig/stage1.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "fkrig/errors.hpp"

namespace fkrig {

namespace {

double rmse(const MatrixXd& r) { return std::sqrt(r.squaredNorm() / static_cast<double>(r.size())); }

CorrParams params_for(Index p, double alpha, double beta, const MarginalOptions& opts) {
  CorrParams xi;
  xi.alphas = VectorXd::Constant(p, alpha);
  xi.beta = beta;
  xi.d = opts.d;
  xi.nugget = opts.nugget;
  return xi;
}

// Fits every candidate extension of the current term set and keeps the best
// while it clears the improvement threshold.
template <typename Term, typename FitFn>
std::pair<std::vector<Term>, KrigingModel> forward_select(const std::vector<Term>& candidates,
                                                          double min_rel, FitFn fit) {
  std::vector<Term> chosen;
  KrigingModel current = fit(chosen);
  double current_rmse = rmse(current.loo_residuals());
  while (chosen.size() < candidates.size()) {
    double best_rmse = std::numeric_limits<double>::infinity();
    std::optional<KrigingModel> best_model;
    Term best_term{};
    for (const auto& c : candidates) {
      if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) {
        continue;
      }
      std::vector<Term> trial = chosen;
      trial.push_back(c);
      try {
        KrigingModel m = fit(trial);
        const double r = rmse(m.loo_residuals());
        if (r < best_rmse) {
          best_rmse = r;
          best_model = std::move(m);
          best_term = c;
        }
      } catch (const NumericError&) {
      }
    }
    if (!best_model || !(current_rmse > 0.0) ||
        !(best_rmse <= (1.0 - min_rel) * current_rmse)) {
      break;
    }
    chosen.push_back(best_term);
    current = std::move(*best_model);
    current_rmse = best_rmse;
  }
  return {chosen, current};
}

}  // namespace

AverageProfile average_profile(const FunctionalDataset& data) {
  if (data.runs() == 0) {
    throw DataError("average profile: dataset has no runs");
  }
  AverageProfile out;
  out.grid = data.union_grid();
  const Index m = out.grid.size();
  out.e = VectorXd::Zero(m);
  out.counts = Eigen::VectorXi::Zero(m);
  const VectorXd ybar = run_means(data);
  for (Index i = 0; i < data.runs(); ++i) {
    const auto& ti = data.t[static_cast<size_t>(i)];
    const auto& yi = data.y[static_cast<size_t>(i)];
    for (Index k = 0; k < ti.size(); ++k) {
      const Index j = std::lower_bound(out.grid.data(), out.grid.data() + m, ti(k)) - out.grid.data();
      out.e(j) += yi(k) - ybar(i);
      out.counts(j) += 1;
    }
  }
  for (Index j = 0; j < m; ++j) {
    out.e(j) /= out.counts(j);
  }
  return out;
}

VectorXd run_means(const FunctionalDataset& data) {
  VectorXd out(data.runs());
  for (Index i = 0; i < data.runs(); ++i) {
    const auto& yi = data.y[static_cast<size_t>(i)];
    if (yi.size() == 0) {
      throw DataError("run " + std::to_string(i + 1) + " has no observations");
    }
    out(i) = yi.mean();
  }
  return out;
}

double MarginalTModel::predict(double t) const { return model.predict(VectorXd(0), t); }

double MarginalXModel::predict(const VectorXd& x) const { return model.predict(x, 0.0); }

MarginalTModel fit_marginal_t(const VectorXd& e, const VectorXd& grid,
                              const std::vector<int>& candidates, const MarginalOptions& opts) {
  if (grid.size() < 3) {
    throw InputError("marginal t model needs at least 3 grid points");
  }
  if (e.size() != grid.size()) {
    throw DimensionMismatch("average profile and grid differ in length");
  }
  RegularData data;
  data.design = Design::empty(1);
  data.grid = grid;
  data.y = e.transpose();
  const BasisSpec scaled = BasisSpec::intercept_only(grid);
  const double beta_init = std::pow(4.0 / scaled.t_scale, opts.d);
  const CorrParams init = params_for(0, 1.0, beta_init, opts);
  auto fit = [&](const std::vector<int>& powers) {
    BasisSpec b = scaled;
    b.t_powers = powers;
    return fit_regular(data, b, init, opts.fit);
  };
  auto [powers, model] = forward_select(candidates, opts.min_rel_improvement, fit);
  MarginalTModel out;
  out.t_powers = powers;
  out.beta0 = model.params().beta;
  out.loo_rmse = rmse(model.loo_residuals());
  out.model = std::move(model);
  return out;
}

MarginalXModel fit_marginal_x(const VectorXd& ybar, const Design& design,
                              const std::vector<XTerm>& candidates, const MarginalOptions& opts) {
  if (design.size() < 3) {
    throw InputError("marginal x model needs at least 3 runs");
  }
  if (ybar.size() != design.size()) {
    throw DimensionMismatch("run means and design differ in length");
  }
  RegularData data;
  data.design = design;
  data.grid = VectorXd::Zero(1);
  data.y = ybar;
  const CorrParams init = params_for(design.dim(), 1.0, 1.0, opts);
  auto fit = [&](const std::vector<XTerm>& terms) {
    BasisSpec b;
    b.x_terms = terms;
    return fit_regular(data, b, init, opts.fit);
  };
  auto [terms, model] = forward_select(candidates, opts.min_rel_improvement, fit);
  MarginalXModel out;
  out.x_terms = terms;
  out.alpha0 = model.params().alphas;
  out.loo_rmse = rmse(model.loo_residuals());
  out.model = std::move(model);
  return out;
}

std::vector<XTerm> linear_x_terms(const Design& design) {
  std::vector<XTerm> out;
  for (Index k = 0; k < design.dim(); ++k) {
    out.push_back({k, 1});
  }
  return out;
}

MatrixXd init_missing(const MaskedGridData& data, const MarginalTModel& mt,
                      const MarginalXModel& mx) {
  MatrixXd c = data.y;
  VectorXd t_part(data.points());
  for (Index j = 0; j < data.points(); ++j) {
    t_part(j) = mt.predict(data.grid(j));
  }
  for (Index i = 0; i < data.runs(); ++i) {
    bool any = false;
    for (Index j = 0; j < data.points(); ++j) {
      any = any || !data.observed(i, j);
    }
    if (!any) {
      continue;
    }
    const double x_part = mx.predict(data.design.rows.row(i).transpose());
    for (Index j = 0; j < data.points(); ++j) {
      if (!data.observed(i, j)) {
        c(i, j) = t_part(j) + x_part;
      }
    }
  }
  return c;
}

Stage1Result run_stage1(const FunctionalDataset& data, const Stage1Options& opts) {
  data.validate();
  Stage1Result out;
  out.profile = average_profile(data);
  out.mt = fit_marginal_t(out.profile.e, out.profile.grid, opts.t_candidates, opts.marginal);
  const std::vector<XTerm> x_cands = opts.x_candidates ? *opts.x_candidates : linear_x_terms(data.design);
  out.mx = fit_marginal_x(run_means(data), data.design, x_cands, opts.marginal);
  out.basis = BasisSpec::intercept_only(out.profile.grid);
  out.basis.t_powers = out.mt.t_powers;
  out.basis.x_terms = out.mx.x_terms;
  out.init.alphas = out.mx.alpha0;
  out.init.beta = out.mt.beta0;
  out.init.d = opts.marginal.d;
  out.init.nugget = opts.marginal.nugget;
  out.c0 = init_missing(MaskedGridData::from(data, out.profile.grid), out.mt, out.mx);
  return out;
}

double DecayTransform::eval(double t) const {
  return std::exp(-lambda * t) * (poly(0) + poly(1) * t + poly(2) * t * t);
}

namespace {

DecayTransform decay_at(const VectorXd& profile, const VectorXd& grid, double lambda) {
  MatrixXd a(grid.size(), 3);
  for (Index j = 0; j < grid.size(); ++j) {
    const double w = std::exp(-lambda * grid(j));
    a(j, 0) = w;
    a(j, 1) = w * grid(j);
    a(j, 2) = w * grid(j) * grid(j);
  }
  DecayTransform d;
  d.lambda = lambda;
  d.poly = a.colPivHouseholderQr().solve(profile);
  d.sse = (a * d.poly - profile).squaredNorm();
  return d;
}

}  // namespace

DecayTransform fit_decay_transform(const VectorXd& profile, const VectorXd& grid,
                                   double lambda_max, double tol) {
  const Index m = grid.size();
  if (m < 4) {
    throw InputError("decay transform needs at least 4 grid points");
  }
  if (profile.size() != m) {
    throw DimensionMismatch("profile and grid differ in length");
  }
  if (lambda_max <= 0.0) {
    std::vector<double> h(static_cast<size_t>(m - 1));
    for (Index j = 0; j + 1 < m; ++j) {
      h[static_cast<size_t>(j)] = grid(j + 1) - grid(j);
    }
    std::nth_element(h.begin(), h.begin() + static_cast<long>(h.size() / 2), h.end());
    lambda_max = 1.0 / h[h.size() / 2];
  }
  constexpr int kScan = 200;
  const double step = lambda_max / kScan;
  int best_k = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= kScan; ++k) {
    const double sse = decay_at(profile, grid, k * step).sse;
    if (sse < best_sse) {
      best_sse = sse;
      best_k = k;
    }
  }
  double a = std::max(0, best_k - 1) * step;
  double b = std::min(kScan, best_k + 1) * step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = decay_at(profile, grid, c).sse;
  double fd = decay_at(profile, grid, d).sse;
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = decay_at(profile, grid, c).sse;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = decay_at(profile, grid, d).sse;
    }
  }
  DecayTransform best = decay_at(profile, grid, 0.5 * (a + b));
  const DecayTransform zero = decay_at(profile, grid, 0.0);
  // ties within rounding go to the boundary
  if (zero.sse <= best.sse + 1e-12 * profile.squaredNorm()) {
    best = zero;
  }
  return best;
}

VectorXd mean_profile(const FunctionalDataset& data) {
  const VectorXd grid = data.union_grid();
  VectorXd sum = VectorXd::Zero(grid.size());
  VectorXd count = VectorXd::Zero(grid.size());
  for (Index i = 0; i < data.runs(); ++i) {
    const auto& ti = data.t[static_cast<size_t>(i)];
    for (Index k = 0; k < ti.size(); ++k) {
      const Index j =
          std::lower_bound(grid.data(), grid.data() + grid.size(), ti(k)) - grid.data();
      sum(j) += data.y[static_cast<size_t>(i)](k);
      count(j) += 1.0;
    }
  }
  return sum.cwiseQuotient(count);
}

FunctionalDataset apply_transform(const FunctionalDataset& data, double lambda,
                                  TransformDirection dir) {
  FunctionalDataset out = data;
  const double sign = dir == TransformDirection::forward ? 1.0 : -1.0;
  for (Index i = 0; i < out.runs(); ++i) {
    auto& yi = out.y[static_cast<size_t>(i)];
    const auto& ti = out.t[static_cast<size_t>(i)];
    for (Index k = 0; k < yi.size(); ++k) {
      yi(k) *= std::exp(sign * lambda * ti(k));
    }
  }
  return out;
}

}  // namespace fkrig
