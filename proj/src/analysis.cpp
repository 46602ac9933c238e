#include "fkrig/analysis.hpp"

#include <algorithm>
#include <boost/random/sobol.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "fkrig/errors.hpp"
#include "fkrig/optim.hpp"

namespace fkrig {

namespace {

using SobolEngine = boost::random::sobol_engine<std::uint32_t, 32, boost::random::default_sobol_table>;

// n points in [0,1)^dim: Sobol with a random digital shift per coordinate.
MatrixXd shifted_sobol(Index n, Index dim, std::uint64_t seed) {
  MatrixXd out(n, dim);
  if (dim == 0 || n == 0) {
    return out;
  }
  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> shift(static_cast<size_t>(dim));
  for (auto& s : shift) {
    s = static_cast<std::uint32_t>(rng() >> 32);
  }
  SobolEngine eng(static_cast<unsigned>(dim));
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < dim; ++k) {
      const std::uint32_t v = static_cast<std::uint32_t>(eng()) ^ shift[static_cast<size_t>(k)];
      out(i, k) = (static_cast<double>(v) + 0.5) * 0x1p-32;
    }
  }
  return out;
}

// All level combinations of the given categorical variables, each level in
// [lo_k, hi_k]; one empty combination when the list is empty.
std::vector<std::vector<int>> combinations(const std::vector<int>& lo, const std::vector<int>& hi) {
  std::vector<std::vector<int>> out{{}};
  for (size_t k = 0; k < lo.size(); ++k) {
    std::vector<std::vector<int>> next;
    for (const auto& c : out) {
      for (int l = lo[k]; l <= hi[k]; ++l) {
        auto e = c;
        e.push_back(l);
        next.push_back(std::move(e));
      }
    }
    out = std::move(next);
  }
  return out;
}

bool contains(const std::vector<Index>& v, Index k) {
  return std::find(v.begin(), v.end(), k) != v.end();
}

}  // namespace

MaxOverT max_over_t(const KrigingModel& model, const VectorXd& x, const VectorXd& t_grid,
                    const std::vector<Index>& max_vars) {
  if (t_grid.size() == 0) {
    throw InputError("max over t: empty t grid");
  }
  const Design& design = model.design();
  std::vector<int> lo, hi;
  for (Index k : max_vars) {
    if (k < 0 || k >= design.dim() || !design.kinds[static_cast<size_t>(k)].is_categorical()) {
      throw InputError("max over t: variable " + std::to_string(k + 1) + " is not categorical");
    }
    lo.push_back(1);
    hi.push_back(design.kinds[static_cast<size_t>(k)].levels);
  }
  MaxOverT best;
  best.value = -std::numeric_limits<double>::infinity();
  for (const auto& combo : combinations(lo, hi)) {
    VectorXd xc = x;
    for (size_t k = 0; k < combo.size(); ++k) {
      xc(max_vars[k]) = combo[k];
    }
    const VectorXd prof = model.predict_profile(xc, t_grid);
    for (Index j = 0; j < prof.size(); ++j) {
      if (prof(j) > best.value) {
        best.value = prof(j);
        best.t_index = j;
        best.t_star = t_grid(j);
        best.x = xc;
      }
    }
  }
  if (best.x.size() == 0) {
    throw NumericError("max over t: predictor is not finite");
  }
  return best;
}

VectorXd refine_grid(const VectorXd& grid, int refine) {
  if (refine <= 1 || grid.size() < 2) {
    return grid;
  }
  VectorXd out((grid.size() - 1) * refine + 1);
  for (Index j = 0; j + 1 < grid.size(); ++j) {
    for (int s = 0; s < refine; ++s) {
      out(j * refine + s) = grid(j) + (grid(j + 1) - grid(j)) * s / refine;
    }
  }
  out(out.size() - 1) = grid(grid.size() - 1);
  return out;
}

OptimResult minimax_optimize(const KrigingModel& model, const VectorXd& lo, const VectorXd& hi,
                             const OptimOptions& opts) {
  const Design& design = model.design();
  const Index p = design.dim();
  if (lo.size() != p || hi.size() != p) {
    throw DimensionMismatch("minimax: bounds must have one entry per variable");
  }
  const VectorXd tg = refine_grid(model.grid(), opts.refine);

  std::vector<Index> cont, cat;
  std::vector<int> cat_lo, cat_hi;
  for (Index k = 0; k < p; ++k) {
    if (contains(opts.max_vars, k)) {
      continue;
    }
    if (!(lo(k) <= hi(k))) {
      throw InputError("minimax: empty range for variable " + design.names[static_cast<size_t>(k)]);
    }
    if (design.kinds[static_cast<size_t>(k)].is_categorical()) {
      cat.push_back(k);
      cat_lo.push_back(static_cast<int>(std::ceil(lo(k))));
      cat_hi.push_back(static_cast<int>(std::floor(hi(k))));
      if (cat_lo.back() > cat_hi.back()) {
        throw InputError("minimax: no level in range for variable " +
                         design.names[static_cast<size_t>(k)]);
      }
    } else {
      cont.push_back(k);
    }
  }
  const Index pc = static_cast<Index>(cont.size());

  // continuous coordinates live in the unit box; outside it they are clamped
  // and penalized so the simplex is pulled back
  auto to_x = [&](const VectorXd& u, VectorXd x) {
    for (Index k = 0; k < pc; ++k) {
      const Index v = cont[static_cast<size_t>(k)];
      x(v) = lo(v) + (hi(v) - lo(v)) * std::clamp(u(k), 0.0, 1.0);
    }
    return x;
  };
  auto to_u = [&](const VectorXd& x) {
    VectorXd u(pc);
    for (Index k = 0; k < pc; ++k) {
      const Index v = cont[static_cast<size_t>(k)];
      u(k) = hi(v) > lo(v) ? std::clamp((x(v) - lo(v)) / (hi(v) - lo(v)), 0.0, 1.0) : 0.0;
    }
    return u;
  };

  const MatrixXd qmc = shifted_sobol(opts.restarts, pc, opts.seed);
  OptimResult out;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& combo : combinations(cat_lo, cat_hi)) {
    VectorXd base = VectorXd::Zero(p);
    for (size_t k = 0; k < combo.size(); ++k) {
      base(cat[k]) = combo[k];
    }
    auto objective = [&](const VectorXd& u) {
      double pen = 0.0;
      for (Index k = 0; k < pc; ++k) {
        const double e = std::max(0.0, std::max(-u(k), u(k) - 1.0));
        pen += e * e;
      }
      return max_over_t(model, to_x(u, base), tg, opts.max_vars).value + pen;
    };
    std::vector<VectorXd> starts;
    for (Index i = 0; i < design.size(); ++i) {
      starts.push_back(to_u(design.rows.row(i).transpose()));
    }
    for (Index r = 0; r < qmc.rows(); ++r) {
      starts.push_back(qmc.row(r).transpose());
    }
    for (const auto& s : starts) {
      VectorXd u = s;
      double val = objective(u);
      if (pc > 0) {
        NelderMeadOptions nm{0.1, 1e-6, opts.max_evals, 0};
        const NelderMeadResult r = nelder_mead(objective, s, nm);
        out.max_evals_hit = out.max_evals_hit || !r.converged;
        if (r.value <= val) {
          u = r.x.cwiseMax(0.0).cwiseMin(1.0);
          val = objective(u);
        }
      }
      out.trace.push_back(val);
      if (val < best) {
        best = val;
        out.x_star = to_x(u, base);
      }
    }
  }
  const MaxOverT w = max_over_t(model, out.x_star, tg, opts.max_vars);
  out.worst_t = w.t_star;
  out.worst_value = w.value;
  if (!opts.max_vars.empty()) {
    out.x_star = w.x;
  }
  return out;
}

MatrixXd effect_nodes(const Design& design, Index variable, int mc_nodes, std::uint64_t seed) {
  const Index p = design.dim();
  const MatrixXd u = shifted_sobol(mc_nodes, std::max<Index>(p - 1, 0), seed);
  MatrixXd out = MatrixXd::Zero(mc_nodes, p);
  Index col = 0;
  for (Index k = 0; k < p; ++k) {
    if (k == variable) {
      continue;
    }
    const VarKind& kind = design.kinds[static_cast<size_t>(k)];
    for (Index i = 0; i < mc_nodes; ++i) {
      out(i, k) = kind.is_categorical()
                      ? std::min(kind.levels, 1 + static_cast<int>(u(i, col) * kind.levels))
                      : kind.lo + (kind.hi - kind.lo) * u(i, col);
    }
    ++col;
  }
  return out;
}

EffectCurve main_effects(const KrigingModel& model, Index variable, const VectorXd& levels,
                         int mc_nodes, std::uint64_t seed, VectorXd t) {
  const Design& design = model.design();
  if (variable < 0 || variable >= design.dim()) {
    throw InputError("main effects: no variable " + std::to_string(variable + 1));
  }
  if (mc_nodes < 1) {
    throw InputError("main effects: mc_nodes must be positive");
  }
  EffectCurve out;
  out.variable = variable;
  out.levels = levels;
  out.t = t.size() == 0 ? model.grid() : std::move(t);
  const Index nodes = design.dim() > 1 ? mc_nodes : 1;
  const MatrixXd x = effect_nodes(design, variable, static_cast<int>(nodes), seed);
  out.effect = MatrixXd::Zero(levels.size(), out.t.size());
  for (Index l = 0; l < levels.size(); ++l) {
    for (Index i = 0; i < nodes; ++i) {
      VectorXd xi = x.row(i).transpose();
      xi(variable) = levels(l);
      out.effect.row(l) += model.predict_profile(xi, out.t).transpose();
    }
    out.effect.row(l) /= static_cast<double>(nodes);
  }
  return out;
}

double mscv(const FunctionalDataset& data, const FitProcedure& procedure,
            const std::vector<Index>& probes, std::vector<double>* per_probe) {
  if (probes.empty()) {
    throw InputError("mscv: no probe runs");
  }
  double total = 0.0;
  if (per_probe) {
    per_probe->clear();
  }
  for (Index i : probes) {
    if (i < 0 || i >= data.runs()) {
      throw InputError("mscv: probe run " + std::to_string(i + 1) + " is not in the dataset");
    }
    const Predictor pred = procedure(data.without_run(i));
    const auto& ti = data.t[static_cast<size_t>(i)];
    const VectorXd r = pred(data.design.rows.row(i).transpose(), ti) - data.y[static_cast<size_t>(i)];
    const double e = r.squaredNorm() / static_cast<double>(r.size());
    total += e;
    if (per_probe) {
      per_probe->push_back(e);
    }
  }
  return total / static_cast<double>(probes.size());
}

}  // namespace fkrig
