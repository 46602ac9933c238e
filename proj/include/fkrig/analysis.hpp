#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "fkrig/dataset.hpp"
#include "fkrig/kron_kriging.hpp"

namespace fkrig {

struct MaxOverT {
  double t_star = 0.0;
  Index t_index = 0;
  double value = 0.0;
  VectorXd x;  // setting at the maximum, swept categorical levels filled in
};

// Exhaustive max of the predictor over t_grid and every level combination of
// the categorical variables in max_vars. Ties go to the lowest t index, then
// the first level combination.
MaxOverT max_over_t(const KrigingModel& model, const VectorXd& x, const VectorXd& t_grid,
                    const std::vector<Index>& max_vars = {});

struct OptimOptions {
  int restarts = 20;       // low-discrepancy starts per categorical combination
  int max_evals = 2000;    // per start
  std::uint64_t seed = 1;
  int refine = 1;          // inner t grid: training grid with refine - 1 points inserted per gap
  std::vector<Index> max_vars;
};

struct OptimResult {
  VectorXd x_star;
  double worst_t = 0.0;
  double worst_value = 0.0;
  std::vector<double> trace;  // best value from each start, in start order
  bool max_evals_hit = false;
};

// Minimizes max_over_t over the box [lo, hi] (raw units). Categorical
// variables take every integer level in [lo_k, hi_k]; variables in max_vars
// are swept by the inner max and their bounds are ignored. Each combination
// starts Nelder-Mead from every design row (clamped to the box) and from
// opts.restarts shifted Sobol points.
OptimResult minimax_optimize(const KrigingModel& model, const VectorXd& lo, const VectorXd& hi,
                             const OptimOptions& opts = {});

// The training grid with `refine - 1` equally spaced points inserted per gap.
VectorXd refine_grid(const VectorXd& grid, int refine);

struct EffectCurve {
  Index variable = 0;
  VectorXd levels;
  VectorXd t;
  MatrixXd effect;  // levels x t
};

// Average prediction with `variable` clamped at each level and the other
// variables at mc_nodes digitally shifted Sobol points over their ranges
// (categorical ones mapped to uniform levels). The same nodes serve every level.
EffectCurve main_effects(const KrigingModel& model, Index variable, const VectorXd& levels,
                         int mc_nodes = 256, std::uint64_t seed = 1, VectorXd t = {});

// mc_nodes x p settings used by main_effects; the clamped column is left at 0.
MatrixXd effect_nodes(const Design& design, Index variable, int mc_nodes, std::uint64_t seed);

// Predicts a run's profile at its own abscissae.
using Predictor = std::function<VectorXd(const VectorXd& x, const VectorXd& t)>;
using FitProcedure = std::function<Predictor(const FunctionalDataset& train)>;

// Mean over probe runs of the run's mean squared error when it is left out of
// the training set. per_probe receives the individual terms when given.
double mscv(const FunctionalDataset& data, const FitProcedure& procedure,
            const std::vector<Index>& probes, std::vector<double>* per_probe = nullptr);

}  // namespace fkrig
