#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "fkrig/basis.hpp"
#include "fkrig/corr.hpp"
#include "fkrig/dataset.hpp"
#include "fkrig/kron_kriging.hpp"

namespace fkrig {

// First-stage marginal models used to pick the mean basis and to seed the
// correlation parameters and missing values.

struct AverageProfile {
  VectorXd grid;                 // union grid
  VectorXd e;                    // mean of y_ij - ybar_i over runs observed at grid(j)
  Eigen::VectorXi counts;        // runs observed at grid(j)
};

AverageProfile average_profile(const FunctionalDataset& data);

// Mean of each run's observed responses.
VectorXd run_means(const FunctionalDataset& data);

struct MarginalOptions {
  int d = 2;
  double nugget = 1e-8;
  double min_rel_improvement = 0.01;  // forward selection acceptance threshold
  FitOptions fit;
};

struct MarginalTModel {
  KrigingModel model;  // one run on the grid
  std::vector<int> t_powers;
  double beta0 = 1.0;
  double loo_rmse = 0.0;
  double predict(double t) const;
};

struct MarginalXModel {
  KrigingModel model;  // n runs at a single point
  std::vector<XTerm> x_terms;
  VectorXd alpha0;
  double loo_rmse = 0.0;
  double predict(const VectorXd& x) const;
};

// Greedy forward selection: each round adds the candidate with the smallest
// leave-one-out RMSE, if it improves the current RMSE by at least
// min_rel_improvement (relative). Requires m >= 3.
MarginalTModel fit_marginal_t(const VectorXd& e, const VectorXd& grid,
                              const std::vector<int>& candidates, const MarginalOptions& opts = {});

// Same over x monomials on the run means. Requires n >= 3.
MarginalXModel fit_marginal_x(const VectorXd& ybar, const Design& design,
                              const std::vector<XTerm>& candidates,
                              const MarginalOptions& opts = {});

// Default x candidates: the linear term of every variable.
std::vector<XTerm> linear_x_terms(const Design& design);

// Completed n x m matrix on the data's grid: observed cells copied, missing
// cells filled with mt(t_j) + mx(x_i).
MatrixXd init_missing(const MaskedGridData& data, const MarginalTModel& mt,
                      const MarginalXModel& mx);

struct Stage1Result {
  AverageProfile profile;
  MarginalTModel mt;
  MarginalXModel mx;
  BasisSpec basis;   // selected t powers and x terms
  CorrParams init;   // alpha from mx, beta from mt
  MatrixXd c0;       // init_missing on the union grid
};

struct Stage1Options {
  std::vector<int> t_candidates{1, 2};
  std::optional<std::vector<XTerm>> x_candidates;  // unset means linear_x_terms
  MarginalOptions marginal;
};

Stage1Result run_stage1(const FunctionalDataset& data, const Stage1Options& opts = {});

// S(t) = exp(-lambda t) (p0 + p1 t + p2 t^2).
struct DecayTransform {
  double lambda = 0.0;
  Eigen::Vector3d poly = Eigen::Vector3d::Zero();
  double sse = 0.0;
  double eval(double t) const;
};

// Least squares over lambda in [0, lambda_max] with the polynomial profiled
// out; a coarse scan brackets the minimum and golden-section search refines it
// to `tol`. lambda_max <= 0 means 1 / median grid spacing. Requires m >= 4.
DecayTransform fit_decay_transform(const VectorXd& profile, const VectorXd& grid,
                                   double lambda_max = 0.0, double tol = 1e-6);

// Mean raw response at each union-grid point.
VectorXd mean_profile(const FunctionalDataset& data);

enum class TransformDirection { forward, inverse };

// forward multiplies y by exp(lambda t); inverse by exp(-lambda t).
FunctionalDataset apply_transform(const FunctionalDataset& data, double lambda,
                                  TransformDirection dir);

}  // namespace fkrig
