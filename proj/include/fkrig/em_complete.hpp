#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fkrig/basis.hpp"
#include "fkrig/corr.hpp"
#include "fkrig/dataset.hpp"
#include "fkrig/kron_kriging.hpp"

namespace fkrig {

// Completion of irregular functional data onto the union grid by EM, where the
// E-step iterates run-wise Gaussian conditionals (Gauss-Seidel over runs) and
// the M-step refits the Kronecker model on the completed grid.

struct Theta {
  VectorXd mu;
  double sigma2 = 1.0;
  CorrParams xi;
};

// Largest absolute change over mu, sigma2, alphas and beta.
double max_abs_change(const Theta& a, const Theta& b);

struct EMState {
  Design design;
  BasisSpec basis;
  VectorXd grid;
  MaskMatrix observed;
  MatrixXd c;  // observed cells hold y and are never written
  Theta theta;
  int k = 0;   // EM iterations done
  int q = 0;   // sweeps done
  std::vector<double> sweep_delta_inf;  // max_i |z_i new - old|_inf per sweep
  std::vector<double> sweep_delta_2;    // max_i |z_i new - old|_2 per sweep
  std::vector<double> param_delta;      // per EM iteration

  // Starts from a masked dataset and an n x m fill (observed cells are taken
  // from `data`, missing ones from `c0`).
  static EMState init(const MaskedGridData& data, const BasisSpec& basis, const Theta& theta,
                      const MatrixXd& c0);

  Index runs() const { return c.rows(); }
  Index points() const { return c.cols(); }
};

// Per-theta quantities shared by every run update in a sweep.
class EMCache {
 public:
  EMCache(const EMState& state);

  const Theta& theta() const { return theta_; }
  const MatrixXd& rx() const { return rx_; }          // R_X with nugget
  const MatrixXd& rt() const { return rt_; }          // R_t as used by the model
  const MatrixXd& prior_mean() const { return mean_; }  // n x m
  // r'_(-i) R_X(-i)^-1 scattered into an n-vector with 0 at i.
  const VectorXd& d(Index i) const { return d_[static_cast<size_t>(i)]; }
  // R_X(i, i) - r'_(-i) R_X(-i)^-1 r_(-i).
  double schur(Index i) const { return schur_[static_cast<size_t>(i)]; }
  const std::vector<Index>& obs(Index i) const { return obs_[static_cast<size_t>(i)]; }
  const std::vector<Index>& miss(Index i) const { return miss_[static_cast<size_t>(i)]; }

 private:
  Theta theta_;
  MatrixXd rx_;
  MatrixXd rt_;
  MatrixXd mean_;
  std::vector<VectorXd> d_;
  std::vector<double> schur_;
  std::vector<std::vector<Index>> obs_;
  std::vector<std::vector<Index>> miss_;
};

struct RunConditional {
  enum class Which { prior, own, others };
  VectorXd zeta;   // length m
  MatrixXd sigma;  // m x m
  Which which = Which::prior;
};

// c_i ~ N(v(x_i, t)' mu, sigma2 R_X(i,i) R_t).
RunConditional prior_conditional(const EMCache& cache, Index i);

// c_i given its own observations; zero covariance on observed coordinates.
RunConditional own_profile_conditional(const EMCache& cache, const EMState& state, Index i);

// c_i given the other runs' current completed profiles.
RunConditional others_conditional(const EMCache& cache, const MatrixXd& c, Index i);

struct Posterior {
  VectorXd eta;    // over the missing coordinates of run i
  MatrixXd gamma;
};

// Three-term combination on the missing block. Each conditional is first
// restricted to the hyperplane where the observed coordinates equal y_O; then
// Gamma = (S_oth^-1 + S_own^-1 - S_pri^-1)^-1 and
// eta = Gamma (S_own^-1 z_own + S_oth^-1 z_oth - S_pri^-1 z_pri),
// evaluated as (I + S_oth D)^-1 [z_oth + S_oth (S_own^-1 z_own - S_pri^-1 z_pri)]
// with D = S_own^-1 - S_pri^-1 so S_oth is never inverted.
// Throws NotPositiveDefinite when Gamma fails the eigenvalue floor.
Posterior posterior_combine(const RunConditional& prior, const RunConditional& own,
                            const RunConditional& others, const std::vector<Index>& obs,
                            const std::vector<Index>& miss, const VectorXd& y_obs);

// E(z_i | y, z_(-i)) and its covariance at the current state.
Posterior run_posterior(const EMCache& cache, const EMState& state, Index i);

// One Gauss-Seidel pass i = 0..n-1 replacing z_i by its conditional mean.
// Returns max_i |z_i new - old|_inf and appends to the state's history.
double ce_sweep(EMState& state, const EMCache& cache);
double ce_sweep(EMState& state);

// Same traversal drawing z_i ~ N(eta_i, Gamma_i).
double gibbs_sweep_sample(EMState& state, const EMCache& cache, std::mt19937_64& rng);

// max_i |z_i - E(z_i | y, z_(-i))|_inf without modifying the state.
double fixed_point_residual(const EMState& state, const EMCache& cache);

enum class EMMode { expectation, sampling };

struct EStepResult {
  std::vector<MatrixXd> completed;  // c^q (expectation) or c^1..c^q (sampling)
  double q_value = 0.0;             // complete-data negative log-likelihood surrogate
};

EStepResult e_step(EMState& state, int q, EMMode mode, std::mt19937_64& rng);

// Refits theta on the completed data, warm-started at `prev`.
Theta m_step(std::span<const MatrixXd> completed, const Design& design, const VectorXd& grid,
             const BasisSpec& basis, const Theta& prev, const FitOptions& opts);

// Left side of the contraction condition for every run:
// sum_k |d_k| |J_ik|_2, where J_ik is the block of
// [I + S_(-i) (S_i^-1 - S_ci^-1)]^-1 with rows on run i's missing cells and
// columns on run k's missing cells. With S_i singular on the observed cells
// this block is P_i[:, M_k], P_i = E_M - R_MO R_OO^-1 E_O. A value below 1 for
// every run bounds the sweep error by a contraction. 0 for complete runs.
VectorXd check_prop2(const EMCache& cache);

struct EMOptions {
  int q = 10;
  double delta = 0.05;
  int max_iter = 100;
  EMMode mode = EMMode::expectation;
  std::uint64_t seed = 1;
  FitOptions fit = [] {
    FitOptions f;
    f.n_restarts = 0;
    return f;
  }();
};

struct EMIteration {
  double max_delta = 0.0;
  double q_value = 0.0;
  double last_sweep_delta = 0.0;
  double sigma2 = 0.0;
  double beta = 0.0;
};

struct EMResult {
  KrigingModel model;
  MaskMatrix observed;
  int iterations = 0;
  bool converged = true;  // false means max_iter was reached
  std::vector<EMIteration> history;
  VectorXd prop2;
};

// Theta at the initial fill: xi given, mu and sigma2 by GLS on c0.
Theta initial_theta(const MaskedGridData& data, const BasisSpec& basis, const CorrParams& xi,
                    const MatrixXd& c0);

// Alternates e_step / m_step until max_abs_change < delta or max_iter. A
// regular dataset returns after a single fit. The model holds the completed
// grid data.
EMResult run_em(const FunctionalDataset& data, const BasisSpec& basis, const CorrParams& xi0,
                const MatrixXd& c0, const EMOptions& opts = {});

}  // namespace fkrig
