#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "fkrig/basis.hpp"
#include "fkrig/corr.hpp"
#include "fkrig/dataset.hpp"
#include "fkrig/optim.hpp"

namespace fkrig {

// Universal kriging on regular-grid functional data with R_{X,t} = R_X (x) R_t.
// Every product with R_{X,t}^-1 goes through kron_solve; no N x N matrix is
// ever formed.

struct FitOptions {
  int n_restarts = 5;
  std::uint64_t seed = 1;
  double log_rate_lo = -8.0;
  double log_rate_hi = 8.0;
  bool fit_alphas = true;
  bool fit_beta = true;
  NelderMeadOptions nm{0.5, 1e-9, 3000, 1};
};

struct Interval {
  double center = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool extrapolated = false;
};

// GLS estimate of mu. With several response matrices (Monte Carlo E-step) the
// estimate uses their average, which minimizes the averaged quadratic form.
// Throws RankDeficientBasis when V' R^-1 V is singular.
VectorXd gls_mu(std::span<const MatrixXd> ys, const MatrixXd& v, const SpdFactor& rx,
                const StructuredCorrT& rt);
VectorXd gls_mu(const MatrixXd& y, const MatrixXd& v, const SpdFactor& rx,
                const StructuredCorrT& rt);

// (1/N) (y - V mu)' R^-1 (y - V mu), averaged over the response matrices.
double sigma2_hat(std::span<const MatrixXd> ys, const MatrixXd& v, const VectorXd& mu,
                  const SpdFactor& rx, const StructuredCorrT& rt);
double sigma2_hat(const MatrixXd& y, const MatrixXd& v, const VectorXd& mu, const SpdFactor& rx,
                  const StructuredCorrT& rt);

// Smallest variance kept when a response is reproduced exactly by the mean.
inline constexpr double kSigma2Floor = 1e-300;

// N log sigma2_hat + m log|R_X| + n log|R_t| with mu and sigma2 profiled out.
double neg_profile_loglik(const CorrParams& xi, const RegularData& data, const BasisSpec& basis);
double neg_profile_loglik(const CorrParams& xi, const Design& design, const VectorXd& grid,
                          std::span<const MatrixXd> ys, const BasisSpec& basis);

// Complete-data negative log-likelihood at fixed (mu, sigma2, xi):
// N/2 log(2 pi) + N/2 log sigma2 + 1/2 log|R| + 1/(2 sigma2) (c - V mu)' R^-1 (c - V mu).
double complete_neg_loglik(const MatrixXd& c, const Design& design, const VectorXd& grid,
                           const BasisSpec& basis, const CorrParams& xi, const VectorXd& mu,
                           double sigma2);

struct ParameterFit {
  CorrParams params;
  VectorXd mu;
  double sigma2 = 0.0;
  double objective = 0.0;
  int evals = 0;
  std::vector<double> start_values;  // best objective reached from each start
};

// Multi-start Nelder-Mead on log rates, clamped to [log_rate_lo, log_rate_hi].
// Throws OptimFailed when no start yields a finite objective.
ParameterFit fit_parameters(const Design& design, const VectorXd& grid,
                            std::span<const MatrixXd> ys, const BasisSpec& basis,
                            const CorrParams& init, const FitOptions& opts);

class KrigingModel {
 public:
  KrigingModel() = default;

  // Fixed correlation parameters; mu and sigma2 from GLS.
  static KrigingModel build(RegularData data, BasisSpec basis, CorrParams params);
  // Fully specified parameters (used when loading a saved model).
  static KrigingModel build(RegularData data, BasisSpec basis, CorrParams params, VectorXd mu,
                            double sigma2);

  double predict(const VectorXd& x, double t) const;
  VectorXd predict_profile(const VectorXd& x, const VectorXd& ts) const;

  // Plug-in interval y_hat +/- z_{kappa/2} sigma sqrt(1 - r'R^-1 r + h'(V'R^-1 V)^-1 h)
  // with h = v(x, t) - V'R^-1 r. Negative round-off under the root clamps to 0.
  Interval predict_ci(const VectorXd& x, double t, double kappa) const;

  // Closed-form leave-one-point-out residuals y - y_hat(-k), n x m.
  MatrixXd loo_residuals() const;

  const RegularData& data() const { return data_; }
  const Design& design() const { return data_.design; }
  const VectorXd& grid() const { return data_.grid; }
  const BasisSpec& basis() const { return basis_; }
  const CorrParams& params() const { return params_; }
  const VectorXd& mu() const { return mu_; }
  double sigma2() const { return sigma2_; }
  double objective() const { return objective_; }
  const SpdFactor& rx() const { return rx_; }
  const StructuredCorrT& rt() const { return rt_; }
  // R_X^-1 (y - V mu) R_t^-1 as an n x m matrix.
  const MatrixXd& weights() const { return weights_; }

  // Responses are modeled as exp(lambda t) y; predictions are mapped back by
  // exp(-lambda t). Zero means no transform.
  double decay_rate() const { return decay_rate_; }
  void set_decay_rate(double lambda) { decay_rate_ = lambda; }

  // Diagnostic fields filled by the fitting routines.
  int fit_evals = 0;
  std::vector<double> fit_start_values;

 private:
  void finalize(bool estimate_mean);
  double mean_at(const VectorXd& x, double t) const;

  RegularData data_;
  BasisSpec basis_;
  CorrParams params_;
  VectorXd mu_;
  double sigma2_ = 0.0;
  double objective_ = 0.0;
  double decay_rate_ = 0.0;

  SpdFactor rx_;
  StructuredCorrT rt_;
  MatrixXd v_;                   // N x L
  std::vector<MatrixXd> v_cols_;  // each basis column as n x m
  std::vector<MatrixXd> rinv_v_;  // R^-1 V columns as n x m
  SpdFactor normal_;             // V' R^-1 V
  MatrixXd weights_;
};

KrigingModel fit_regular(const RegularData& data, const BasisSpec& basis, const CorrParams& init,
                         const FitOptions& opts = {});

// Upper kappa/2 point of the standard normal.
double normal_upper_point(double kappa);

struct LooOptions {
  bool refit = false;  // default re-predicts with the full-data correlation parameters
  double kappa = 0.05;
  FitOptions fit;
};

struct LooProfile {
  VectorXd t;
  VectorXd mean;
  VectorXd lo;
  VectorXd hi;
};

// Predicts run i over the grid from a model trained without run i.
LooProfile loo_profile(const KrigingModel& model, Index i, const LooOptions& opts = {});

}  // namespace fkrig
