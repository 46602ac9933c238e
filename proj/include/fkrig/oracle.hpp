#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "fkrig/basis.hpp"
#include "fkrig/corr.hpp"
#include "fkrig/dataset.hpp"
#include "fkrig/kron_kriging.hpp"

// Brute-force references for tests and validation. Everything here works on
// the full N x N system with a hand-written Cholesky; the correlation and
// basis formulas are restated locally so no code path is shared with the
// structured implementation.
namespace fkrig::oracle {

inline constexpr Index kDefaultFitCap = 512;
inline constexpr Index kDefaultConditionalCap = 256;

class DenseCholesky {
 public:
  // Throws SingularMatrix on a non-positive pivot.
  explicit DenseCholesky(const MatrixXd& a);

  MatrixXd solve(const MatrixXd& b) const;
  VectorXd solve(const VectorXd& b) const;
  double log_det() const { return log_det_; }
  Index size() const { return n_; }

 private:
  Index n_ = 0;
  std::vector<double> l_;  // row-major lower triangle
  double log_det_ = 0.0;
};

// Correlation between two stacked observations (x_a, t_a) and (x_b, t_b).
// The nugget inflates the x factor when both belong to the same run and the t
// factor when they share an abscissa on a grid with more than one point.
struct DenseSystem {
  MatrixXd x;        // N x p stacked settings
  VectorXd t;        // N stacked abscissae
  std::vector<Index> run;  // run index of each stacked row
  VectorXd y;
  MatrixXd v;        // N x L
  MatrixXd r;        // N x N
};

DenseSystem dense_system(const FunctionalDataset& data, const BasisSpec& basis,
                         const CorrParams& xi, Index cap = kDefaultFitCap);

// N log sigma2_hat + log|R_{X,t}|.
double dense_neg_loglik(const FunctionalDataset& data, const BasisSpec& basis, const CorrParams& xi,
                        Index cap = kDefaultFitCap);

class DenseModel {
 public:
  DenseModel(const FunctionalDataset& data, const BasisSpec& basis, const CorrParams& xi,
             Index cap = kDefaultFitCap);

  double predict(const VectorXd& x, double t) const;
  Interval ci(const VectorXd& x, double t, double kappa) const;

  const VectorXd& mu() const { return mu_; }
  double sigma2() const { return sigma2_; }
  double objective() const { return objective_; }
  const DenseSystem& system() const { return sys_; }

 private:
  VectorXd cross(const VectorXd& x, double t) const;
  VectorXd basis_at(const VectorXd& x, double t) const;

  Design design_;
  BasisSpec basis_;
  CorrParams xi_;
  DenseSystem sys_;
  DenseCholesky chol_;
  MatrixXd rinv_v_;
  MatrixXd normal_;
  VectorXd mu_;
  VectorXd weights_;
  double sigma2_ = 0.0;
  double objective_ = 0.0;
};

struct DenseFit {
  CorrParams params;
  VectorXd mu;
  double sigma2 = 0.0;
  double objective = 0.0;
};

// Minimizes the dense negative log-likelihood with the same start scheme as
// fit_parameters. Throws SizeCapExceeded beyond `cap` observations.
DenseFit dense_fit(const FunctionalDataset& data, const BasisSpec& basis, const CorrParams& init,
                   const FitOptions& opts = {}, Index cap = kDefaultFitCap);

// Conditional moments of a Gaussian: mean/cov of the `hidden` coordinates
// given the `given` coordinates equal `values`.
struct Conditional {
  VectorXd mean;
  MatrixXd cov;
};
Conditional gaussian_condition(const VectorXd& mean, const MatrixXd& cov,
                               const std::vector<Index>& hidden, const std::vector<Index>& given,
                               const VectorXd& values);

// Joint mean and covariance of the full n x m grid under N(V mu, sigma2 R_X (x) R_t),
// run-major (index i * m + j), built entry by entry.
std::pair<VectorXd, MatrixXd> dense_joint(const Design& design, const VectorXd& grid,
                                          const BasisSpec& basis, const CorrParams& xi,
                                          const VectorXd& mu, double sigma2);

// E(z | y) and cov(z | y) for the missing cells of `data` (run-major order of
// the missing cells). Throws SizeCapExceeded when n * m > cap.
struct MissingMoments {
  std::vector<std::pair<Index, Index>> cells;
  VectorXd mean;
  MatrixXd cov;
};
MissingMoments dense_conditional_mean(const MaskedGridData& data, const BasisSpec& basis,
                                      const CorrParams& xi, const VectorXd& mu, double sigma2,
                                      Index cap = kDefaultConditionalCap);

}  // namespace fkrig::oracle
