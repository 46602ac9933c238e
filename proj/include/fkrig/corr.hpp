#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <optional>

#include "fkrig/design.hpp"

namespace fkrig {

// Separable power-exponential correlation parameters.
//
// r(x1 - x2, t1 - t2) = prod_k r_k(x1k, x2k) * exp(-beta |t1 - t2|^d)
//
// Continuous variables use exp(-alpha_k |u1 - u2|^d) on coordinates rescaled
// to [0, 1]; categorical variables use exp(-alpha_k [a != b]). The nugget is
// added to the diagonal of every correlation matrix that is factorized densely.
struct CorrParams {
  VectorXd alphas;
  double beta = 1.0;
  int d = 2;
  double nugget = 1e-8;

  // exp(-beta * spacing); the lag-one correlation on an equally spaced grid.
  double rho(double spacing = 1.0) const;

  // Throws InputError on negative rates, negative nugget or d outside {1, 2}.
  void validate() const;
};

double corr_value(double a, double b, const VarKind& kind, double alpha, int d);

// Product correlation between two raw settings.
double corr_x(const Design& design, const CorrParams& params, const VectorXd& a,
              const VectorXd& b);

// r(x - x_i) for every design row i (no nugget).
VectorXd cross_corr_x(const Design& design, const CorrParams& params, const VectorXd& x);

// Dense Cholesky of a symmetric positive-definite matrix.
class SpdFactor {
 public:
  SpdFactor() = default;
  // Throws SingularMatrix when the factorization breaks down.
  explicit SpdFactor(MatrixXd a);

  Index size() const { return a_.rows(); }
  const MatrixXd& matrix() const { return a_; }
  double log_det() const { return log_det_; }
  MatrixXd solve(const MatrixXd& b) const { return llt_.solve(b); }
  VectorXd solve(const VectorXd& b) const { return llt_.solve(b); }
  MatrixXd inverse() const;
  MatrixXd lower() const { return llt_.matrixL(); }

 private:
  MatrixXd a_;
  Eigen::LLT<MatrixXd> llt_;
  double log_det_ = 0.0;
};

// n x n correlation of the design rows with 1 + nugget on the diagonal.
// Throws SingularMatrix when the Cholesky factorization fails.
SpdFactor build_R_x(const Design& design, const CorrParams& params);

// Mean spacing when max_j |h_j - mean| / mean < 1e-9, otherwise nullopt.
std::optional<double> equal_spacing(const VectorXd& grid);

// Correlation matrix over the functional index.
//
// On an equally spaced grid with d = 1 and no nugget, R_t is the AR(1)
// matrix rho^|j - l|; its inverse is tridiagonal,
//   R_t^-1 = 1/(1 - rho^2) * tridiag(-rho, [1, 1 + rho^2, ..., 1 + rho^2, 1], -rho),
// and log|R_t| = (m - 1) log(1 - rho^2). Nothing m x m is stored in that form.
// Every other case keeps a dense Cholesky factor of R_t + nugget I. A single
// point is always the scalar 1.
class StructuredCorrT {
 public:
  enum class Form { scalar, tridiagonal, dense };

  StructuredCorrT() = default;

  // Throws InvalidGrid on non-increasing abscissae, SingularMatrix when the
  // dense factorization fails or rho = 1 on the tridiagonal path. With
  // closed_form = false the dense factor is used even when the closed form applies.
  static StructuredCorrT build(const VectorXd& grid, double beta, int d, double nugget,
                               bool closed_form = true);

  Form form() const { return form_; }
  Index size() const { return grid_.size(); }
  const VectorXd& grid() const { return grid_; }
  double beta() const { return beta_; }
  int exponent() const { return d_; }
  double rho() const { return rho_; }
  double log_det() const { return log_det_; }

  // R_t^-1 b, column by column.
  MatrixXd solve(const MatrixXd& b) const;
  VectorXd solve(const VectorXd& b) const;

  // The matrix this object represents (nugget included on the dense path).
  MatrixXd dense() const;
  MatrixXd inverse() const;

  // r_T(t - t_j) for every grid point (no nugget).
  VectorXd cross(double t) const;

 private:
  Form form_ = Form::scalar;
  VectorXd grid_;
  double beta_ = 0.0;
  int d_ = 1;
  double nugget_ = 0.0;
  double rho_ = 0.0;
  double log_det_ = 0.0;
  SpdFactor factor_;
};

StructuredCorrT build_R_t(const VectorXd& grid, double beta, int d, double nugget,
                          bool closed_form = true);

double corr_t(double t1, double t2, double beta, int d);

// (R_X^-1 (x) R_t^-1) v for v = vec of an n x m matrix stored run-major
// (index i * m + j). Applies one n x n and one m x m solve.
VectorXd kron_apply_inverse(const SpdFactor& rx, const StructuredCorrT& rt, const VectorXd& v);

// Same operation on the n x m matrix form: R_X^-1 Y R_t^-1.
MatrixXd kron_solve(const SpdFactor& rx, const StructuredCorrT& rt, const MatrixXd& y);

// m log|R_X| + n log|R_t|.
double logdet_kron(const SpdFactor& rx, const StructuredCorrT& rt);

// Inverse of R_X with row/column i deleted, from the inverse of the full R_X:
// A_(-i) - a_i a_i' / b_i where the partition moves i to the last position.
// Throws NumericalBreakdown when |b_i| < 1e-12.
MatrixXd downdate_Rx_inverse(const MatrixXd& rx_inv, Index i);

}  // namespace fkrig
