#include "fkrig/corr.hpp"

#include <cmath>
#include <sstream>

#include "fkrig/errors.hpp"

namespace fkrig {

namespace {

double power_distance(double delta, int d) {
  const double a = std::abs(delta);
  return d == 1 ? a : a * a;
}

}  // namespace

double CorrParams::rho(double spacing) const { return std::exp(-beta * spacing); }

void CorrParams::validate() const {
  for (Index k = 0; k < alphas.size(); ++k) {
    if (!(alphas(k) >= 0.0)) {
      throw InputError("correlation rate alpha_" + std::to_string(k + 1) + " must be nonnegative");
    }
  }
  if (!(beta >= 0.0)) {
    throw InputError("correlation rate beta must be nonnegative");
  }
  if (!(nugget >= 0.0)) {
    throw InputError("nugget must be nonnegative");
  }
  if (d != 1 && d != 2) {
    throw InputError("correlation exponent d must be 1 or 2");
  }
}

double corr_value(double a, double b, const VarKind& kind, double alpha, int d) {
  if (kind.is_categorical()) {
    return a == b ? 1.0 : std::exp(-alpha);
  }
  return std::exp(-alpha * power_distance(a - b, d));
}

double corr_x(const Design& design, const CorrParams& params, const VectorXd& a,
              const VectorXd& b) {
  double r = 1.0;
  for (Index k = 0; k < design.dim(); ++k) {
    const auto& kind = design.kinds[static_cast<size_t>(k)];
    r *= corr_value(kind.scale(a(k)), kind.scale(b(k)), kind, params.alphas(k), params.d);
  }
  return r;
}

VectorXd cross_corr_x(const Design& design, const CorrParams& params, const VectorXd& x) {
  if (x.size() != design.dim()) {
    throw DimensionMismatch("setting has " + std::to_string(x.size()) + " coordinates, design has " +
                            std::to_string(design.dim()));
  }
  VectorXd r(design.size());
  for (Index i = 0; i < design.size(); ++i) {
    r(i) = corr_x(design, params, x, design.rows.row(i).transpose());
  }
  return r;
}

SpdFactor::SpdFactor(MatrixXd a) : a_(std::move(a)), llt_(a_) {
  if (llt_.info() != Eigen::Success) {
    throw SingularMatrix("Cholesky factorization failed (matrix not positive definite)");
  }
  const MatrixXd& l = llt_.matrixLLT();
  double sum = 0.0;
  for (Index i = 0; i < l.rows(); ++i) {
    const double pivot = l(i, i) * l(i, i);
    if (!(pivot > 1e-15 * a_(i, i))) {
      std::ostringstream os;
      os << "Cholesky pivot " << i + 1 << " vanished (numerically singular matrix)";
      throw SingularMatrix(os.str());
    }
    sum += std::log(l(i, i));
  }
  log_det_ = 2.0 * sum;
}

MatrixXd SpdFactor::inverse() const {
  return llt_.solve(MatrixXd::Identity(size(), size()));
}

SpdFactor build_R_x(const Design& design, const CorrParams& params) {
  const Index n = design.size();
  if (n == 0) {
    throw InputError("design is empty");
  }
  if (params.alphas.size() != design.dim()) {
    throw DimensionMismatch("alphas length " + std::to_string(params.alphas.size()) +
                            " differs from design dimension " + std::to_string(design.dim()));
  }
  // Scale once; the categorical branch compares codes directly.
  MatrixXd u(n, design.dim());
  for (Index k = 0; k < design.dim(); ++k) {
    const auto& kind = design.kinds[static_cast<size_t>(k)];
    for (Index i = 0; i < n; ++i) {
      u(i, k) = kind.scale(design.rows(i, k));
    }
  }
  MatrixXd r(n, n);
  for (Index i = 0; i < n; ++i) {
    r(i, i) = 1.0 + params.nugget;
    for (Index j = 0; j < i; ++j) {
      double v = 1.0;
      for (Index k = 0; k < design.dim(); ++k) {
        v *= corr_value(u(i, k), u(j, k), design.kinds[static_cast<size_t>(k)], params.alphas(k),
                        params.d);
      }
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return SpdFactor(std::move(r));
}

std::optional<double> equal_spacing(const VectorXd& grid) {
  const Index m = grid.size();
  if (m < 2) {
    return std::nullopt;
  }
  const double mean = (grid(m - 1) - grid(0)) / static_cast<double>(m - 1);
  if (!(mean > 0.0)) {
    return std::nullopt;
  }
  for (Index j = 1; j < m; ++j) {
    if (std::abs((grid(j) - grid(j - 1)) - mean) / mean >= 1e-9) {
      return std::nullopt;
    }
  }
  return mean;
}

double corr_t(double t1, double t2, double beta, int d) {
  return std::exp(-beta * power_distance(t1 - t2, d));
}

StructuredCorrT StructuredCorrT::build(const VectorXd& grid, double beta, int d, double nugget,
                                       bool closed_form) {
  const Index m = grid.size();
  if (m < 1) {
    throw InvalidGrid("functional grid is empty");
  }
  for (Index j = 1; j < m; ++j) {
    if (!(grid(j) > grid(j - 1))) {
      std::ostringstream os;
      os << "functional grid is not strictly increasing at position " << j + 1 << " (t=" << grid(j)
         << ")";
      throw InvalidGrid(os.str());
    }
  }
  StructuredCorrT rt;
  rt.grid_ = grid;
  rt.beta_ = beta;
  rt.d_ = d;
  rt.nugget_ = nugget;
  if (m == 1) {
    rt.form_ = Form::scalar;
    rt.log_det_ = 0.0;
    return rt;
  }
  const auto spacing = equal_spacing(grid);
  if (closed_form && spacing && d == 1 && nugget == 0.0) {
    rt.form_ = Form::tridiagonal;
    rt.rho_ = std::exp(-beta * *spacing);
    const double one_minus = 1.0 - rt.rho_ * rt.rho_;
    if (!(one_minus > 0.0)) {
      throw SingularMatrix("AR(1) correlation with rho = 1 is singular (beta = 0)");
    }
    rt.log_det_ = static_cast<double>(m - 1) * std::log(one_minus);
    return rt;
  }
  rt.form_ = Form::dense;
  MatrixXd r(m, m);
  for (Index j = 0; j < m; ++j) {
    r(j, j) = 1.0 + nugget;
    for (Index l = 0; l < j; ++l) {
      r(j, l) = r(l, j) = corr_t(grid(j), grid(l), beta, d);
    }
  }
  rt.factor_ = SpdFactor(std::move(r));
  rt.log_det_ = rt.factor_.log_det();
  return rt;
}

StructuredCorrT build_R_t(const VectorXd& grid, double beta, int d, double nugget,
                          bool closed_form) {
  return StructuredCorrT::build(grid, beta, d, nugget, closed_form);
}

MatrixXd StructuredCorrT::solve(const MatrixXd& b) const {
  if (b.rows() != size()) {
    throw DimensionMismatch("R_t solve: right-hand side has " + std::to_string(b.rows()) +
                            " rows, grid has " + std::to_string(size()));
  }
  switch (form_) {
    case Form::scalar:
      return b;
    case Form::dense:
      return factor_.solve(b);
    case Form::tridiagonal: {
      const Index m = size();
      const double scale = 1.0 / (1.0 - rho_ * rho_);
      const double mid = 1.0 + rho_ * rho_;
      MatrixXd out(b.rows(), b.cols());
      out.row(0) = b.row(0) - rho_ * b.row(1);
      for (Index j = 1; j + 1 < m; ++j) {
        out.row(j) = mid * b.row(j) - rho_ * (b.row(j - 1) + b.row(j + 1));
      }
      out.row(m - 1) = b.row(m - 1) - rho_ * b.row(m - 2);
      return scale * out;
    }
  }
  return b;
}

VectorXd StructuredCorrT::solve(const VectorXd& b) const {
  return solve(MatrixXd(b)).col(0);
}

MatrixXd StructuredCorrT::dense() const {
  const Index m = size();
  switch (form_) {
    case Form::scalar:
      return MatrixXd::Ones(1, 1);
    case Form::dense:
      return factor_.matrix();
    case Form::tridiagonal: {
      MatrixXd r(m, m);
      for (Index j = 0; j < m; ++j) {
        for (Index l = 0; l < m; ++l) {
          r(j, l) = std::pow(rho_, static_cast<double>(std::abs(j - l)));
        }
      }
      return r;
    }
  }
  return {};
}

MatrixXd StructuredCorrT::inverse() const {
  return solve(MatrixXd(MatrixXd::Identity(size(), size())));
}

VectorXd StructuredCorrT::cross(double t) const {
  VectorXd r(size());
  for (Index j = 0; j < size(); ++j) {
    r(j) = corr_t(t, grid_(j), beta_, d_);
  }
  return r;
}

MatrixXd kron_solve(const SpdFactor& rx, const StructuredCorrT& rt, const MatrixXd& y) {
  if (y.rows() != rx.size() || y.cols() != rt.size()) {
    throw DimensionMismatch("Kronecker solve: data is " + std::to_string(y.rows()) + "x" +
                            std::to_string(y.cols()) + ", factors are " +
                            std::to_string(rx.size()) + " and " + std::to_string(rt.size()));
  }
  const MatrixXd left = rx.solve(y);
  return rt.solve(MatrixXd(left.transpose())).transpose();
}

VectorXd kron_apply_inverse(const SpdFactor& rx, const StructuredCorrT& rt, const VectorXd& v) {
  const Index n = rx.size();
  const Index m = rt.size();
  if (v.size() != n * m) {
    throw DimensionMismatch("Kronecker apply: vector length " + std::to_string(v.size()) +
                            " differs from n*m = " + std::to_string(n * m));
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const MatrixXd y = Eigen::Map<const RowMajor>(v.data(), n, m);
  const RowMajor out = kron_solve(rx, rt, y);
  return Eigen::Map<const VectorXd>(out.data(), n * m);
}

double logdet_kron(const SpdFactor& rx, const StructuredCorrT& rt) {
  return static_cast<double>(rt.size()) * rx.log_det() +
         static_cast<double>(rx.size()) * rt.log_det();
}

MatrixXd downdate_Rx_inverse(const MatrixXd& rx_inv, Index i) {
  const Index n = rx_inv.rows();
  if (rx_inv.cols() != n || i < 0 || i >= n) {
    throw DimensionMismatch("downdate: index out of range or matrix not square");
  }
  const double b = rx_inv(i, i);
  if (std::abs(b) < 1e-12) {
    throw NumericalBreakdown("downdate: pivot b_i vanished for run " + std::to_string(i + 1));
  }
  std::vector<Index> keep;
  for (Index r = 0; r < n; ++r) {
    if (r != i) {
      keep.push_back(r);
    }
  }
  const auto k = static_cast<Index>(keep.size());
  MatrixXd out(k, k);
  VectorXd a(k);
  for (Index r = 0; r < k; ++r) {
    a(r) = rx_inv(keep[static_cast<size_t>(r)], i);
  }
  for (Index r = 0; r < k; ++r) {
    for (Index c = 0; c < k; ++c) {
      out(r, c) = rx_inv(keep[static_cast<size_t>(r)], keep[static_cast<size_t>(c)]) - a(r) * a(c) / b;
    }
  }
  return out;
}

}  // namespace fkrig
