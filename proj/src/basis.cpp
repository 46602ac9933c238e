#include "fkrig/basis.hpp"

#include <algorithm>
#include <cmath>

#include "fkrig/errors.hpp"

namespace fkrig {

void BasisSpec::validate(Index p) const {
  if (!(t_scale > 0.0) || !std::isfinite(t_center)) {
    throw InputError("basis: t_scale must be positive");
  }
  for (size_t a = 0; a < t_powers.size(); ++a) {
    if (t_powers[a] < 1) {
      throw InputError("basis: t powers must be >= 1 (the intercept is implicit)");
    }
    for (size_t b = 0; b < a; ++b) {
      if (t_powers[a] == t_powers[b]) {
        throw InputError("basis: duplicate t power " + std::to_string(t_powers[a]));
      }
    }
  }
  for (size_t a = 0; a < x_terms.size(); ++a) {
    if (x_terms[a].power < 1 || x_terms[a].var < 0 || x_terms[a].var >= p) {
      throw InputError("basis: invalid x term");
    }
    for (size_t b = 0; b < a; ++b) {
      if (x_terms[a] == x_terms[b]) {
        throw InputError("basis: duplicate x term");
      }
    }
  }
}

VectorXd BasisSpec::eval(const Design& design, const VectorXd& x, double t) const {
  VectorXd v(size());
  Index k = 0;
  v(k++) = 1.0;
  const double s = (t - t_center) / t_scale;
  for (int p : t_powers) {
    v(k++) = std::pow(s, p);
  }
  for (const auto& term : x_terms) {
    const double u = design.kinds[static_cast<size_t>(term.var)].scale(x(term.var));
    v(k++) = std::pow(u, term.power);
  }
  return v;
}

BasisSpec BasisSpec::intercept_only(const VectorXd& grid) {
  BasisSpec b;
  if (grid.size() > 0) {
    b.t_center = grid.minCoeff();
    const double range = grid.maxCoeff() - grid.minCoeff();
    b.t_scale = range > 0.0 ? range : 1.0;
  }
  return b;
}

MatrixXd basis_matrix(const BasisSpec& basis, const Design& design, const VectorXd& grid) {
  const Index n = design.size();
  const Index m = grid.size();
  MatrixXd v(n * m, basis.size());
  for (Index i = 0; i < n; ++i) {
    const VectorXd x = design.rows.row(i).transpose();
    for (Index j = 0; j < m; ++j) {
      v.row(i * m + j) = basis.eval(design, x, grid(j)).transpose();
    }
  }
  return v;
}

MatrixXd mean_surface(const BasisSpec& basis, const Design& design, const VectorXd& grid,
                      const VectorXd& mu) {
  const Index n = design.size();
  const Index m = grid.size();
  MatrixXd out(n, m);
  for (Index i = 0; i < n; ++i) {
    const VectorXd x = design.rows.row(i).transpose();
    for (Index j = 0; j < m; ++j) {
      out(i, j) = basis.eval(design, x, grid(j)).dot(mu);
    }
  }
  return out;
}

}  // namespace fkrig
