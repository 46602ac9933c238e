#pragma once

#include <Eigen/Core>
#include <vector>

#include "fkrig/design.hpp"

namespace fkrig {

struct XTerm {
  Index var = 0;
  int power = 1;
  bool operator==(const XTerm&) const = default;
};

// Mean functions v(x, t) = (1, k(t)', g(x)')'.
//
// Order is fixed: the intercept, then one monomial ((t - t_center) / t_scale)^p
// per entry of t_powers, then one monomial u_var^power per x term, where u is
// the coordinate rescaled to [0, 1] (level code for categorical variables).
// No x-t interactions.
struct BasisSpec {
  std::vector<int> t_powers;
  std::vector<XTerm> x_terms;
  double t_center = 0.0;
  double t_scale = 1.0;

  Index size() const { return 1 + static_cast<Index>(t_powers.size() + x_terms.size()); }

  // Throws InputError on duplicate or non-positive terms.
  void validate(Index p) const;

  VectorXd eval(const Design& design, const VectorXd& x, double t) const;

  // t_center / t_scale chosen so the grid maps onto [0, 1].
  static BasisSpec intercept_only(const VectorXd& grid);
};

// N x L basis matrix over a regular grid; row i * m + j is v(x_i, t_j).
MatrixXd basis_matrix(const BasisSpec& basis, const Design& design, const VectorXd& grid);

// n x m matrix of v(x_i, t_j)' mu.
MatrixXd mean_surface(const BasisSpec& basis, const Design& design, const VectorXd& grid,
                      const VectorXd& mu);

}  // namespace fkrig
