#pragma once

#include "fkrig/kron_kriging.hpp"

namespace fkrig::testing {

// f(x, t) = (x1 - 0.3)^2 + 0.1 t on 8 equally spaced runs and 6 grid points;
// the minimax solution is x1 = 0.3.
inline KrigingModel analytic_minimax_model() {
  RegularData d;
  d.design = Design(default_names(1), {VarKind::continuous(0, 1)}, VectorXd::LinSpaced(8, 0, 1));
  d.grid = VectorXd::LinSpaced(6, 0, 1);
  d.y.resize(8, 6);
  for (Index i = 0; i < 8; ++i) {
    for (Index j = 0; j < 6; ++j) {
      const double x = d.design.rows(i, 0) - 0.3;
      d.y(i, j) = x * x + 0.1 * d.grid(j);
    }
  }
  CorrParams init;
  init.alphas = VectorXd::Constant(1, 1.0);
  init.beta = 1.0;
  init.d = 2;
  init.nugget = 1e-10;
  return fit_regular(d, BasisSpec::intercept_only(d.grid), init);
}

}  // namespace fkrig::testing
