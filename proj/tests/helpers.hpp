#pragma once

#include <random>

#include "fkrig/basis.hpp"
#include "fkrig/corr.hpp"
#include "fkrig/dataset.hpp"
#include "fkrig/design.hpp"

namespace fkrig::testing {

inline Design random_design(std::mt19937_64& rng, Index n, Index p, bool categorical_last = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<VarKind> kinds(static_cast<size_t>(p), VarKind::continuous(0.0, 1.0));
  if (categorical_last && p > 0) {
    kinds.back() = VarKind::categorical(3);
  }
  MatrixXd rows(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < p; ++k) {
      rows(i, k) = kinds[static_cast<size_t>(k)].is_categorical()
                       ? static_cast<double>(1 + static_cast<int>(rng() % 3))
                       : u(rng);
    }
  }
  return Design(default_names(p), kinds, rows);
}

inline VectorXd random_grid(std::mt19937_64& rng, Index m, bool equal) {
  std::uniform_real_distribution<double> u(0.3, 1.0);
  VectorXd g(m);
  double t = 0.0;
  for (Index j = 0; j < m; ++j) {
    g(j) = t;
    t += equal ? 0.5 : u(rng);
  }
  return g;
}

inline MatrixXd random_matrix(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd a(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) {
      a(i, j) = z(rng);
    }
  }
  return a;
}

inline CorrParams random_params(std::mt19937_64& rng, Index p, int d, double nugget) {
  std::uniform_real_distribution<double> u(0.3, 3.0);
  CorrParams xi;
  xi.alphas.resize(p);
  for (Index k = 0; k < p; ++k) {
    xi.alphas(k) = u(rng);
  }
  xi.beta = u(rng);
  xi.d = d;
  xi.nugget = nugget;
  return xi;
}

inline double max_abs(const MatrixXd& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace fkrig::testing
