#pragma once

#include <Eigen/Core>
#include <functional>

namespace fkrig {

struct NelderMeadOptions {
  double initial_step = 0.5;
  double size_tol = 1e-9;  // simplex characteristic size at convergence
  int max_evals = 4000;
  int restarts = 1;  // re-seed the simplex at the optimum this many times
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evals = 0;
  bool converged = false;
};

// Derivative-free minimization with GSL's nmsimplex2. Objective exceptions and
// non-finite values are treated as a large penalty so a failed factorization
// only rejects the trial point.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts = {});

}  // namespace fkrig
