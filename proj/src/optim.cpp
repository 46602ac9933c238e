#include "fkrig/optim.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <memory>

namespace fkrig {

namespace {

constexpr double kPenalty = 1e300;

struct Context {
  const std::function<double(const Eigen::VectorXd&)>* f;
  int evals = 0;
  Eigen::VectorXd best_x;
  double best = kPenalty;
};

double trampoline(const gsl_vector* v, void* params) {
  auto* ctx = static_cast<Context*>(params);
  Eigen::VectorXd x(static_cast<Eigen::Index>(v->size));
  for (size_t k = 0; k < v->size; ++k) {
    x(static_cast<Eigen::Index>(k)) = gsl_vector_get(v, k);
  }
  ++ctx->evals;
  double value = kPenalty;
  try {
    value = (*ctx->f)(x);
  } catch (...) {
    value = kPenalty;
  }
  if (!std::isfinite(value)) {
    value = kPenalty;
  }
  if (value < ctx->best) {
    ctx->best = value;
    ctx->best_x = x;
  }
  return value;
}

struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* s) const { gsl_multimin_fminimizer_free(s); }
};

// One simplex run from x0; returns true on size convergence.
bool run_simplex(Context& ctx, const Eigen::VectorXd& x0, const NelderMeadOptions& opts) {
  const auto n = static_cast<size_t>(x0.size());
  std::unique_ptr<gsl_vector, VectorDeleter> start(gsl_vector_alloc(n));
  std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(n));
  for (size_t k = 0; k < n; ++k) {
    gsl_vector_set(start.get(), k, x0(static_cast<Eigen::Index>(k)));
    gsl_vector_set(step.get(), k, opts.initial_step);
  }
  gsl_multimin_function fn;
  fn.n = n;
  fn.f = &trampoline;
  fn.params = &ctx;
  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
  if (gsl_multimin_fminimizer_set(s.get(), &fn, start.get(), step.get()) != GSL_SUCCESS) {
    return false;
  }
  while (ctx.evals < opts.max_evals) {
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) {
      return false;
    }
    const double size = gsl_multimin_fminimizer_size(s.get());
    if (gsl_multimin_test_size(size, opts.size_tol) == GSL_SUCCESS) {
      return true;
    }
  }
  return false;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts) {
  gsl_set_error_handler_off();
  Context ctx;
  ctx.f = &f;
  ctx.best_x = x0;
  NelderMeadResult result;
  if (x0.size() == 0) {
    double value = kPenalty;
    try {
      value = f(x0);
    } catch (...) {
    }
    result.x = x0;
    result.value = std::isfinite(value) ? value : kPenalty;
    result.evals = 1;
    result.converged = true;
    return result;
  }
  bool converged = run_simplex(ctx, x0, opts);
  for (int r = 0; r < opts.restarts && converged && ctx.evals < opts.max_evals; ++r) {
    const double before = ctx.best;
    NelderMeadOptions polish = opts;
    polish.initial_step = std::max(opts.initial_step * 0.1, 10 * opts.size_tol);
    converged = run_simplex(ctx, ctx.best_x, polish);
    if (!(ctx.best < before - 1e-12 * (1.0 + std::abs(before)))) {
      break;
    }
  }
  result.x = ctx.best_x;
  result.value = ctx.best;
  result.evals = ctx.evals;
  result.converged = converged;
  return result;
}

}  // namespace fkrig
