#include <cmath>

#include "doctest.h"
#include "fkrig/em_complete.hpp"
#include "fkrig/errors.hpp"
#include "fkrig/oracle.hpp"
#include "helpers.hpp"

using namespace fkrig;
using fkrig::testing::max_abs;

namespace {

struct Toy {
  MaskedGridData data;
  BasisSpec basis;
  Theta theta;
  MatrixXd fill;
};

Toy make_toy(std::mt19937_64& rng, Index n, Index m, double keep = 0.6, int d = 1) {
  Toy toy;
  toy.data.design = fkrig::testing::random_design(rng, n, 1);
  toy.data.grid = VectorXd::LinSpaced(m, 0.0, 1.0);
  toy.data.y = fkrig::testing::random_matrix(rng, n, m);
  toy.data.observed = MaskMatrix::Constant(n, m, true);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (u(rng) > keep) {
        toy.data.observed(i, j) = false;
        toy.data.y(i, j) = std::nan("");
      }
    }
  }
  toy.data.observed(0, 0) = true;
  if (std::isnan(toy.data.y(0, 0))) {
    toy.data.y(0, 0) = 0.3;
  }
  toy.basis = BasisSpec::intercept_only(toy.data.grid);
  toy.basis.t_powers = {1};
  toy.theta.mu = VectorXd(2);
  toy.theta.mu << 0.2, -0.5;
  toy.theta.sigma2 = 1.3;
  toy.theta.xi.alphas = VectorXd::Constant(1, 0.5 + 2.0 * u(rng));
  toy.theta.xi.beta = 0.5 + 2.0 * u(rng);
  toy.theta.xi.d = d;
  toy.theta.xi.nugget = 1e-8;
  toy.fill = fkrig::testing::random_matrix(rng, n, m);
  return toy;
}

std::vector<Index> others_and_observed(const EMState& s, Index i) {
  std::vector<Index> given;
  for (Index k = 0; k < s.runs(); ++k) {
    for (Index j = 0; j < s.points(); ++j) {
      if (k != i || s.observed(k, j)) {
        given.push_back(k * s.points() + j);
      }
    }
  }
  return given;
}

}  // namespace

TEST_CASE("run conditionals") {
  std::mt19937_64 rng(31);
  Toy toy = make_toy(rng, 3, 3);
  const EMState s = EMState::init(toy.data, toy.basis, toy.theta, toy.fill);
  const EMCache cache(s);
  SUBCASE("prior") {
    const RunConditional g = prior_conditional(cache, 1);
    const auto [mean, cov] = oracle::dense_joint(toy.data.design, toy.data.grid, toy.basis,
                                                 toy.theta.xi, toy.theta.mu, toy.theta.sigma2);
    CHECK(max_abs(g.zeta - mean.segment(3, 3)) < 1e-12);
    CHECK(max_abs(g.sigma - cov.block(3, 3, 3, 3)) < 1e-12);
  }
  SUBCASE("prior with a huge beta is nearly diagonal") {
    EMState s2 = s;
    s2.theta.xi.beta = 1e6;
    s2.theta.sigma2 = 1.0;
    s2.theta.xi.nugget = 0.0;
    const RunConditional g = prior_conditional(EMCache(s2), 0);
    CHECK(max_abs(g.sigma - MatrixXd::Identity(3, 3)) < 1e-12);
  }
  SUBCASE("own profile against brute-force conditioning") {
    MaskedGridData d = toy.data;
    d.observed.row(2) << true, false, true;
    d.y(2, 0) = 0.4;
    d.y(2, 2) = -1.1;
    const EMState s2 = EMState::init(d, toy.basis, toy.theta, toy.fill);
    const EMCache c2(s2);
    const RunConditional own = own_profile_conditional(c2, s2, 2);
    const RunConditional prior = prior_conditional(c2, 2);
    VectorXd vals(2);
    vals << 0.4, -1.1;
    const oracle::Conditional ref = oracle::gaussian_condition(prior.zeta, prior.sigma, {1}, {0, 2}, vals);
    CHECK(std::abs(own.zeta(1) - ref.mean(0)) < 1e-12);
    CHECK(std::abs(own.sigma(1, 1) - ref.cov(0, 0)) < 1e-12);
    CHECK(own.zeta(0) == 0.4);
    CHECK(own.sigma(0, 0) == 0.0);
    CHECK(own.sigma(2, 1) == 0.0);
  }
  SUBCASE("own profile of an unobserved run is the prior") {
    MaskedGridData d = toy.data;
    d.observed.row(1).setConstant(false);
    const EMState s2 = EMState::init(d, toy.basis, toy.theta, toy.fill);
    const EMCache c2(s2);
    const RunConditional own = own_profile_conditional(c2, s2, 1);
    const RunConditional prior = prior_conditional(c2, 1);
    CHECK(max_abs(own.zeta - prior.zeta) == 0.0);
    CHECK(max_abs(own.sigma - prior.sigma) == 0.0);
  }
  SUBCASE("others against the 9-dimensional joint") {
    const auto [mean, cov] = oracle::dense_joint(toy.data.design, toy.data.grid, toy.basis,
                                                 toy.theta.xi, toy.theta.mu, toy.theta.sigma2);
    for (Index i = 0; i < 3; ++i) {
      const RunConditional g = others_conditional(cache, s.c, i);
      std::vector<Index> hidden{i * 3, i * 3 + 1, i * 3 + 2};
      std::vector<Index> given;
      VectorXd vals(6);
      for (Index k = 0, a = 0; k < 3; ++k) {
        if (k == i) continue;
        for (Index j = 0; j < 3; ++j, ++a) {
          given.push_back(k * 3 + j);
          vals(a) = s.c(k, j);
        }
      }
      const oracle::Conditional ref = oracle::gaussian_condition(mean, cov, hidden, given, vals);
      CHECK(max_abs(g.zeta - ref.mean) < 1e-8);
      CHECK(max_abs(g.sigma - ref.cov) < 1e-8);
    }
  }
  SUBCASE("isolated run: others equals the prior") {
    EMState s2 = s;
    s2.design.rows << 0.0, 0.5, 1.0;
    s2.theta.xi.alphas(0) = 400.0;
    const EMCache c2(s2);
    const RunConditional g = others_conditional(c2, s2.c, 1);
    const RunConditional p = prior_conditional(c2, 1);
    CHECK(max_abs(g.zeta - p.zeta) < 1e-12);
    CHECK(max_abs(g.sigma - p.sigma) < 1e-12);
  }
}

TEST_CASE("posterior_combine matches full-joint conditioning") {
  std::mt19937_64 rng(32);
  int checked = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const Index n = 2 + static_cast<Index>(rng() % 3);
    const Index m = 2 + static_cast<Index>(rng() % 3);
    Toy toy = make_toy(rng, n, m);
    const EMState s = EMState::init(toy.data, toy.basis, toy.theta, toy.fill);
    const EMCache cache(s);
    const auto [mean, cov] = oracle::dense_joint(s.design, s.grid, s.basis, s.theta.xi, s.theta.mu,
                                                 s.theta.sigma2);
    for (Index i = 0; i < n; ++i) {
      const auto& miss = cache.miss(i);
      if (miss.empty()) continue;
      const Posterior post = run_posterior(cache, s, i);
      std::vector<Index> hidden;
      for (Index j : miss) hidden.push_back(i * m + j);
      const std::vector<Index> given = others_and_observed(s, i);
      VectorXd vals(static_cast<Index>(given.size()));
      for (size_t a = 0; a < given.size(); ++a) {
        vals(static_cast<Index>(a)) = s.c(given[a] / m, given[a] % m);
      }
      const oracle::Conditional ref = oracle::gaussian_condition(mean, cov, hidden, given, vals);
      CHECK(max_abs(post.eta - ref.mean) < 1e-8);
      CHECK(max_abs(post.gamma - ref.cov) < 1e-8);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("posterior_combine cancellations") {
  std::mt19937_64 rng(33);
  Toy toy = make_toy(rng, 3, 4);
  toy.data.observed.row(1) << true, true, false, false;
  toy.data.y(1, 0) = 0.1;
  toy.data.y(1, 1) = 0.2;
  const EMState s = EMState::init(toy.data, toy.basis, toy.theta, toy.fill);
  const EMCache cache(s);
  const RunConditional prior = prior_conditional(cache, 1);
  const RunConditional own = own_profile_conditional(cache, s, 1);
  const RunConditional oth = others_conditional(cache, s.c, 1);
  const std::vector<Index> obs{0, 1}, miss{2, 3};
  VectorXd y(2);
  y << 0.1, 0.2;
  SUBCASE("others = prior gives the own conditional") {
    const Posterior p = posterior_combine(prior, own, prior, obs, miss, y);
    CHECK(std::abs(p.eta(0) - own.zeta(2)) < 1e-10);
    CHECK(std::abs(p.eta(1) - own.zeta(3)) < 1e-10);
    CHECK(max_abs(p.gamma - own.sigma.block(2, 2, 2, 2)) < 1e-10);
  }
  SUBCASE("own = prior with nothing observed gives the others conditional") {
    const Posterior p = posterior_combine(prior, prior, oth, {}, {0, 1, 2, 3}, VectorXd(0));
    CHECK(max_abs(p.eta - oth.zeta) < 1e-12);
    CHECK(max_abs(p.gamma - oth.sigma) < 1e-12);
  }
}

TEST_CASE("ce_sweep") {
  std::mt19937_64 rng(34);
  SUBCASE("no missing data leaves the state unchanged") {
    Toy toy = make_toy(rng, 3, 3, 2.0);
    EMState s = EMState::init(toy.data, toy.basis, toy.theta, toy.fill);
    const MatrixXd before = s.c;
    CHECK(ce_sweep(s) == 0.0);
    CHECK(max_abs(s.c - before) == 0.0);
  }
  SUBCASE("single run reaches the own conditional after one sweep") {
    Toy toy = make_toy(rng, 1, 4, 2.0);
    toy.data.observed(0, 2) = false;
    toy.data.y(0, 2) = std::nan("");
    EMState s = EMState::init(toy.data, toy.basis, toy.theta, toy.fill);
    const EMCache cache(s);
    ce_sweep(s, cache);
    const RunConditional own = own_profile_conditional(cache, s, 0);
    CHECK(std::abs(s.c(0, 2) - own.zeta(2)) < 1e-12);
    CHECK(ce_sweep(s, cache) < 1e-12);
  }
  SUBCASE("fixed point equals the dense conditional mean; observed cells untouched") {
    Toy toy = make_toy(rng, 3, 4);
    EMState s = EMState::init(toy.data, toy.basis, toy.theta, toy.fill);
    const MatrixXd start = s.c;
    const EMCache cache(s);
    for (int k = 0; k < 50; ++k) {
      ce_sweep(s, cache);
    }
    const oracle::MissingMoments ref = oracle::dense_conditional_mean(
        toy.data, toy.basis, toy.theta.xi, toy.theta.mu, toy.theta.sigma2);
    for (size_t a = 0; a < ref.cells.size(); ++a) {
      CHECK(std::abs(s.c(ref.cells[a].first, ref.cells[a].second) - ref.mean(static_cast<Index>(a))) < 1e-6);
    }
    CHECK(fixed_point_residual(s, cache) < 1e-6);
    for (Index i = 0; i < 3; ++i) {
      for (Index j = 0; j < 4; ++j) {
        if (toy.data.observed(i, j)) {
          CHECK(s.c(i, j) == start(i, j));
        }
      }
    }
  }
}

TEST_CASE("gibbs sweep determinism") {
  std::mt19937_64 rng(35);
  Toy toy = make_toy(rng, 2, 3);
  EMState a = EMState::init(toy.data, toy.basis, toy.theta, toy.fill);
  EMState b = a;
  const EMCache cache(a);
  std::mt19937_64 ra(7), rb(7);
  gibbs_sweep_sample(a, cache, ra);
  gibbs_sweep_sample(b, cache, rb);
  CHECK(max_abs(a.c - b.c) == 0.0);
}

TEST_CASE("dense_conditional_mean edge cases") {
  std::mt19937_64 rng(36);
  Toy toy = make_toy(rng, 2, 3, 2.0);
  CHECK(oracle::dense_conditional_mean(toy.data, toy.basis, toy.theta.xi, toy.theta.mu,
                                       toy.theta.sigma2)
            .mean.size() == 0);
  toy.data.observed.setConstant(false);
  const oracle::MissingMoments all = oracle::dense_conditional_mean(
      toy.data, toy.basis, toy.theta.xi, toy.theta.mu, toy.theta.sigma2);
  const auto [mean, cov] = oracle::dense_joint(toy.data.design, toy.data.grid, toy.basis,
                                               toy.theta.xi, toy.theta.mu, toy.theta.sigma2);
  CHECK(max_abs(all.mean - mean) == 0.0);
  CHECK(max_abs(all.cov - cov) == 0.0);
  MaskedGridData big = toy.data;
  big.design = fkrig::testing::random_design(rng, 20, 1);
  big.grid = VectorXd::LinSpaced(13, 0, 1);
  big.y = MatrixXd::Zero(20, 13);
  big.observed = MaskMatrix::Constant(20, 13, true);
  CHECK_THROWS_AS(oracle::dense_conditional_mean(big, toy.basis, toy.theta.xi, toy.theta.mu, 1.0),
                  SizeCapExceeded);
}

TEST_CASE("check_prop2") {
  std::mt19937_64 rng(37);
  Toy toy = make_toy(rng, 4, 10, 2.0, 2);
  toy.data.design.rows << 0.1, 0.35, 0.6, 0.85;
  toy.theta.xi.alphas(0) = 20.0;
  toy.theta.xi.beta = 30.0;
  SUBCASE("complete data gives zeros") {
    const EMState s = EMState::init(toy.data, toy.basis, toy.theta, toy.fill);
    CHECK(max_abs(check_prop2(EMCache(s))) == 0.0);
  }
  SUBCASE("the maximum decreases as the truncated run gains observations") {
    // runs 1..3 keep 6 points, run 0 keeps m0
    std::vector<double> maxima;
    for (int m0 : {1, 2, 3, 5}) {
      MaskedGridData d = toy.data;
      for (Index i = 0; i < 4; ++i) {
        const Index keep = i == 0 ? m0 : 6;
        for (Index j = keep; j < 10; ++j) {
          d.observed(i, j) = false;
        }
      }
      const EMState s = EMState::init(d, toy.basis, toy.theta, toy.fill);
      const EMCache cache(s);
      const VectorXd v = check_prop2(cache);
      maxima.push_back(v.maxCoeff());
      // every other run's missing cells are missing in run 0 too: unit columns
      CHECK(v(0) == doctest::Approx(cache.d(0).cwiseAbs().sum()).epsilon(1e-9));
    }
    for (size_t k = 1; k < maxima.size(); ++k) {
      CHECK(maxima[k] < maxima[k - 1]);
    }
  }
}
