#include <cmath>

#include "doctest.h"
#include "fkrig/errors.hpp"
#include "fkrig/stage1.hpp"
#include "helpers.hpp"

using namespace fkrig;
using fkrig::testing::max_abs;

namespace {

FunctionalDataset three_run_toy() {
  FunctionalDataset d;
  d.design = Design(default_names(1), {VarKind::continuous(0, 1)},
                    (MatrixXd(3, 1) << 0.1, 0.5, 0.9).finished());
  d.t = {(VectorXd(3) << 1, 2, 3).finished(), (VectorXd(2) << 1, 2).finished(),
         (VectorXd(2) << 2, 3).finished()};
  d.y = {(VectorXd(3) << 1, 4, 7).finished(), (VectorXd(2) << 2, 6).finished(),
         (VectorXd(2) << 5, 1).finished()};
  return d;
}

// smooth deterministic wiggle standing in for a GP path
double wiggle(double t) { return 0.05 * std::sin(7.0 * t) + 0.03 * std::cos(13.0 * t); }

}  // namespace

TEST_CASE("average_profile") {
  SUBCASE("single regular run is centered") {
    FunctionalDataset d;
    d.design = Design::empty(1);
    d.t = {VectorXd::LinSpaced(4, 0, 3)};
    d.y = {(VectorXd(4) << 1, 3, 2, 6).finished()};
    const AverageProfile p = average_profile(d);
    CHECK(max_abs(p.e - (d.y[0].array() - 3.0).matrix()) < 1e-15);
    CHECK(std::abs(p.e.sum()) < 1e-12);
  }
  SUBCASE("two identical runs") {
    FunctionalDataset d;
    d.design = Design(default_names(1), {VarKind::continuous(0, 1)},
                      (MatrixXd(2, 1) << 0.2, 0.7).finished());
    d.t = {VectorXd::LinSpaced(3, 0, 2), VectorXd::LinSpaced(3, 0, 2)};
    d.y = {(VectorXd(3) << 1, 2, 6).finished(), (VectorXd(3) << 1, 2, 6).finished()};
    CHECK(max_abs(average_profile(d).e - (VectorXd(3) << -2, -1, 3).finished()) < 1e-15);
  }
  SUBCASE("irregular three-run toy by hand") {
    // run means 4, 4, 3; centered: (-3, 0, 3), (-2, 2), (2, -2)
    const AverageProfile p = average_profile(three_run_toy());
    CHECK(p.counts == (Eigen::VectorXi(3) << 2, 3, 2).finished());
    CHECK(p.e(0) == doctest::Approx(-2.5));
    CHECK(p.e(1) == doctest::Approx(4.0 / 3.0));
    CHECK(p.e(2) == doctest::Approx(0.5));
    double weighted = 0.0;
    for (Index j = 0; j < 3; ++j) weighted += p.counts(j) * p.e(j);
    CHECK(std::abs(weighted) < 1e-10);
  }
}

TEST_CASE("fit_marginal_t") {
  const VectorXd grid = VectorXd::LinSpaced(15, 0.0, 1.0);
  MarginalOptions opts;
  opts.d = 2;
  opts.nugget = 1e-6;
  SUBCASE("linear trend is selected") {
    VectorXd e(15);
    for (Index j = 0; j < 15; ++j) e(j) = 1.0 + 2.0 * grid(j) + wiggle(grid(j));
    const MarginalTModel mt = fit_marginal_t(e, grid, {1, 2}, opts);
    CHECK(std::find(mt.t_powers.begin(), mt.t_powers.end(), 1) != mt.t_powers.end());
    CHECK(mt.beta0 >= std::exp(-8.0));
    CHECK(mt.beta0 <= std::exp(8.0));
  }
  SUBCASE("constant profile is intercept-only") {
    const MarginalTModel mt = fit_marginal_t(VectorXd::Constant(15, 2.5), grid, {1, 2}, opts);
    CHECK(mt.t_powers.empty());
    CHECK(mt.predict(0.37) == doctest::Approx(2.5).epsilon(1e-9));
  }
  SUBCASE("interpolates without nugget") {
    MarginalOptions exact = opts;
    exact.d = 1;
    exact.nugget = 0.0;
    VectorXd e(15);
    for (Index j = 0; j < 15; ++j) e(j) = std::sin(3 * grid(j));
    const MarginalTModel mt = fit_marginal_t(e, grid, {1, 2}, exact);
    for (Index j = 0; j < 15; ++j) CHECK(std::abs(mt.predict(grid(j)) - e(j)) < 1e-6);
  }
  SUBCASE("too few points") {
    CHECK_THROWS_AS(fit_marginal_t(VectorXd::Zero(2), VectorXd::LinSpaced(2, 0, 1), {1}, opts),
                    InputError);
  }
}

TEST_CASE("fit_marginal_x") {
  std::mt19937_64 rng(41);
  MarginalOptions opts;
  opts.nugget = 1e-6;
  SUBCASE("constant means are intercept-only") {
    const Design d = fkrig::testing::random_design(rng, 8, 2);
    const MarginalXModel mx = fit_marginal_x(VectorXd::Constant(8, -1.0), d, linear_x_terms(d), opts);
    CHECK(mx.x_terms.empty());
  }
  SUBCASE("linear trend in x1 is selected") {
    const Design d = fkrig::testing::random_design(rng, 12, 2);
    VectorXd ybar(12);
    for (Index i = 0; i < 12; ++i) ybar(i) = 3.0 * d.rows(i, 0) + wiggle(d.rows(i, 1));
    const MarginalXModel mx = fit_marginal_x(ybar, d, linear_x_terms(d), opts);
    CHECK(std::find(mx.x_terms.begin(), mx.x_terms.end(), XTerm{0, 1}) != mx.x_terms.end());
    CHECK(mx.alpha0.size() == 2);
  }
  SUBCASE("smallest case p = 1, n = 3") {
    const Design d = fkrig::testing::random_design(rng, 3, 1);
    const MarginalXModel mx = fit_marginal_x((VectorXd(3) << 1, 2, 0).finished(), d,
                                             linear_x_terms(d), opts);
    for (Index i = 0; i < 3; ++i) {
      CHECK(std::isfinite(mx.predict(d.rows.row(i).transpose())));
    }
  }
}

TEST_CASE("init_missing") {
  std::mt19937_64 rng(42);
  MarginalOptions opts;
  opts.d = 1;
  opts.nugget = 0.0;
  SUBCASE("regular data has nothing to fill") {
    FunctionalDataset d;
    d.design = fkrig::testing::random_design(rng, 4, 1);
    const VectorXd g = VectorXd::LinSpaced(5, 0, 1);
    for (int i = 0; i < 4; ++i) {
      d.t.push_back(g);
      d.y.push_back(fkrig::testing::random_matrix(rng, 5, 1));
    }
    Stage1Options so;
    so.marginal = opts;
    const Stage1Result r = run_stage1(d, so);
    const MaskedGridData mg = MaskedGridData::from(d);
    CHECK(mg.missing_count() == 0);
    CHECK(max_abs(r.c0 - mg.y) == 0.0);
  }
  SUBCASE("additive truth with one symmetric gap is recovered") {
    // y = 2 + 1.5 t + 3 x; the gap sits at the grid midpoint so every run's
    // observed mean of the t part equals the full-grid mean
    FunctionalDataset d;
    d.design = Design(default_names(1), {VarKind::continuous(0, 1)},
                      (MatrixXd(4, 1) << 0.1, 0.4, 0.6, 0.95).finished());
    const VectorXd g = VectorXd::LinSpaced(5, 0, 4);
    for (Index i = 0; i < 4; ++i) {
      VectorXd t = g;
      if (i == 2) t = (VectorXd(4) << 0, 1, 3, 4).finished();
      VectorXd y(t.size());
      for (Index j = 0; j < t.size(); ++j) y(j) = 2 + 1.5 * t(j) + 3 * d.design.rows(i, 0);
      d.t.push_back(t);
      d.y.push_back(y);
    }
    Stage1Options so;
    so.marginal = opts;
    const Stage1Result r = run_stage1(d, so);
    CHECK(std::abs(r.c0(2, 2) - (2 + 1.5 * 2 + 3 * 0.6)) < 1e-6);
    CHECK(r.c0.allFinite());
    CHECK(r.basis.t_center == 0.0);
    CHECK(r.basis.t_scale == 4.0);
  }
}

TEST_CASE("decay transform") {
  const VectorXd grid = VectorXd::LinSpaced(51, 0.0, 100.0);
  SUBCASE("recovers a known decay") {
    VectorXd s(51);
    for (Index j = 0; j < 51; ++j) s(j) = std::exp(-0.01 * grid(j)) * (5 + grid(j));
    const DecayTransform dt = fit_decay_transform(s, grid);
    CHECK(std::abs(dt.lambda - 0.01) < 1e-4);
    CHECK(dt.poly(0) == doctest::Approx(5.0).epsilon(1e-3));
    CHECK(dt.poly(1) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(dt.poly(2)) < 1e-4);
  }
  SUBCASE("flat profile stays at the boundary") {
    const DecayTransform dt = fit_decay_transform(VectorXd::Constant(51, 3.0), grid);
    CHECK(dt.lambda == 0.0);
    CHECK(dt.poly(0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::abs(dt.poly(1)) < 1e-12);
    CHECK(std::abs(dt.poly(2)) < 1e-12);
  }
  SUBCASE("round trip") {
    const FunctionalDataset d = three_run_toy();
    const FunctionalDataset back = apply_transform(
        apply_transform(d, 0.37, TransformDirection::forward), 0.37, TransformDirection::inverse);
    for (Index i = 0; i < 3; ++i) {
      CHECK(max_abs(back.y[static_cast<size_t>(i)] - d.y[static_cast<size_t>(i)]) < 1e-10);
    }
  }
  SUBCASE("needs four points") {
    CHECK_THROWS_AS(fit_decay_transform(VectorXd::Zero(3), VectorXd::LinSpaced(3, 0, 1)), InputError);
  }
}
