#pragma once

#include <Eigen/Core>
#include <vector>

#include "fkrig/design.hpp"

namespace fkrig {

using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Functional data: run i was observed at abscissae t[i] with responses y[i].
// Abscissae are strictly increasing within a run; runs may differ in length.
struct FunctionalDataset {
  Design design;
  std::vector<VectorXd> t;
  std::vector<VectorXd> y;

  Index runs() const { return static_cast<Index>(t.size()); }
  Index total_points() const;

  // Throws DataError naming the run and point at fault.
  void validate() const;

  // All runs share identical abscissae (bitwise).
  bool is_regular() const;

  // Sorted union of every run's abscissae.
  VectorXd union_grid() const;

  FunctionalDataset without_run(Index i) const;
  FunctionalDataset select_runs(const std::vector<Index>& idx) const;
};

// Data on a common grid: y(i, j) is run i at grid(j).
struct RegularData {
  Design design;
  VectorXd grid;
  MatrixXd y;

  Index runs() const { return y.rows(); }
  Index points() const { return y.cols(); }

  // Throws DataError when the dataset is irregular.
  static RegularData from(const FunctionalDataset& data);
  FunctionalDataset to_functional() const;
  RegularData without_run(Index i) const;
};

// A dataset embedded in its union grid. Unobserved cells of `y` hold NaN.
struct MaskedGridData {
  Design design;
  VectorXd grid;
  MatrixXd y;
  MaskMatrix observed;

  static MaskedGridData from(const FunctionalDataset& data);
  static MaskedGridData from(const FunctionalDataset& data, const VectorXd& grid);

  Index runs() const { return y.rows(); }
  Index points() const { return y.cols(); }
  Index missing_count() const;
  std::vector<Index> observed_index(Index run) const;
  std::vector<Index> missing_index(Index run) const;
};

// Points shared by every run (the "common grid").
VectorXd common_grid(const FunctionalDataset& data);

// Restricts every run to abscissae in `grid`; the result is regular when every
// run contains all of `grid`.
FunctionalDataset restrict_to_grid(const FunctionalDataset& data, const VectorXd& grid);

}  // namespace fkrig
