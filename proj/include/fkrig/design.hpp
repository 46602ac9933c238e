#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace fkrig {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Kind of one input variable. Continuous variables carry a declared range used
// to rescale coordinates to [0, 1]; categorical variables carry a level count
// and use 1-based integer level codes.
struct VarKind {
  enum class Type { continuous, categorical };

  Type type = Type::continuous;
  double lo = 0.0;
  double hi = 1.0;
  int levels = 0;

  static VarKind continuous(double lo, double hi);
  static VarKind categorical(int levels);

  bool is_categorical() const { return type == Type::categorical; }

  // Maps a raw coordinate to the scale used by correlation and basis functions:
  // (v - lo) / (hi - lo) for continuous, the level code itself for categorical.
  double scale(double value) const;

  bool operator==(const VarKind&) const = default;
};

// n x p experimental design. Each row is one run setting in raw units.
struct Design {
  std::vector<std::string> names;
  std::vector<VarKind> kinds;
  MatrixXd rows;

  Design() = default;
  Design(std::vector<std::string> names, std::vector<VarKind> kinds, MatrixXd rows);

  Index size() const { return rows.rows(); }
  Index dim() const { return static_cast<Index>(kinds.size()); }

  // Throws DataError naming the offending run and variable.
  void validate() const;

  // True when every continuous coordinate of x is inside its declared range.
  bool contains(const VectorXd& x) const;

  Index index_of(const std::string& name) const;  // -1 when absent

  Design without_row(Index i) const;
  Design select_rows(const std::vector<Index>& idx) const;

  // A design with zero variables and `n` rows; used for the t-only marginal model.
  static Design empty(Index n);
};

// Default variable names x1..xp.
std::vector<std::string> default_names(Index p);

// Continuous kinds whose ranges are the column minima and maxima of `rows`
// (degenerate columns get a unit-width range).
std::vector<VarKind> infer_continuous_kinds(const MatrixXd& rows);

}  // namespace fkrig
