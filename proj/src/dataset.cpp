#include "fkrig/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fkrig/errors.hpp"

namespace fkrig {

Index FunctionalDataset::total_points() const {
  Index total = 0;
  for (const auto& ti : t) {
    total += ti.size();
  }
  return total;
}

void FunctionalDataset::validate() const {
  design.validate();
  if (t.size() != y.size()) {
    throw DataError("dataset: abscissa and response lists differ in length");
  }
  if (runs() != design.size()) {
    std::ostringstream os;
    os << "dataset: " << runs() << " profiles but " << design.size() << " design rows";
    throw DataError(os.str());
  }
  for (Index i = 0; i < runs(); ++i) {
    const auto& ti = t[static_cast<size_t>(i)];
    const auto& yi = y[static_cast<size_t>(i)];
    if (ti.size() != yi.size()) {
      std::ostringstream os;
      os << "dataset: run " << i + 1 << " has " << ti.size() << " abscissae but " << yi.size()
         << " responses";
      throw DataError(os.str());
    }
    for (Index j = 0; j < ti.size(); ++j) {
      if (!std::isfinite(ti(j)) || !std::isfinite(yi(j))) {
        std::ostringstream os;
        os << "dataset: run " << i + 1 << ", point " << j + 1 << " is not finite";
        throw DataError(os.str());
      }
      if (j > 0 && !(ti(j) > ti(j - 1))) {
        std::ostringstream os;
        os << "dataset: run " << i + 1 << ", point " << j + 1 << " (t=" << ti(j)
           << ") does not increase over the previous abscissa";
        throw DataError(os.str());
      }
    }
  }
}

bool FunctionalDataset::is_regular() const {
  if (t.empty()) {
    return true;
  }
  const auto& t0 = t.front();
  for (const auto& ti : t) {
    if (ti.size() != t0.size() || !(ti.array() == t0.array()).all()) {
      return false;
    }
  }
  return true;
}

VectorXd FunctionalDataset::union_grid() const {
  std::vector<double> all;
  for (const auto& ti : t) {
    all.insert(all.end(), ti.data(), ti.data() + ti.size());
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return Eigen::Map<VectorXd>(all.data(), static_cast<Index>(all.size()));
}

FunctionalDataset FunctionalDataset::without_run(Index i) const {
  std::vector<Index> idx;
  for (Index r = 0; r < runs(); ++r) {
    if (r != i) {
      idx.push_back(r);
    }
  }
  return select_runs(idx);
}

FunctionalDataset FunctionalDataset::select_runs(const std::vector<Index>& idx) const {
  FunctionalDataset out;
  out.design = design.select_rows(idx);
  for (Index r : idx) {
    out.t.push_back(t[static_cast<size_t>(r)]);
    out.y.push_back(y[static_cast<size_t>(r)]);
  }
  return out;
}

RegularData RegularData::from(const FunctionalDataset& data) {
  if (!data.is_regular()) {
    throw DataError("dataset is not on a regular grid");
  }
  RegularData out;
  out.design = data.design;
  out.grid = data.t.empty() ? VectorXd() : data.t.front();
  out.y.resize(data.runs(), out.grid.size());
  for (Index i = 0; i < data.runs(); ++i) {
    out.y.row(i) = data.y[static_cast<size_t>(i)].transpose();
  }
  return out;
}

FunctionalDataset RegularData::to_functional() const {
  FunctionalDataset out;
  out.design = design;
  for (Index i = 0; i < runs(); ++i) {
    out.t.push_back(grid);
    out.y.push_back(y.row(i).transpose());
  }
  return out;
}

RegularData RegularData::without_run(Index i) const {
  RegularData out;
  out.design = design.without_row(i);
  out.grid = grid;
  out.y.resize(runs() - 1, points());
  for (Index r = 0, k = 0; r < runs(); ++r) {
    if (r != i) {
      out.y.row(k++) = y.row(r);
    }
  }
  return out;
}

MaskedGridData MaskedGridData::from(const FunctionalDataset& data) {
  return from(data, data.union_grid());
}

MaskedGridData MaskedGridData::from(const FunctionalDataset& data, const VectorXd& grid) {
  MaskedGridData out;
  out.design = data.design;
  out.grid = grid;
  const Index n = data.runs();
  const Index m = grid.size();
  out.y = MatrixXd::Constant(n, m, std::numeric_limits<double>::quiet_NaN());
  out.observed = MaskMatrix::Constant(n, m, false);
  for (Index i = 0; i < n; ++i) {
    const auto& ti = data.t[static_cast<size_t>(i)];
    const auto& yi = data.y[static_cast<size_t>(i)];
    Index j = 0;
    for (Index l = 0; l < ti.size(); ++l) {
      while (j < m && grid(j) < ti(l)) {
        ++j;
      }
      if (j == m || grid(j) != ti(l)) {
        std::ostringstream os;
        os << "run " << i + 1 << ", point " << l + 1 << " (t=" << ti(l) << ") is not on the grid";
        throw DataError(os.str());
      }
      out.y(i, j) = yi(l);
      out.observed(i, j) = true;
    }
  }
  return out;
}

Index MaskedGridData::missing_count() const {
  return observed.size() - observed.count();
}

std::vector<Index> MaskedGridData::observed_index(Index run) const {
  std::vector<Index> idx;
  for (Index j = 0; j < points(); ++j) {
    if (observed(run, j)) {
      idx.push_back(j);
    }
  }
  return idx;
}

std::vector<Index> MaskedGridData::missing_index(Index run) const {
  std::vector<Index> idx;
  for (Index j = 0; j < points(); ++j) {
    if (!observed(run, j)) {
      idx.push_back(j);
    }
  }
  return idx;
}

VectorXd common_grid(const FunctionalDataset& data) {
  const VectorXd grid = data.union_grid();
  const auto masked = MaskedGridData::from(data, grid);
  std::vector<double> shared;
  for (Index j = 0; j < grid.size(); ++j) {
    if (masked.observed.col(j).all()) {
      shared.push_back(grid(j));
    }
  }
  return Eigen::Map<VectorXd>(shared.data(), static_cast<Index>(shared.size()));
}

FunctionalDataset restrict_to_grid(const FunctionalDataset& data, const VectorXd& grid) {
  FunctionalDataset out;
  out.design = data.design;
  for (Index i = 0; i < data.runs(); ++i) {
    const auto& ti = data.t[static_cast<size_t>(i)];
    const auto& yi = data.y[static_cast<size_t>(i)];
    std::vector<double> tt, yy;
    for (Index l = 0; l < ti.size(); ++l) {
      if (std::binary_search(grid.data(), grid.data() + grid.size(), ti(l))) {
        tt.push_back(ti(l));
        yy.push_back(yi(l));
      }
    }
    out.t.push_back(Eigen::Map<VectorXd>(tt.data(), static_cast<Index>(tt.size())));
    out.y.push_back(Eigen::Map<VectorXd>(yy.data(), static_cast<Index>(yy.size())));
  }
  return out;
}

}  // namespace fkrig
