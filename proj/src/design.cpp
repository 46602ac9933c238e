#include "fkrig/design.hpp"

#include <cmath>
#include <sstream>

#include "fkrig/errors.hpp"

namespace fkrig {

VarKind VarKind::continuous(double lo, double hi) {
  if (!(hi > lo)) {
    throw InputError("continuous variable range must satisfy lo < hi");
  }
  VarKind k;
  k.type = Type::continuous;
  k.lo = lo;
  k.hi = hi;
  return k;
}

VarKind VarKind::categorical(int levels) {
  if (levels < 1) {
    throw InputError("categorical variable needs at least one level");
  }
  VarKind k;
  k.type = Type::categorical;
  k.levels = levels;
  return k;
}

double VarKind::scale(double value) const {
  if (is_categorical()) {
    return value;
  }
  return (value - lo) / (hi - lo);
}

Design::Design(std::vector<std::string> names_in, std::vector<VarKind> kinds_in, MatrixXd rows_in)
    : names(std::move(names_in)), kinds(std::move(kinds_in)), rows(std::move(rows_in)) {
  if (names.empty() && !kinds.empty()) {
    names = default_names(static_cast<Index>(kinds.size()));
  }
}

void Design::validate() const {
  if (names.size() != kinds.size()) {
    throw DataError("design: variable names and kinds differ in length");
  }
  if (rows.cols() != dim()) {
    std::ostringstream os;
    os << "design: expected " << dim() << " columns, found " << rows.cols();
    throw DataError(os.str());
  }
  constexpr double slack = 1e-12;
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index k = 0; k < dim(); ++k) {
      const double v = rows(i, k);
      const auto& kind = kinds[static_cast<size_t>(k)];
      std::ostringstream os;
      os << "design: run " << i + 1 << ", variable '" << names[static_cast<size_t>(k)] << "' ";
      if (!std::isfinite(v)) {
        os << "is not finite";
        throw DataError(os.str());
      }
      if (kind.is_categorical()) {
        if (v != std::round(v) || v < 1 || v > kind.levels) {
          os << "has level code " << v << " outside 1.." << kind.levels;
          throw DataError(os.str());
        }
      } else {
        const double w = slack * (kind.hi - kind.lo);
        if (v < kind.lo - w || v > kind.hi + w) {
          os << "value " << v << " outside [" << kind.lo << ", " << kind.hi << "]";
          throw DataError(os.str());
        }
      }
    }
  }
}

bool Design::contains(const VectorXd& x) const {
  for (Index k = 0; k < dim(); ++k) {
    const auto& kind = kinds[static_cast<size_t>(k)];
    if (kind.is_categorical()) {
      continue;
    }
    if (x(k) < kind.lo || x(k) > kind.hi) {
      return false;
    }
  }
  return true;
}

Index Design::index_of(const std::string& name) const {
  for (size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) {
      return static_cast<Index>(k);
    }
  }
  return -1;
}

Design Design::without_row(Index i) const {
  std::vector<Index> idx;
  for (Index r = 0; r < size(); ++r) {
    if (r != i) {
      idx.push_back(r);
    }
  }
  return select_rows(idx);
}

Design Design::select_rows(const std::vector<Index>& idx) const {
  Design out;
  out.names = names;
  out.kinds = kinds;
  out.rows.resize(static_cast<Index>(idx.size()), dim());
  for (size_t r = 0; r < idx.size(); ++r) {
    out.rows.row(static_cast<Index>(r)) = rows.row(idx[r]);
  }
  return out;
}

Design Design::empty(Index n) {
  Design d;
  d.rows.resize(n, 0);
  return d;
}

std::vector<std::string> default_names(Index p) {
  std::vector<std::string> out;
  for (Index k = 0; k < p; ++k) {
    out.push_back("x" + std::to_string(k + 1));
  }
  return out;
}

std::vector<VarKind> infer_continuous_kinds(const MatrixXd& rows) {
  std::vector<VarKind> out;
  for (Index k = 0; k < rows.cols(); ++k) {
    double lo = rows.rows() ? rows.col(k).minCoeff() : 0.0;
    double hi = rows.rows() ? rows.col(k).maxCoeff() : 1.0;
    if (!(hi > lo)) {
      hi = lo + 1.0;
    }
    out.push_back(VarKind::continuous(lo, hi));
  }
  return out;
}

}  // namespace fkrig
