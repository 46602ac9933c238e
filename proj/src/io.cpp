#include "fkrig/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fkrig/config.hpp"
#include "fkrig/errors.hpp"

namespace fkrig {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

double cell_number(const CsvTable& t, size_t r, size_t c, const std::filesystem::path& path) {
  try {
    return parse_double(t.rows[r][c]);
  } catch (const InputError&) {
    throw DataError(path.string() + " line " + std::to_string(t.lines[r]) + ", column " +
                    t.header[c] + ": '" + t.rows[r][c] + "' is not a number");
  }
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  int no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++no;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw DataError(path.string() + " line " + std::to_string(no) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(no);
  }
  if (!have_header) throw DataError(path.string() + ": missing header row");
  return t;
}

Design read_design_csv(const std::filesystem::path& path, const std::map<std::string, VarKind>& kinds) {
  const CsvTable t = read_csv(path);
  const Index p = static_cast<Index>(t.header.size());
  std::set<std::string> seen;
  for (const auto& h : t.header) {
    if (h.empty() || !seen.insert(h).second) {
      throw DataError(path.string() + ": empty or duplicate column name '" + h + "'");
    }
  }
  for (const auto& [name, kind] : kinds) {
    if (!seen.count(name)) throw DataError("variable " + name + " is not a column of " + path.string());
  }
  MatrixXd rows(static_cast<Index>(t.rows.size()), p);
  for (size_t r = 0; r < t.rows.size(); ++r) {
    for (Index k = 0; k < p; ++k) rows(static_cast<Index>(r), k) = cell_number(t, r, k, path);
  }
  std::vector<VarKind> kv = infer_continuous_kinds(rows);
  for (Index k = 0; k < p; ++k) {
    const auto it = kinds.find(t.header[static_cast<size_t>(k)]);
    if (it != kinds.end()) kv[static_cast<size_t>(k)] = it->second;
  }
  Design d(t.header, kv, rows);
  d.validate();
  return d;
}

void write_design_csv(const std::filesystem::path& path, const Design& design) {
  auto out = open_out(path);
  for (size_t k = 0; k < design.names.size(); ++k) out << (k ? "," : "") << design.names[k];
  out << "\n";
  for (Index i = 0; i < design.size(); ++i) {
    for (Index k = 0; k < design.dim(); ++k) out << (k ? "," : "") << g17(design.rows(i, k));
    out << "\n";
  }
}

FunctionalDataset read_profiles_csv(const std::filesystem::path& path, const Design& design) {
  const CsvTable t = read_csv(path);
  std::map<std::string, size_t> col;
  for (size_t c = 0; c < t.header.size(); ++c) col[t.header[c]] = c;
  for (const auto& h : t.header) {
    if (h != "run_id" && h != "t" && h != "y") {
      throw DataError(path.string() + ": unknown column '" + h + "' (expected run_id,t,y)");
    }
  }
  if (col.size() != 3 || t.header.size() != 3) {
    throw DataError(path.string() + ": expected columns run_id,t,y");
  }
  const Index n = design.size();
  std::vector<std::vector<double>> ts(static_cast<size_t>(n)), ys(static_cast<size_t>(n));
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const double id = cell_number(t, r, col["run_id"], path);
    const double tv = cell_number(t, r, col["t"], path);
    const double yv = cell_number(t, r, col["y"], path);
    const std::string where = path.string() + " line " + std::to_string(t.lines[r]);
    if (id != std::floor(id) || id < 1 || id > static_cast<double>(n)) {
      throw DataError(where + ": run_id " + t.rows[r][col["run_id"]] + " is outside 1.." +
                      std::to_string(n));
    }
    auto& ti = ts[static_cast<size_t>(id) - 1];
    if (!ti.empty() && !(tv > ti.back())) {
      throw DataError(where + ": run " + std::to_string(static_cast<long>(id)) + " point " +
                      std::to_string(ti.size() + 1) + " has t = " + t.rows[r][col["t"]] +
                      (tv == ti.back() ? " (duplicate)" : " (not increasing)"));
    }
    ti.push_back(tv);
    ys[static_cast<size_t>(id) - 1].push_back(yv);
  }
  FunctionalDataset d;
  d.design = design;
  for (Index i = 0; i < n; ++i) {
    const auto& ti = ts[static_cast<size_t>(i)];
    if (ti.empty()) throw DataError(path.string() + ": run " + std::to_string(i + 1) + " has no rows");
    d.t.push_back(Eigen::Map<const VectorXd>(ti.data(), static_cast<Index>(ti.size())));
    d.y.push_back(Eigen::Map<const VectorXd>(ys[static_cast<size_t>(i)].data(), static_cast<Index>(ti.size())));
  }
  d.validate();
  return d;
}

void write_profiles_csv(const std::filesystem::path& path, const FunctionalDataset& data) {
  auto out = open_out(path);
  out << "run_id,t,y\n";
  for (Index i = 0; i < data.runs(); ++i) {
    const auto& ti = data.t[static_cast<size_t>(i)];
    for (Index k = 0; k < ti.size(); ++k) {
      out << i + 1 << "," << g17(ti(k)) << "," << g17(data.y[static_cast<size_t>(i)](k)) << "\n";
    }
  }
}

MatrixXd read_query_csv(const std::filesystem::path& path, const Design& design) {
  const CsvTable t = read_csv(path);
  std::vector<std::string> expect = design.names;
  expect.push_back("t");
  for (const auto& h : t.header) {
    if (std::find(expect.begin(), expect.end(), h) == expect.end()) {
      throw DataError(path.string() + ": unknown column '" + h + "'");
    }
  }
  if (t.header.size() != expect.size()) {
    throw DataError(path.string() + ": expected columns for every variable and t");
  }
  MatrixXd q(static_cast<Index>(t.rows.size()), static_cast<Index>(expect.size()));
  for (size_t c = 0; c < t.header.size(); ++c) {
    const auto dest = std::find(expect.begin(), expect.end(), t.header[c]) - expect.begin();
    for (size_t r = 0; r < t.rows.size(); ++r) q(static_cast<Index>(r), dest) = cell_number(t, r, c, path);
  }
  return q;
}

void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const MatrixXd& rows) {
  auto out = open_out(path);
  for (size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << "\n";
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index k = 0; k < rows.cols(); ++k) out << (k ? "," : "") << g17(rows(i, k));
    out << "\n";
  }
}

std::string model_to_text(const KrigingModel& model, const MaskMatrix& observed) {
  const Design& d = model.design();
  const BasisSpec& b = model.basis();
  const CorrParams& xi = model.params();
  const Index n = d.size(), m = model.grid().size();
  std::ostringstream o;
  auto vec = [&](const VectorXd& v) {
    for (Index k = 0; k < v.size(); ++k) o << " " << g17(v(k));
  };
  o << "fkrig-model " << kModelFileVersion << "\n";
  o << "variables " << d.dim() << "\n";
  for (Index k = 0; k < d.dim(); ++k) {
    const VarKind& v = d.kinds[static_cast<size_t>(k)];
    o << "var " << d.names[static_cast<size_t>(k)] << " "
      << (v.is_categorical() ? "categorical " + std::to_string(v.levels)
                             : "continuous " + g17(v.lo) + " " + g17(v.hi))
      << "\n";
  }
  o << "t_powers " << b.t_powers.size();
  for (int pw : b.t_powers) o << " " << pw;
  o << "\nx_terms " << b.x_terms.size();
  for (const auto& t : b.x_terms) o << " " << t.var + 1 << ":" << t.power;
  o << "\nt_center " << g17(b.t_center) << "\nt_scale " << g17(b.t_scale);
  o << "\nalphas";
  vec(xi.alphas);
  o << "\nbeta " << g17(xi.beta) << "\nd " << xi.d << "\nnugget " << g17(xi.nugget);
  o << "\nmu " << model.mu().size();
  vec(model.mu());
  o << "\nsigma2 " << g17(model.sigma2()) << "\ndecay " << g17(model.decay_rate());
  o << "\nruns " << n << "\npoints " << m << "\ngrid";
  vec(model.grid());
  o << "\ndesign\n";
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d.dim(); ++k) o << (k ? " " : "") << g17(d.rows(i, k));
    o << "\n";
  }
  o << "data\n";
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) o << (j ? " " : "") << g17(model.data().y(i, j));
    o << "\n";
  }
  o << "observed\n";
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) o << (observed.size() == 0 || observed(i, j) ? '1' : '0');
    o << "\n";
  }
  o << "end\n";
  return o.str();
}

namespace {

class Reader {
 public:
  explicit Reader(const std::string& text) : in_(text) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw DataError("model file: unexpected end");
    return w;
  }
  void expect(const std::string& key) {
    const std::string w = word();
    if (w != key) throw DataError("model file: expected '" + key + "', found '" + w + "'");
  }
  double number() {
    const std::string w = word();
    try {
      return parse_double(w);
    } catch (const InputError&) {
      throw DataError("model file: '" + w + "' is not a number");
    }
  }
  long integer() {
    const double v = number();
    if (v != std::floor(v)) throw DataError("model file: expected an integer");
    return static_cast<long>(v);
  }
  VectorXd vec(Index n) {
    VectorXd v(n);
    for (Index k = 0; k < n; ++k) v(k) = number();
    return v;
  }

 private:
  std::istringstream in_;
};

}  // namespace

ModelFile model_from_text(const std::string& text) {
  Reader r(text);
  r.expect("fkrig-model");
  const long version = r.integer();
  if (version != kModelFileVersion) {
    throw DataError("model file version " + std::to_string(version) + " is not supported");
  }
  r.expect("variables");
  const Index p = r.integer();
  std::vector<std::string> names;
  std::vector<VarKind> kinds;
  for (Index k = 0; k < p; ++k) {
    r.expect("var");
    names.push_back(r.word());
    const std::string type = r.word();
    if (type == "categorical") {
      kinds.push_back(VarKind::categorical(static_cast<int>(r.integer())));
    } else if (type == "continuous") {
      const double lo = r.number();
      kinds.push_back(VarKind::continuous(lo, r.number()));
    } else {
      throw DataError("model file: unknown variable type '" + type + "'");
    }
  }
  BasisSpec b;
  r.expect("t_powers");
  for (long k = 0, c = r.integer(); k < c; ++k) b.t_powers.push_back(static_cast<int>(r.integer()));
  r.expect("x_terms");
  for (long k = 0, c = r.integer(); k < c; ++k) {
    const std::string w = r.word();
    const auto colon = w.find(':');
    if (colon == std::string::npos) throw DataError("model file: bad x term '" + w + "'");
    b.x_terms.push_back({parse_long(w.substr(0, colon)) - 1, static_cast<int>(parse_long(w.substr(colon + 1)))});
  }
  r.expect("t_center");
  b.t_center = r.number();
  r.expect("t_scale");
  b.t_scale = r.number();
  CorrParams xi;
  r.expect("alphas");
  xi.alphas = r.vec(p);
  r.expect("beta");
  xi.beta = r.number();
  r.expect("d");
  xi.d = static_cast<int>(r.integer());
  r.expect("nugget");
  xi.nugget = r.number();
  r.expect("mu");
  const VectorXd mu = r.vec(r.integer());
  r.expect("sigma2");
  const double sigma2 = r.number();
  r.expect("decay");
  const double decay = r.number();
  r.expect("runs");
  const Index n = r.integer();
  r.expect("points");
  const Index m = r.integer();
  RegularData data;
  r.expect("grid");
  data.grid = r.vec(m);
  r.expect("design");
  MatrixXd rows(n, p);
  for (Index i = 0; i < n; ++i) rows.row(i) = r.vec(p).transpose();
  data.design = Design(names, kinds, rows);
  r.expect("data");
  data.y.resize(n, m);
  for (Index i = 0; i < n; ++i) data.y.row(i) = r.vec(m).transpose();
  r.expect("observed");
  ModelFile out;
  out.observed.resize(n, m);
  for (Index i = 0; i < n; ++i) {
    const std::string w = r.word();
    if (static_cast<Index>(w.size()) != m) throw DataError("model file: bad observed mask row");
    for (Index j = 0; j < m; ++j) out.observed(i, j) = w[static_cast<size_t>(j)] == '1';
  }
  r.expect("end");
  out.model = KrigingModel::build(std::move(data), b, xi, mu, sigma2);
  out.model.set_decay_rate(decay);
  return out;
}

void save_model(const std::filesystem::path& path, const KrigingModel& model, const MaskMatrix& observed) {
  auto out = open_out(path);
  out << model_to_text(model, observed);
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_text(ss.str());
}

}  // namespace fkrig
