#include "fkrig/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "fkrig/errors.hpp"

namespace fkrig {

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::stringstream ss(s);
  std::vector<std::string> out;
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += f(v[i]);
  }
  return out;
}

int to_int(const std::string& s) { return static_cast<int>(parse_long(s)); }

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::string kind_text(const VarKind& k) {
  return k.is_categorical() ? "categorical " + std::to_string(k.levels)
                            : "continuous " + format_double(k.lo) + " " + format_double(k.hi);
}

VarKind parse_kind(const std::string& s) {
  const auto w = words(s);
  if (w.size() == 2 && w[0] == "categorical") {
    return VarKind::categorical(to_int(w[1]));
  }
  if (w.size() == 3 && w[0] == "continuous") {
    return VarKind::continuous(parse_double(w[1]), parse_double(w[2]));
  }
  throw ConfigError("expected 'continuous lo hi' or 'categorical levels', got '" + s + "'");
}

struct Field {
  std::function<void(ProjectConfig&, const std::string&)> set;
  std::function<std::string(const ProjectConfig&)> get;
};

template <typename T>
Field scalar(T ProjectConfig::*m) {
  Field f;
  f.set = [m](ProjectConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      c.*m = v;
    } else if constexpr (std::is_same_v<T, bool>) {
      c.*m = to_bool(v);
    } else if constexpr (std::is_same_v<T, double>) {
      c.*m = parse_double(v);
    } else {
      const long x = parse_long(v);
      if (x < 0 && std::is_unsigned_v<T>) throw ConfigError("expected a nonnegative integer");
      c.*m = static_cast<T>(x);
    }
  };
  f.get = [m](const ProjectConfig& c) -> std::string {
    if constexpr (std::is_same_v<T, std::string>) {
      return c.*m;
    } else if constexpr (std::is_same_v<T, bool>) {
      return c.*m ? "true" : "false";
    } else if constexpr (std::is_same_v<T, double>) {
      return format_double(c.*m);
    } else {
      return std::to_string(c.*m);
    }
  };
  return f;
}

template <typename T>
Field list(std::vector<T> ProjectConfig::*m) {
  Field f;
  f.set = [m](ProjectConfig& c, const std::string& v) {
    std::vector<T> out;
    for (const auto& s : split(v, ',')) {
      if constexpr (std::is_same_v<T, std::string>) {
        out.push_back(s);
      } else if constexpr (std::is_same_v<T, double>) {
        out.push_back(parse_double(s));
      } else {
        out.push_back(static_cast<T>(parse_long(s)));
      }
    }
    c.*m = out;
  };
  f.get = [m](const ProjectConfig& c) {
    return join<T>(c.*m, [](const T& x) {
      if constexpr (std::is_same_v<T, std::string>) {
        return x;
      } else if constexpr (std::is_same_v<T, double>) {
        return format_double(x);
      } else {
        return std::to_string(x);
      }
    });
  };
  return f;
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = {
      {"design", scalar(&ProjectConfig::design)},
      {"profiles", scalar(&ProjectConfig::profiles)},
      {"out_dir", scalar(&ProjectConfig::out_dir)},
      {"seed", scalar(&ProjectConfig::seed)},
      {"d", scalar(&ProjectConfig::d)},
      {"nugget", scalar(&ProjectConfig::nugget)},
      {"transform", scalar(&ProjectConfig::transform)},
      {"t_candidates", list(&ProjectConfig::t_candidates)},
      {"x_candidates", scalar(&ProjectConfig::x_candidates)},
      {"fit.restarts", scalar(&ProjectConfig::fit_restarts)},
      {"em.q", scalar(&ProjectConfig::em_q)},
      {"em.delta", scalar(&ProjectConfig::em_delta)},
      {"em.max_iter", scalar(&ProjectConfig::em_max_iter)},
      {"em.mode", scalar(&ProjectConfig::em_mode)},
      {"kappa", scalar(&ProjectConfig::kappa)},
      {"probes", list(&ProjectConfig::probes)},
      {"opt.restarts", scalar(&ProjectConfig::opt_restarts)},
      {"opt.max_evals", scalar(&ProjectConfig::opt_max_evals)},
      {"opt.refine", scalar(&ProjectConfig::opt_refine)},
      {"opt.max_vars", list(&ProjectConfig::opt_max_vars)},
      {"sens.vars", list(&ProjectConfig::sens_vars)},
      {"sens.levels", scalar(&ProjectConfig::sens_levels)},
      {"sens.nodes", scalar(&ProjectConfig::sens_nodes)},
      {"gen.design", scalar(&ProjectConfig::gen_design)},
      {"gen.n", scalar(&ProjectConfig::gen_n)},
      {"gen.m", scalar(&ProjectConfig::gen_m)},
      {"gen.p", scalar(&ProjectConfig::gen_p)},
      {"gen.t_max", scalar(&ProjectConfig::gen_t_max)},
      {"gen.mu", list(&ProjectConfig::gen_mu)},
      {"gen.alpha", list(&ProjectConfig::gen_alpha)},
      {"gen.beta", scalar(&ProjectConfig::gen_beta)},
      {"gen.sigma2", scalar(&ProjectConfig::gen_sigma2)},
      {"gen.d", scalar(&ProjectConfig::gen_d)},
      {"gen.keep_lo", scalar(&ProjectConfig::gen_keep_lo)},
      {"gen.keep_hi", scalar(&ProjectConfig::gen_keep_hi)},
      {"bench.n", scalar(&ProjectConfig::bench_n)},
      {"bench.m", list(&ProjectConfig::bench_m)},
      {"bench.reps", scalar(&ProjectConfig::bench_reps)},
      {"bench.dense_cap", scalar(&ProjectConfig::bench_dense_cap)},
  };
  return f;
}

const Field* find_field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return &f;
  }
  return nullptr;
}

}  // namespace

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    throw InputError("expected a number, got '" + s + "'");
  }
  return v;
}

long parse_long(const std::string& s) {
  const std::string t = trim(s);
  long v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    throw InputError("expected an integer, got '" + s + "'");
  }
  return v;
}

void ProjectConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  try {
    if (key.rfind("var.", 0) == 0 && key.size() > 4) {
      kinds[key.substr(4)] = parse_kind(v);
      return;
    }
    if (key.rfind("bound.", 0) == 0 && key.size() > 6) {
      const auto w = words(v);
      if (w.size() != 2) throw ConfigError("expected 'lo hi'");
      bounds[key.substr(6)] = {parse_double(w[0]), parse_double(w[1])};
      return;
    }
    const Field* f = find_field(key);
    if (!f) throw ConfigError("unknown key");
    f->set(*this, v);
  } catch (const InputError& e) {
    throw ConfigError(key + ": " + e.what());
  }
  if (em_mode != "expectation" && em_mode != "sampling") {
    throw ConfigError("em.mode: expected expectation or sampling, got '" + em_mode + "'");
  }
}

std::string ProjectConfig::get(const std::string& key) const {
  if (key.rfind("var.", 0) == 0) {
    const auto it = kinds.find(key.substr(4));
    if (it == kinds.end()) throw ConfigError(key + ": not set");
    return kind_text(it->second);
  }
  if (key.rfind("bound.", 0) == 0) {
    const auto it = bounds.find(key.substr(6));
    if (it == bounds.end()) throw ConfigError(key + ": not set");
    return format_double(it->second.first) + " " + format_double(it->second.second);
  }
  const Field* f = find_field(key);
  if (!f) throw ConfigError(key + ": unknown key");
  return f->get(*this);
}

std::vector<std::string> ProjectConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

ProjectConfig ProjectConfig::parse(const std::string& text, const std::filesystem::path& base) {
  ProjectConfig c;
  c.base_dir = base;
  std::stringstream ss(text);
  std::string line;
  int no = 0;
  while (std::getline(ss, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(no) + ": expected key = value");
    }
    try {
      c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(no) + ": " + e.what());
    }
  }
  return c;
}

ProjectConfig ProjectConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

std::string ProjectConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  for (const auto& [name, kind] : kinds) out += "var." + name + " = " + kind_text(kind) + "\n";
  for (const auto& [name, b] : bounds) {
    out += "bound." + name + " = " + format_double(b.first) + " " + format_double(b.second) + "\n";
  }
  return out;
}

std::filesystem::path ProjectConfig::resolve(const std::string& p) const {
  const std::filesystem::path q(p);
  return q.is_absolute() ? q : base_dir / q;
}

}  // namespace fkrig
