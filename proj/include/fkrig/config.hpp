#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fkrig/design.hpp"

namespace fkrig {

// Flat key = value settings shared by every command. Relative paths resolve
// against base_dir (the config file's directory).
struct ProjectConfig {
  std::string design;
  std::string profiles;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  std::map<std::string, VarKind> kinds;  // var.<name>; unset columns are continuous over their data range

  int d = 2;
  double nugget = 1e-8;
  bool transform = false;
  std::vector<int> t_candidates{1, 2};
  std::string x_candidates = "linear";  // linear, none, or name:power,...
  int fit_restarts = 5;

  int em_q = 10;
  double em_delta = 0.05;
  int em_max_iter = 100;
  std::string em_mode = "expectation";  // or sampling

  double kappa = 0.05;
  std::vector<int> probes;  // 1-based run ids

  int opt_restarts = 20;
  int opt_max_evals = 2000;
  int opt_refine = 1;
  std::vector<std::string> opt_max_vars;
  std::map<std::string, std::pair<double, double>> bounds;  // bound.<name>; default is the variable range

  std::vector<std::string> sens_vars;  // empty means all
  int sens_levels = 11;
  int sens_nodes = 256;

  std::string gen_design = "lhs";  // lhs or a design CSV path
  int gen_n = 30;
  int gen_m = 40;
  int gen_p = 2;
  double gen_t_max = 1.0;
  std::vector<double> gen_mu{0.0};  // intercept, then t, t^2 on the scaled grid
  std::vector<double> gen_alpha{2.0};  // recycled over variables
  double gen_beta = 5.0;
  double gen_sigma2 = 1.0;
  int gen_d = 2;
  double gen_keep_lo = 1.0;
  double gen_keep_hi = 1.0;

  int bench_n = 30;
  std::vector<int> bench_m{32, 64};
  int bench_reps = 3;
  int bench_dense_cap = 4096;

  std::filesystem::path base_dir = ".";

  // Throws ConfigError for unknown keys and malformed values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  // Lines are `key = value`; `#` starts a comment. Errors carry the line number.
  static ProjectConfig parse(const std::string& text, const std::filesystem::path& base = ".");
  static ProjectConfig load(const std::filesystem::path& path);
  std::string to_text() const;

  std::filesystem::path resolve(const std::string& p) const;

  bool operator==(const ProjectConfig&) const = default;
};

// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);
long parse_long(const std::string& s);

}  // namespace fkrig
