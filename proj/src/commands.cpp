#include "fkrig/commands.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "fkrig/errors.hpp"
#include "fkrig/oracle.hpp"

namespace fkrig {

namespace {

// Symmetric square root through the eigen-decomposition; tiny negative
// eigenvalues from round-off are dropped.
MatrixXd sym_sqrt(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  const VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Design lhs_design(Index n, Index p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd rows(n, p);
  for (Index k = 0; k < p; ++k) {
    std::vector<Index> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Index i = 0; i < n; ++i) rows(i, k) = (static_cast<double>(perm[static_cast<size_t>(i)]) + u(rng)) / n;
  }
  return Design(default_names(p), std::vector<VarKind>(static_cast<size_t>(p), VarKind::continuous(0, 1)), rows);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string num(double v) {
  std::ostringstream o;
  o << std::setprecision(8) << v;
  return o.str();
}

Index variable_index(const Design& design, const std::string& name) {
  const Index k = design.index_of(name);
  if (k < 0) throw ConfigError("unknown variable '" + name + "'");
  return k;
}

}  // namespace

std::filesystem::path out_path(const ProjectConfig& cfg, const std::string& name) {
  return cfg.resolve(cfg.out_dir) / name;
}

GeneratedData generate_data(const ProjectConfig& cfg) {
  if (cfg.gen_m < 1 || !(cfg.gen_keep_lo > 0.0) || cfg.gen_keep_lo > cfg.gen_keep_hi || cfg.gen_keep_hi > 1.0) {
    throw ConfigError("gen.m must be positive and 0 < gen.keep_lo <= gen.keep_hi <= 1");
  }
  if (cfg.gen_mu.empty() || cfg.gen_mu.size() > 3) {
    throw ConfigError("gen.mu takes 1 to 3 coefficients (intercept, t, t^2)");
  }
  if (cfg.gen_alpha.empty() || !(cfg.gen_sigma2 > 0.0) || !(cfg.gen_t_max > 0.0)) {
    throw ConfigError("gen.alpha must be nonempty and gen.sigma2, gen.t_max positive");
  }
  std::mt19937_64 rng(cfg.seed);
  GeneratedData g;
  Design design;
  if (cfg.gen_design == "lhs") {
    if (cfg.gen_n < 1 || cfg.gen_p < 0) throw ConfigError("gen.n must be positive");
    design = lhs_design(cfg.gen_n, cfg.gen_p, rng);
  } else {
    design = read_design_csv(cfg.resolve(cfg.gen_design), cfg.kinds);
  }
  const Index n = design.size(), m = cfg.gen_m;
  g.xi.alphas.resize(design.dim());
  for (Index k = 0; k < design.dim(); ++k) {
    g.xi.alphas(k) = cfg.gen_alpha[static_cast<size_t>(k) % cfg.gen_alpha.size()];
  }
  g.xi.beta = cfg.gen_beta;
  g.xi.d = cfg.gen_d;
  g.xi.nugget = 0.0;
  g.xi.validate();

  const VectorXd grid = m == 1 ? VectorXd(VectorXd::Zero(1)) : VectorXd(VectorXd::LinSpaced(m, 0.0, cfg.gen_t_max));
  const MatrixXd lx = sym_sqrt(build_R_x(design, CorrParams{g.xi.alphas, g.xi.beta, g.xi.d, 1e-12}).matrix());
  MatrixXd rt(m, m);
  for (Index j = 0; j < m; ++j) {
    for (Index l = 0; l < m; ++l) rt(j, l) = corr_t(grid(j), grid(l), g.xi.beta, g.xi.d);
  }
  const MatrixXd lt = sym_sqrt(rt);
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd e(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) e(i, j) = z(rng);
  }
  MatrixXd y = std::sqrt(cfg.gen_sigma2) * lx * e * lt.transpose();
  for (Index j = 0; j < m; ++j) {
    const double s = grid(j) / cfg.gen_t_max;
    double mean = 0.0;
    for (size_t k = 0; k < cfg.gen_mu.size(); ++k) mean += cfg.gen_mu[k] * std::pow(s, static_cast<double>(k));
    y.col(j).array() += mean;
  }
  g.truth.design = design;
  g.truth.grid = grid;
  g.truth.y = y;

  std::uniform_real_distribution<double> keep(cfg.gen_keep_lo, cfg.gen_keep_hi);
  g.data.design = design;
  for (Index i = 0; i < n; ++i) {
    const double f = cfg.gen_keep_lo == cfg.gen_keep_hi ? cfg.gen_keep_lo : keep(rng);
    const Index k = std::clamp<Index>(static_cast<Index>(std::ceil(f * static_cast<double>(m) - 1e-9)), 1, m);
    g.data.t.push_back(grid.head(k));
    g.data.y.push_back(y.row(i).head(k).transpose());
  }
  return g;
}

GeneratedData cmd_generate(const ProjectConfig& cfg) {
  GeneratedData g = generate_data(cfg);
  write_design_csv(out_path(cfg, "design.csv"), g.data.design);
  write_profiles_csv(out_path(cfg, "profiles.csv"), g.data);
  write_profiles_csv(out_path(cfg, "truth.csv"), g.truth.to_functional());
  return g;
}

FunctionalDataset load_dataset(const ProjectConfig& cfg) {
  if (cfg.design.empty() || cfg.profiles.empty()) {
    throw ConfigError("design and profiles must be set");
  }
  const Design design = read_design_csv(cfg.resolve(cfg.design), cfg.kinds);
  return read_profiles_csv(cfg.resolve(cfg.profiles), design);
}

PipelineOptions pipeline_options(const ProjectConfig& cfg, const Design& design) {
  PipelineOptions o;
  o.transform = cfg.transform;
  o.stage1.t_candidates = cfg.t_candidates;
  if (cfg.x_candidates == "none") {
    o.stage1.x_candidates = std::vector<XTerm>{};
  } else if (cfg.x_candidates != "linear") {
    std::vector<XTerm> terms;
    std::stringstream ss(cfg.x_candidates);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      const std::string name = item.substr(0, colon);
      const int power = colon == std::string::npos ? 1 : static_cast<int>(parse_long(item.substr(colon + 1)));
      terms.push_back({variable_index(design, name), power});
    }
    o.stage1.x_candidates = terms;
  }
  o.stage1.marginal.d = cfg.d;
  o.stage1.marginal.nugget = cfg.nugget;
  o.stage1.marginal.fit.n_restarts = cfg.fit_restarts;
  o.stage1.marginal.fit.seed = cfg.seed;
  o.fit.n_restarts = cfg.fit_restarts;
  o.fit.seed = cfg.seed;
  o.em.q = cfg.em_q;
  o.em.delta = cfg.em_delta;
  o.em.max_iter = cfg.em_max_iter;
  o.em.mode = cfg.em_mode == "sampling" ? EMMode::sampling : EMMode::expectation;
  o.em.seed = cfg.seed;
  o.em.fit.seed = cfg.seed;
  return o;
}

std::string fit_report(const PipelineResult& r, const FunctionalDataset& data) {
  const KrigingModel& m = r.model;
  const Design& d = m.design();
  std::ostringstream o;
  o << "fkrig fit report\n";
  o << "runs: " << data.runs() << "\n";
  o << "grid: " << (r.em ? "irregular" : "regular") << " (" << m.grid().size() << " points)\n";
  o << "transform: " << (r.decay ? "lambda = " + num(r.decay->lambda) : std::string("none")) << "\n";
  o << "basis: t powers [";
  for (size_t k = 0; k < m.basis().t_powers.size(); ++k) o << (k ? " " : "") << m.basis().t_powers[k];
  o << "], x terms [";
  for (size_t k = 0; k < m.basis().x_terms.size(); ++k) {
    const auto& t = m.basis().x_terms[k];
    o << (k ? " " : "") << d.names[static_cast<size_t>(t.var)] << "^" << t.power;
  }
  o << "]\n\nparameters\n";
  for (Index l = 0; l < m.mu().size(); ++l) o << "  mu[" << l << "] = " << num(m.mu()(l)) << "\n";
  o << "  sigma2 = " << num(m.sigma2()) << "\n";
  for (Index k = 0; k < d.dim(); ++k) {
    o << "  alpha[" << d.names[static_cast<size_t>(k)] << "] = " << num(m.params().alphas(k)) << "\n";
  }
  o << "  beta = " << num(m.params().beta) << "\n";
  o << "  d = " << m.params().d << "\n  nugget = " << num(m.params().nugget) << "\n";
  o << "  objective = " << num(m.objective()) << "\n";
  if (r.em) {
    const EMResult& em = *r.em;
    o << "\nEM\n";
    o << "  iterations: " << em.iterations << "\n";
    o << "  converged: " << (em.converged ? "yes" : "no (max_iter reached)") << "\n";
    o << "  final max-delta: " << num(em.history.empty() ? 0.0 : em.history.back().max_delta) << "\n";
    o << "  missing cells: " << (em.observed.size() - em.observed.count()) << "\n";
    o << "  iter  max_delta  q_value  last_sweep_delta  sigma2  beta\n";
    for (size_t k = 0; k < em.history.size(); ++k) {
      const auto& h = em.history[k];
      o << "  " << k + 1 << "  " << num(h.max_delta) << "  " << num(h.q_value) << "  "
        << num(h.last_sweep_delta) << "  " << num(h.sigma2) << "  " << num(h.beta) << "\n";
    }
    o << "\ncontraction diagnostic per run (values below 1 satisfy the condition)\n";
    Index above = 0;
    for (Index i = 0; i < em.prop2.size(); ++i) {
      above += em.prop2(i) >= 1.0;
      o << "  run " << i + 1 << ": " << num(em.prop2(i)) << "\n";
    }
    o << "  max: " << num(em.prop2.size() ? em.prop2.maxCoeff() : 0.0) << ", runs at or above 1: " << above
      << "\n";
  }
  return o.str();
}

FitOutput cmd_fit(const ProjectConfig& cfg) {
  const FunctionalDataset data = load_dataset(cfg);
  FitOutput out;
  out.result = run_pipeline(data, pipeline_options(cfg, data.design));
  out.report = fit_report(out.result, data);
  save_model(out_path(cfg, "model.txt"), out.result.model, out.result.observed);
  write_text(out_path(cfg, "report.txt"), out.report);
  return out;
}

MatrixXd predict_rows(const KrigingModel& model, const MatrixXd& query, double kappa) {
  const Index p = model.design().dim();
  if (query.cols() != p + 1) throw DimensionMismatch("query rows need every variable and t");
  MatrixXd out(query.rows(), 3);
  for (Index r = 0; r < query.rows(); ++r) {
    const VectorXd x = query.row(r).head(p).transpose();
    const Interval iv = model.predict_ci(x, query(r, p), kappa);
    out.row(r) << iv.center, iv.lo, iv.hi;
  }
  return out;
}

MatrixXd cmd_predict(const std::filesystem::path& model, const std::filesystem::path& query, double kappa,
                     const std::filesystem::path& output) {
  const ModelFile mf = load_model(model);
  const MatrixXd out = predict_rows(mf.model, read_query_csv(query, mf.model.design()), kappa);
  write_matrix_csv(output, {"y_hat", "lo", "hi"}, out);
  return out;
}

std::vector<Index> default_probes(Index n) {
  std::vector<Index> out;
  const Index k = std::min<Index>(6, n);
  for (Index j = 0; j < k; ++j) out.push_back((2 * j + 1) * n / (2 * k));
  return out;
}

ValidateOutput cmd_validate(const ProjectConfig& cfg) {
  const FunctionalDataset data = load_dataset(cfg);
  const PipelineOptions opts = pipeline_options(cfg, data.design);
  ValidateOutput out;
  if (cfg.probes.empty()) {
    out.probes = default_probes(data.runs());
  } else {
    for (int id : cfg.probes) out.probes.push_back(id - 1);
  }
  std::vector<KrigingModel> models;
  FitProcedure em = [&](const FunctionalDataset& train) {
    models.push_back(run_pipeline(train, opts).model);
    const KrigingModel* mp = &models.back();
    return Predictor([m = *mp](const VectorXd& x, const VectorXd& t) { return m.predict_profile(x, t); });
  };
  out.mscv_em = mscv(data, em, out.probes, &out.per_probe_em);
  out.mscv_common = mscv(data, common_grid_procedure(opts), out.probes, &out.per_probe_common);

  std::vector<std::array<double, 6>> rows;
  for (size_t k = 0; k < out.probes.size(); ++k) {
    const Index i = out.probes[k];
    const VectorXd x = data.design.rows.row(i).transpose();
    const auto& ti = data.t[static_cast<size_t>(i)];
    for (Index j = 0; j < ti.size(); ++j) {
      const Interval iv = models[k].predict_ci(x, ti(j), cfg.kappa);
      rows.push_back({static_cast<double>(i + 1), ti(j), data.y[static_cast<size_t>(i)](j), iv.center, iv.lo, iv.hi});
    }
  }
  MatrixXd loo(static_cast<Index>(rows.size()), 6);
  for (size_t r = 0; r < rows.size(); ++r) {
    for (Index c = 0; c < 6; ++c) loo(static_cast<Index>(r), c) = rows[r][static_cast<size_t>(c)];
  }
  write_matrix_csv(out_path(cfg, "loo_profiles.csv"), {"run_id", "t", "y", "y_hat", "lo", "hi"}, loo);

  std::ostringstream o;
  o << "fkrig validation report\n";
  o << "probe runs:";
  for (Index i : out.probes) o << " " << i + 1;
  o << "\nmscv em-completed: " << num(out.mscv_em) << "\n";
  o << "mscv common-grid: " << num(out.mscv_common) << "\n";
  o << "run  em-completed  common-grid\n";
  for (size_t k = 0; k < out.probes.size(); ++k) {
    o << out.probes[k] + 1 << "  " << num(out.per_probe_em[k]) << "  " << num(out.per_probe_common[k]) << "\n";
  }
  write_text(out_path(cfg, "validate.txt"), o.str());
  return out;
}

std::pair<VectorXd, VectorXd> optimize_bounds(const ProjectConfig& cfg, const Design& design) {
  VectorXd lo(design.dim()), hi(design.dim());
  for (Index k = 0; k < design.dim(); ++k) {
    const VarKind& v = design.kinds[static_cast<size_t>(k)];
    lo(k) = v.is_categorical() ? 1.0 : v.lo;
    hi(k) = v.is_categorical() ? v.levels : v.hi;
  }
  for (const auto& [name, b] : cfg.bounds) {
    const Index k = variable_index(design, name);
    lo(k) = b.first;
    hi(k) = b.second;
  }
  return {lo, hi};
}

OptimOptions optimize_options(const ProjectConfig& cfg, const Design& design) {
  OptimOptions o;
  o.restarts = cfg.opt_restarts;
  o.max_evals = cfg.opt_max_evals;
  o.refine = cfg.opt_refine;
  o.seed = cfg.seed;
  for (const auto& name : cfg.opt_max_vars) o.max_vars.push_back(variable_index(design, name));
  return o;
}

OptimResult cmd_optimize(const ProjectConfig& cfg, const std::filesystem::path& model) {
  const ModelFile mf = load_model(model);
  const Design& d = mf.model.design();
  const auto [lo, hi] = optimize_bounds(cfg, d);
  const OptimResult r = minimax_optimize(mf.model, lo, hi, optimize_options(cfg, d));
  nlohmann::json j;
  j["x_star"] = nlohmann::json::object();
  for (Index k = 0; k < d.dim(); ++k) j["x_star"][d.names[static_cast<size_t>(k)]] = r.x_star(k);
  j["worst_t"] = r.worst_t;
  j["worst_value"] = r.worst_value;
  j["trace"] = r.trace;
  j["max_evals_hit"] = r.max_evals_hit;
  write_text(out_path(cfg, "optimize.json"), j.dump(2) + "\n");
  return r;
}

std::vector<EffectCurve> cmd_sensitivity(const ProjectConfig& cfg, const std::filesystem::path& model) {
  const ModelFile mf = load_model(model);
  const Design& d = mf.model.design();
  std::vector<std::string> vars = cfg.sens_vars.empty() ? d.names : cfg.sens_vars;
  std::vector<EffectCurve> out;
  for (const auto& name : vars) {
    const Index k = variable_index(d, name);
    const VarKind& v = d.kinds[static_cast<size_t>(k)];
    const VectorXd levels = v.is_categorical() ? VectorXd::LinSpaced(v.levels, 1, v.levels)
                                               : VectorXd::LinSpaced(std::max(cfg.sens_levels, 2), v.lo, v.hi);
    EffectCurve e = main_effects(mf.model, k, levels, cfg.sens_nodes, cfg.seed);
    MatrixXd rows(e.levels.size() * e.t.size(), 3);
    for (Index l = 0; l < e.levels.size(); ++l) {
      for (Index j = 0; j < e.t.size(); ++j) rows.row(l * e.t.size() + j) << e.levels(l), e.t(j), e.effect(l, j);
    }
    write_matrix_csv(out_path(cfg, "effect_" + name + ".csv"), {"level", "t", "effect"}, rows);
    out.push_back(std::move(e));
  }
  return out;
}

BenchOutput run_benchmark(const ProjectConfig& cfg) {
  BenchOutput out;
  for (int m : cfg.bench_m) {
    ProjectConfig g = cfg;
    g.gen_design = "lhs";
    g.gen_n = cfg.bench_n;
    g.gen_m = m;
    g.gen_d = 1;
    g.gen_t_max = m - 1;  // unit spacing
    g.gen_beta = 0.1;
    g.gen_keep_lo = g.gen_keep_hi = 1.0;
    const GeneratedData gd = generate_data(g);
    const RegularData& data = gd.truth;
    const FunctionalDataset fd = data.to_functional();
    const BasisSpec basis = BasisSpec::intercept_only(data.grid);
    const CorrParams xi = gd.xi;
    const MatrixXd v = basis_matrix(basis, data.design, data.grid);
    auto structured = [&](bool closed) {
      const SpdFactor rx = build_R_x(data.design, xi);
      const StructuredCorrT rt = build_R_t(data.grid, xi.beta, xi.d, xi.nugget, closed);
      const VectorXd mu = gls_mu(data.y, v, rx, rt);
      const double s2 = std::max(sigma2_hat(data.y, v, mu, rx, rt), kSigma2Floor);
      return static_cast<double>(data.y.size()) * std::log(s2) + logdet_kron(rx, rt);
    };
    const std::vector<std::pair<std::string, std::function<double()>>> paths = {
        {"dense", [&] { return oracle::dense_neg_loglik(fd, basis, xi, cfg.bench_dense_cap); }},
        {"kronecker", [&] { return structured(false); }},
        {"closed_form", [&] { return structured(true); }},
    };
    double dense_value = 0.0;
    for (const auto& [name, f] : paths) {
      const double value = f();
      if (name == "dense") dense_value = value;
      out.max_disagreement = std::max(out.max_disagreement, std::abs(value - dense_value));
      if (cfg.bench_reps <= 0) continue;
      std::vector<double> times;
      for (int r = 0; r < cfg.bench_reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        volatile double sink = f();
        (void)sink;
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
      std::nth_element(times.begin(), times.begin() + static_cast<long>(times.size() / 2), times.end());
      out.rows.push_back({cfg.bench_n, m, name, times[times.size() / 2], value});
    }
  }
  return out;
}

BenchOutput cmd_benchmark(const ProjectConfig& cfg) {
  BenchOutput b = run_benchmark(cfg);
  const auto path = out_path(cfg, "benchmark.csv");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream o(path);
  if (!o) throw InputError("cannot write " + path.string());
  o << "n,m,path,median_seconds,value\n" << std::setprecision(17);
  for (const auto& r : b.rows) o << r.n << "," << r.m << "," << r.path << "," << r.median_seconds << "," << r.value << "\n";
  return b;
}

}  // namespace fkrig
