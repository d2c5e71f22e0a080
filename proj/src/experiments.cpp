#include "corrpair/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include "corrpair/gft_flow.hpp"
#include "corrpair/mde.hpp"
#include "corrpair/parallel.hpp"
#include "corrpair/spectral_stats.hpp"

#ifndef CORRPAIR_VERSION
#define CORRPAIR_VERSION "0.0.0"
#endif

namespace corrpair {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::ThresholdSweep, "threshold_sweep"},
    {ExperimentKind::OptimalityDemo, "optimality_demo"},
    {ExperimentKind::GftContinuity, "gft_continuity"},
    {ExperimentKind::MdeValidation, "mde_validation"},
    {ExperimentKind::TraceCorrIdentity, "trace_corr_identity"},
};

std::uint64_t derive_seed(std::uint64_t master, int tag, int n, int index) {
  const std::int64_t words[3] = {tag, n, index};
  return sample_seed(master, fnv1a(words, sizeof(words)));
}

std::vector<double> default_t_fractions() { return {0.0, 1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2}; }

std::vector<double> param_list(const Json& params, const std::string& key, std::vector<double> fallback) {
  if (!params.contains(key)) return fallback;
  return params.at(key).get<std::vector<double>>();
}

}  // namespace

std::string to_string(ExperimentKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "unknown";
}

ExperimentKind experiment_from_string(std::string_view name) {
  for (const auto& [kind, n] : kKindNames)
    if (name == n) return kind;
  throw std::invalid_argument("unknown experiment: " + std::string(name));
}

ExperimentConfig ExperimentConfig::from_json(const Json& doc) {
  ExperimentConfig c;
  c.schema = doc.value("schema", 1);
  c.experiment = experiment_from_string(doc.at("experiment").get<std::string>());
  if (doc.contains("model")) c.model = doc.at("model");
  c.n_list = doc.at("n_list").get<std::vector<int>>();
  if (doc.contains("alpha_list")) c.alpha_list = doc.at("alpha_list").get<std::vector<double>>();
  if (doc.contains("gamma_list")) c.gamma_list = doc.at("gamma_list").get<std::vector<double>>();
  c.mc_samples = doc.value("mc_samples", c.mc_samples);
  c.master_seed = doc.value("master_seed", c.master_seed);
  c.output_dir = doc.value("output_dir", c.output_dir);
  if (doc.contains("tolerances")) c.tolerances = doc.at("tolerances").get<std::map<std::string, double>>();
  if (doc.contains("params")) c.params = doc.at("params");
  return c;
}

Json ExperimentConfig::to_json() const {
  Json d;
  d["schema"] = schema;
  d["experiment"] = corrpair::to_string(experiment);
  d["model"] = model;
  d["n_list"] = n_list;
  d["alpha_list"] = alpha_list;
  d["gamma_list"] = gamma_list;
  d["mc_samples"] = mc_samples;
  d["master_seed"] = master_seed;
  d["output_dir"] = output_dir;
  d["tolerances"] = tolerances;
  d["params"] = params;
  return d;
}

std::string ExperimentConfig::hash() const { return hex64(json_hash(to_json())); }

std::vector<double> ExperimentConfig::alphas_for(int n) const {
  if (gamma_list.empty()) return alpha_list;
  std::vector<double> out;
  for (double g : gamma_list) out.push_back(std::pow(static_cast<double>(n), -g));
  return out;
}

double ExperimentConfig::param(const std::string& key, double fallback) const {
  if (params.is_object() && params.contains(key)) return params.at(key).get<double>();
  return fallback;
}

double ExperimentConfig::tolerance(const std::string& key, double fallback) const {
  auto it = tolerances.find(key);
  return it == tolerances.end() ? fallback : it->second;
}

PairModelSpec ExperimentConfig::model_for(int n) const {
  if (model.is_null()) return wigner_pair_spec(n, SymmetryClass::RealSymmetric, 1.0, 0.0);
  return spec_from_json(model, n);
}

ValidationReport validate_config(const ExperimentConfig& c, const RunLimits& limits) {
  ValidationReport r;
  auto add = [&](const std::string& name, bool ok, const std::string& detail) {
    r.checks.push_back({name, ok, ok ? "" : detail, std::nullopt});
  };
  add("schema", c.schema == 1, "only schema 1 is supported");
  add("n_list", !c.n_list.empty(), "n_list must not be empty");
  bool n_ok = true, n_cap = true;
  for (int n : c.n_list) {
    n_ok = n_ok && n >= 2;
    n_cap = n_cap && (limits.allow_large || n <= limits.max_n);
  }
  add("n_positive", n_ok, "every N must be at least 2");
  add("n_cap", n_cap, "N above " + std::to_string(limits.max_n) + " needs --allow-large");
  add("mc_samples", c.mc_samples >= 2, "mc_samples must be at least 2");
  add("mc_samples_cap", limits.allow_large || c.mc_samples <= limits.max_samples,
      "mc_samples above " + std::to_string(limits.max_samples) + " needs --allow-large");
  bool g_ok = true;
  for (double g : c.gamma_list) g_ok = g_ok && g >= 0.0 && g <= 3.0;
  add("gamma_range", g_ok, "gamma values must lie in [0, 3]");
  bool a_ok = true;
  for (double a : c.alpha_list) a_ok = a_ok && a >= 0.0 && a <= 1.0;
  add("alpha_range", a_ok, "alpha values must lie in [0, 1]");

  const bool needs_alpha = c.experiment == ExperimentKind::ThresholdSweep ||
                           c.experiment == ExperimentKind::OptimalityDemo ||
                           c.experiment == ExperimentKind::TraceCorrIdentity;
  if (needs_alpha)
    add("alpha_grid", !c.alpha_list.empty() || !c.gamma_list.empty(), "alpha_list or gamma_list is required");
  if (c.experiment == ExperimentKind::ThresholdSweep)
    add("threshold_samples", c.mc_samples >= 100, "threshold sweeps need at least 100 samples");
  if (c.experiment == ExperimentKind::GftContinuity) {
    bool t_ok = true;
    for (double f : param_list(c.params, "t_fractions", default_t_fractions())) t_ok = t_ok && f >= 0.0 && f <= 1.0;
    add("t_grid", t_ok, "t_fractions must lie in [0, 1] (t <= alpha)");
  }

  const bool uses_model = c.experiment == ExperimentKind::GftContinuity ||
                          c.experiment == ExperimentKind::MdeValidation || !c.model.is_null();
  if (uses_model && n_ok) {
    for (int n : c.n_list) {
      try {
        const auto rep = validate_spec(c.model_for(n));
        const auto* bad = rep.first_failure();
        add("model_n" + std::to_string(n), bad == nullptr, bad ? bad->name + ": " + bad->detail : "");
      } catch (const std::exception& e) {
        add("model_n" + std::to_string(n), false, e.what());
      }
    }
  }
  return r;
}

SampleRow::SampleRow()
    : alpha(kNaN), t(kNaN), e1(kNaN), e2(kNaN), x1(kNaN), x2(kNaN), r_value(kNaN), trace_sq1(kNaN), trace_sq2(kNaN) {}

const char* const kSampleCsvHeader = "seed,n,alpha,t,E1,E2,x1,x2,R_value,trace_sq1,trace_sq2";

std::string ExperimentRecord::samples_csv() const {
  std::ostringstream os;
  os << kSampleCsvHeader << '\n' << std::setprecision(17);
  for (const auto& r : rows)
    os << r.seed << ',' << r.n << ',' << r.alpha << ',' << r.t << ',' << r.e1 << ',' << r.e2 << ',' << r.x1 << ','
       << r.x2 << ',' << r.r_value << ',' << r.trace_sq1 << ',' << r.trace_sq2 << '\n';
  return os.str();
}

Json ExperimentRecord::summary_document() const {
  return Json{{"schema", 1},
              {"experiment", config.at("experiment")},
              {"config_hash", config_hash},
              {"software_version", software_version},
              {"results", summary}};
}

void ExperimentRecord::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  const std::filesystem::path p(dir);
  write_text_file((p / "config.json").string(), config.dump(2) + "\n");
  write_text_file((p / "samples.csv").string(), samples_csv());
  write_text_file((p / "summary.json").string(), summary_document().dump(2) + "\n");
  write_text_file((p / "timing.json").string(), Json{{"wall_clock_seconds", wall_clock_seconds}}.dump(2) + "\n");
  for (const auto& [name, text] : extra_files) write_text_file((p / name).string(), text);
}

std::string software_version() { return CORRPAIR_VERSION; }

namespace {

ExperimentRecord new_record(const ExperimentConfig& c) {
  ExperimentRecord rec;
  rec.config = c.to_json();
  rec.config_hash = hex64(json_hash(rec.config));
  rec.software_version = software_version();
  return rec;
}

SymmetryClass model_symmetry(const ExperimentConfig& c) {
  if (c.model.is_object() && c.model.contains("symmetry"))
    return symmetry_from_string(c.model.at("symmetry").get<std::string>());
  return SymmetryClass::RealSymmetric;
}

Matrix model_deformation(const ExperimentConfig& c, int n) {
  if (c.model.is_null()) return Matrix::Zero(n, n);
  return c.model_for(n).deformation1;
}

// rho at the window energy from the MDE at eta = 1e-5.
double density_at(const Matrix& a, const SelfEnergy& s, double energy) {
  return scdos(a, s, {energy}, 1e-5).rho.front();
}

struct PairItem {
  SpectrumPair spectra;
  SampleRow row;
};

}  // namespace

ExperimentRecord run_threshold_sweep(const ExperimentConfig& c) {
  ExperimentRecord rec = new_record(c);
  const double energy = c.param("energy", 0.0);
  const double kappa = c.param("kappa", 0.05);
  const double width = c.param("bump_width", 2.0);
  const int boot = static_cast<int>(c.param("bootstrap", 1000));
  const bool normalize = c.param("normalize", 1.0) != 0.0;
  const SymmetryClass sym = model_symmetry(c);
  const TestFunction f = bump_product(1, 1, width);

  Json per_n = Json::array();
  for (int n : c.n_list) {
    const Matrix a = model_deformation(c, n);
    const SelfEnergy s = SelfEnergy::from_profile(CorrelationProfile::invariant(n, sym, 0.0, 1.0).variance1, sym);
    const double rho = density_at(a, s, energy);
    const LocalWindow w = LocalWindow::make(energy, rho, 1, kappa);
    const auto alphas = c.alphas_for(n);
    Json points = Json::array();
    std::vector<double> order, corrs;
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
      const double alpha = alphas[ai];
      const std::uint64_t base = derive_seed(c.master_seed, 1, n, static_cast<int>(ai));
      SharedPairOptions opt;
      opt.normalize = normalize;
      if (!a.isZero(0.0)) opt.deformation = a;
      auto items = map_indexed<PairItem>(static_cast<std::size_t>(c.mc_samples), [&](std::size_t i) {
        PairItem it;
        const std::uint64_t seed = sample_seed(base, i);
        const MatrixPairSample p = sample_shared_pair(n, sym, alpha, seed, opt);
        it.spectra = spectrum_pair(p, sym);
        it.row.seed = seed;
        it.row.n = n;
        it.row.alpha = alpha;
        it.row.e1 = it.row.e2 = energy;
        it.row.x1 = nearest_fluctuations(it.spectra.lambdas1, w).front();
        it.row.x2 = nearest_fluctuations(it.spectra.lambdas2, w).front();
        it.row.trace_sq1 = trace_square(p.h1);
        it.row.trace_sq2 = trace_square(p.h2);
        return it;
      });
      std::vector<SpectrumPair> spectra;
      spectra.reserve(items.size());
      for (auto& it : items) {
        rec.rows.push_back(it.row);
        spectra.push_back(std::move(it.spectra));
      }
      const auto corr = fluctuation_correlation(spectra, w, w, boot, base);
      const auto joint = joint_local_statistic(spectra, f, w, w);
      Json pt{{"alpha", alpha},       {"correlation", corr.corr}, {"ci_low", corr.ci_low},
              {"ci_high", corr.ci_high}, {"correlation_se", corr.se}, {"joint", joint.joint},
              {"product", joint.product}, {"gap", joint.gap},      {"gap_se", joint.gap_se},
              {"samples", corr.samples}};
      if (!c.gamma_list.empty()) pt["gamma"] = c.gamma_list[ai];
      points.push_back(pt);
      order.push_back(c.gamma_list.empty() ? -std::log(alpha) : c.gamma_list[ai]);
      corrs.push_back(corr.corr);
    }
    Json entry{{"n", n}, {"energy", energy}, {"rho", rho}, {"points", points}};
    entry["spearman"] = order.size() >= 2 ? spearman(order, corrs) : kNaN;
    per_n.push_back(entry);
  }
  rec.summary = Json{{"test_function", f.label}, {"bump_width", width}, {"per_n", per_n}};
  return rec;
}

ExperimentRecord run_optimality_demo(const ExperimentConfig& c) {
  ExperimentRecord rec = new_record(c);
  const double energy = c.param("energy", 0.0);
  const double kappa = c.param("kappa", 0.05);
  const double width = c.param("bump_width", 2.0);
  const SymmetryClass sym = model_symmetry(c);
  const TestFunction f = bump_product(1, 1, width);

  Json per_n = Json::array();
  for (int n : c.n_list) {
    const SelfEnergy s = SelfEnergy::from_profile(CorrelationProfile::invariant(n, sym, 0.0, 1.0).variance1, sym);
    const double rho = density_at(Matrix::Zero(n, n), s, energy);
    const LocalWindow w = LocalWindow::make(energy, rho, 1, kappa);
    const auto samples = static_cast<std::size_t>(c.mc_samples);

    // Independent single-matrix spectra for the two reference terms.
    auto singles = [&](int tag) {
      const std::uint64_t base = derive_seed(c.master_seed, tag, n, 0);
      return map_indexed<RealVector>(samples, [&](std::size_t i) {
        return eigen_spectrum(sample_gaussian_invariant(n, sym, sample_seed(base, i)), sym);
      });
    };
    const MeanEstimate p2 = pair_correlation_term(singles(21), f, w);
    const MeanEstimate diag = diagonal_term(singles(22), f, w);

    const auto alphas = c.alphas_for(n);
    Json points = Json::array();
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
      const double alpha = alphas[ai];
      const std::uint64_t base = derive_seed(c.master_seed, 2, n, static_cast<int>(ai));
      SharedPairOptions opt;
      opt.normalize = true;
      auto items = map_indexed<PairItem>(samples, [&](std::size_t i) {
        PairItem it;
        const std::uint64_t seed = sample_seed(base, i);
        const MatrixPairSample p = sample_shared_pair(n, sym, alpha, seed, opt);
        it.spectra = spectrum_pair(p, sym);
        it.row.seed = seed;
        it.row.n = n;
        it.row.alpha = alpha;
        it.row.e1 = it.row.e2 = energy;
        it.row.x1 = nearest_fluctuations(it.spectra.lambdas1, w).front();
        it.row.x2 = nearest_fluctuations(it.spectra.lambdas2, w).front();
        return it;
      });
      std::vector<SpectrumPair> spectra;
      for (auto& it : items) {
        rec.rows.push_back(it.row);
        spectra.push_back(std::move(it.spectra));
      }
      const auto joint = joint_local_statistic(spectra, f, w, w);
      const double excess = joint.joint - p2.mean;
      const double excess_se = std::hypot(joint.joint_se, p2.se);
      const double diff = excess - diag.mean;
      const double diff_se = std::hypot(excess_se, diag.se);
      Json pt{{"alpha", alpha},
              {"joint", joint.joint},
              {"joint_se", joint.joint_se},
              {"product", joint.product},
              {"gap", joint.gap},
              {"gap_se", joint.gap_se},
              {"pair_term", p2.mean},
              {"pair_term_se", p2.se},
              {"excess", excess},
              {"excess_se", excess_se},
              {"diagonal_term", diag.mean},
              {"diagonal_term_se", diag.se},
              {"excess_minus_diagonal", diff},
              {"z_score", diff / diff_se}};
      if (!c.gamma_list.empty()) pt["gamma"] = c.gamma_list[ai];
      points.push_back(pt);
    }
    per_n.push_back(Json{{"n", n}, {"energy", energy}, {"rho", rho}, {"points", points}});
  }
  rec.summary = Json{{"test_function", f.label}, {"bump_width", width}, {"per_n", per_n}};
  return rec;
}

ExperimentRecord run_gft_continuity(const ExperimentConfig& c) {
  ExperimentRecord rec = new_record(c);
  const double energy = c.param("energy", 0.0);
  const double xi = c.param("xi", 0.05);
  const int m1 = static_cast<int>(c.param("m", 1));
  const int m2 = static_cast<int>(c.param("n", 1));
  const auto fractions = param_list(c.params, "t_fractions", default_t_fractions());

  Json per_n = Json::array();
  for (int n : c.n_list) {
    const PairModelSpec spec = c.model_for(n);
    const double alpha = spec.profile.alpha;
    const auto entries = std::make_shared<const EntryFlowData>(build_entry_data(spec.profile, spec.symmetry));
    const std::uint64_t hash = spec_hash(spec);
    const double eta = std::pow(static_cast<double>(n), -1.0 - xi);
    const std::vector<Complex> z1(static_cast<std::size_t>(m1), Complex(energy, eta));
    const std::vector<Complex> z2(static_cast<std::size_t>(m2), Complex(energy, eta));
    std::vector<double> ts;
    for (double fr : fractions) ts.push_back(fr * alpha);
    const std::uint64_t base = derive_seed(c.master_seed, 3, n, 0);

    auto paths = map_indexed<std::vector<double>>(static_cast<std::size_t>(c.mc_samples), [&](std::size_t i) {
      const std::uint64_t seed = sample_seed(base, i);
      const MatrixPairSample p = sample_pair(spec, seed, hash);
      FlowState st = make_flow_state(p.w1, p.w2, entries, seed);
      std::vector<double> r;
      for (double t : ts) {
        st = evolve_exact(st, t, Backend::Serial);
        const Matrix h1 = spec.deformation1 + apply_filter(spec.filter1, st.w1, spec.symmetry);
        const Matrix h2 = spec.deformation2 + apply_filter(spec.filter2, st.w2, spec.symmetry);
        const SpectrumPair sp{eigen_spectrum(h1, spec.symmetry), eigen_spectrum(h2, spec.symmetry), seed};
        r.push_back(green_observable(sp, z1, z2).value);
      }
      return r;
    });

    const double scale = std::sqrt(n / alpha);
    const std::size_t samples = paths.size();
    Json points = Json::array();
    std::vector<double> env(ts.size());
    double fitted = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      double mean_r = 0.0, mean_d = 0.0;
      for (std::size_t i = 0; i < samples; ++i) {
        mean_r += paths[i][k];
        mean_d += paths[i][k] - paths[i][0];
        SampleRow row;
        row.seed = sample_seed(base, i);
        row.n = n;
        row.alpha = alpha;
        row.t = ts[k];
        row.e1 = row.e2 = energy;
        row.r_value = paths[i][k];
        rec.rows.push_back(row);
      }
      mean_r /= static_cast<double>(samples);
      mean_d /= static_cast<double>(samples);
      double ss = 0.0;
      for (std::size_t i = 0; i < samples; ++i) {
        const double d = paths[i][k] - paths[i][0] - mean_d;
        ss += d * d;
      }
      const double se = samples > 1 ? std::sqrt(ss / static_cast<double>(samples - 1) / static_cast<double>(samples)) : 0.0;
      env[k] = std::abs(mean_d) + 2.0 * se;
      Json pt{{"t", ts[k]}, {"mean_R", mean_r}, {"increment", mean_d}, {"increment_se", se}, {"envelope", env[k]}};
      if (ts[k] > 0) {
        pt["scaled_envelope"] = env[k] / (scale * ts[k]);
        fitted = std::max(fitted, std::abs(mean_d) / (scale * ts[k]));
      }
      points.push_back(pt);
    }

    // Linear-growth checks relative to the smallest positive time.
    std::size_t first = 0;
    while (first < ts.size() && ts[first] <= 0.0) ++first;
    bool linear_ok = true, doubling_ok = true;
    double c_first = kNaN;
    if (first < ts.size()) {
      c_first = env[first] / (scale * ts[first]);
      for (std::size_t k = first; k < ts.size(); ++k)
        linear_ok = linear_ok && env[k] <= c_first * scale * ts[k] * (1.0 + 1e-12);
      for (std::size_t k = first + 1; k < ts.size(); ++k)
        if (std::abs(ts[k] - 2.0 * ts[k - 1]) <= 1e-12 * ts[k]) doubling_ok = doubling_ok && env[k] <= 4.0 * env[k - 1];
    }
    double at_zero = kNaN;
    for (std::size_t k = 0; k < ts.size(); ++k)
      if (ts[k] == 0.0) at_zero = points[k].at("increment").get<double>();
    per_n.push_back(Json{{"n", n},
                         {"alpha", alpha},
                         {"eta", eta},
                         {"scale_sqrt_n_over_alpha", scale},
                         {"points", points},
                         {"fitted_constant", fitted},
                         {"first_point_constant", c_first},
                         {"linear_growth_ok", linear_ok},
                         {"doubling_ok", doubling_ok},
                         {"increment_at_zero", at_zero}});
  }
  rec.summary = Json{{"xi", xi}, {"m", m1}, {"n", m2}, {"per_n", per_n}};
  return rec;
}

namespace {

double smoothed_density(const RealVector& lambdas, double e, double eta) {
  return resolvent_trace(lambdas, Complex(e, eta)).imag() / std::numbers::pi;
}

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  return g;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return acc;
}

}  // namespace

ExperimentRecord run_mde_validation(const ExperimentConfig& c) {
  ExperimentRecord rec = new_record(c);
  const double eta_s = c.param("eta_smooth", 0.05);
  const double kappa = c.param("kappa", 0.1);
  const int grid_points = static_cast<int>(c.param("grid_points", 2001));
  const int density_points = static_cast<int>(c.param("density_points", 301));
  const double free_t = c.param("free_t", 0.05);

  Json per_n = Json::array();
  for (int n : c.n_list) {
    const PairModelSpec spec = c.model_for(n);
    const SymmetryClass sym = spec.symmetry;
    const Matrix& a = spec.deformation1;
    const SelfEnergy s = SelfEnergy::from_model(spec, 1);
    const std::uint64_t hash = spec_hash(spec);

    const SpectralSolution sol = spectral_solution(a, s, default_energy_grid(a, grid_points), 1e-5, kappa);
    const double mass = trapezoid(sol.curve.energies, sol.curve.rho);
    Json bulk = Json::array();
    for (const auto& iv : sol.bulk) bulk.push_back({iv.lo, iv.hi});

    const double half = hermitian_norm(a) + 3.0;
    const auto grid = linspace(-half, half, density_points);
    const ScdosResult smooth = scdos(a, s, grid, eta_s);

    const std::uint64_t base = derive_seed(c.master_seed, 4, n, 0);
    const auto samples = static_cast<std::size_t>(c.mc_samples);
    auto spectra = map_indexed<RealVector>(samples, [&](std::size_t i) {
      return eigen_spectrum(sample_pair(spec, sample_seed(base, i), hash).h1, sym);
    });
    std::vector<double> emp(grid.size(), 0.0);
    for (std::size_t i = 0; i < samples; ++i) {
      for (std::size_t g = 0; g < grid.size(); ++g) emp[g] += smoothed_density(spectra[i], grid[g], eta_s);
      SampleRow row;
      row.seed = sample_seed(base, i);
      row.n = n;
      row.trace_sq1 = spectra[i].squaredNorm();
      rec.rows.push_back(row);
    }
    double sup = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      emp[g] /= static_cast<double>(samples);
      sup = std::max(sup, std::abs(emp[g] - smooth.rho[g]));
    }

    // Free convolution of one sampled matrix with a semicircle of variance t.
    const RealVector& hat = spectra.front();
    auto mhat = [&hat](Complex z) { return resolvent_trace(hat, z); };
    std::vector<Complex> zs;
    for (double e : grid) zs.push_back(Complex(e, eta_s));
    const auto fc = free_convolution_check(mhat, free_t, zs);
    const Matrix h_hat = sample_pair(spec, sample_seed(base, 0), hash).h1;
    const std::uint64_t fbase = derive_seed(c.master_seed, 5, n, 0);
    auto fspectra = map_indexed<RealVector>(samples, [&](std::size_t i) {
      const Matrix g = sample_gaussian_invariant(n, sym, sample_seed(fbase, i));
      return eigen_spectrum(h_hat + std::sqrt(free_t) * g, sym);
    });
    double fsup = 0.0, fres = 0.0;
    std::ostringstream dens;
    dens << "E,rho_mde,rho_empirical,rho_free_convolution,rho_free_convolution_empirical\n" << std::setprecision(17);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double e = 0.0;
      for (const auto& l : fspectra) e += smoothed_density(l, grid[g], eta_s);
      e /= static_cast<double>(samples);
      const double rc = fc[g].mc.imag() / std::numbers::pi;
      fsup = std::max(fsup, std::abs(e - rc));
      fres = std::max(fres, fc[g].residual);
      dens << grid[g] << ',' << smooth.rho[g] << ',' << emp[g] << ',' << rc << ',' << e << '\n';
    }
    rec.extra_files["density_n" + std::to_string(n) + ".csv"] = dens.str();
    rec.extra_files["scdos_n" + std::to_string(n) + ".csv"] = sol.csv();

    int max_iter = 0;
    double max_res = 0.0;
    for (std::size_t i = 0; i < sol.curve.iterations.size(); ++i) {
      max_iter = std::max(max_iter, sol.curve.iterations[i]);
      max_res = std::max(max_res, sol.curve.residual[i]);
    }
    const auto mid = std::min_element(sol.curve.energies.begin(), sol.curve.energies.end(),
                                      [](double x, double y) { return std::abs(x) < std::abs(y); });
    per_n.push_back(Json{{"n", n},
                         {"eta_smooth", eta_s},
                         {"sup_distance", sup},
                         {"free_convolution_t", free_t},
                         {"free_convolution_sup_distance", fsup},
                         {"free_convolution_max_residual", fres},
                         {"kappa", kappa},
                         {"kappa_bulk", bulk},
                         {"density_mass", mass},
                         {"rho_center", sol.curve.rho[static_cast<std::size_t>(mid - sol.curve.energies.begin())]},
                         {"scdos_max_iterations", max_iter},
                         {"scdos_max_residual", max_res}});
  }
  rec.summary = Json{{"per_n", per_n}};
  return rec;
}

ExperimentRecord run_trace_corr_identity(const ExperimentConfig& c) {
  ExperimentRecord rec = new_record(c);
  const int boot = static_cast<int>(c.param("bootstrap", 1000));
  Json per_n = Json::array();
  for (int n : c.n_list) {
    const auto alphas = c.alphas_for(n);
    Json points = Json::array();
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
      const double alpha = alphas[ai];
      const std::uint64_t base = derive_seed(c.master_seed, 6, n, static_cast<int>(ai));
      auto rows = map_indexed<SampleRow>(static_cast<std::size_t>(c.mc_samples), [&](std::size_t i) {
        SampleRow row;
        row.seed = sample_seed(base, i);
        row.n = n;
        row.alpha = alpha;
        const MatrixPairSample p = sample_mixture_pair(n, alpha, row.seed);
        row.trace_sq1 = trace_square(p.h1);
        row.trace_sq2 = trace_square(p.h2);
        return row;
      });
      std::vector<double> xi1, xi2;
      for (const auto& r : rows) {
        xi1.push_back(r.trace_sq1);
        xi2.push_back(r.trace_sq2);
        rec.rows.push_back(r);
      }
      const auto est = trace_square_correlation(xi1, xi2, boot, base);
      const double expected = (1.0 - alpha) * (1.0 - alpha);
      points.push_back(Json{{"alpha", alpha},
                            {"correlation", est.corr},
                            {"ci_low", est.ci_low},
                            {"ci_high", est.ci_high},
                            {"correlation_se", est.se},
                            {"expected", expected},
                            {"deviation", est.corr - expected}});
    }
    per_n.push_back(Json{{"n", n}, {"points", points}});
  }
  rec.summary = Json{{"per_n", per_n}};
  return rec;
}

ExperimentRecord run_experiment(const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentRecord rec;
  switch (c.experiment) {
    case ExperimentKind::ThresholdSweep:
      rec = run_threshold_sweep(c);
      break;
    case ExperimentKind::OptimalityDemo:
      rec = run_optimality_demo(c);
      break;
    case ExperimentKind::GftContinuity:
      rec = run_gft_continuity(c);
      break;
    case ExperimentKind::MdeValidation:
      rec = run_mde_validation(c);
      break;
    case ExperimentKind::TraceCorrIdentity:
      rec = run_trace_corr_identity(c);
      break;
  }
  rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace corrpair
