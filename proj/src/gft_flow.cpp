#include "corrpair/gft_flow.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Eigenvalues>

namespace corrpair {

double EntryFlowData::max_rate() const {
  double r = 0.0;
  for (const auto& c : coords) r = std::max(r, 0.5 * c.q * c.lambda(1));
  return r;
}

double EntryFlowData::max_s_norm() const {
  double r = 0.0;
  for (const auto& c : coords) r = std::max(r, c.lambda(1));
  return r;
}

EntryFlowData build_entry_data(const CorrelationProfile& profile, SymmetryClass sym) {
  EntryFlowData d;
  d.n = profile.n();
  d.symmetry = sym;
  d.alpha = profile.alpha;
  const double n = d.n;
  const bool complex_class = sym == SymmetryClass::ComplexHermitian;
  d.by_row.assign(static_cast<std::size_t>(d.n), {});
  for (const auto& e : basis(d.n, sym)) {
    CoordinateFlow c;
    c.a = e.i;
    c.b = e.k;
    c.part = e.part;
    const bool diag = e.i == e.k;
    double v1 = profile.variance1(e.i, e.k);
    double v2 = profile.variance2(e.i, e.k);
    const double rho = profile.cross(e.i, e.k);
    if (complex_class) {
      c.q = diag ? 1.0 / n : 0.5 / n;
      if (!diag) {
        v1 *= 0.5;
        v2 *= 0.5;
      }
    } else {
      c.q = diag ? 2.0 / n : 1.0 / n;
    }
    const double off = rho * std::sqrt(v1 * v2);
    c.c << v1, off, off, v2;
    const double det = v1 * v2 - off * off;
    if (!(v1 > 0 && v2 > 0 && det > 1e-14 * v1 * v2))
      throw DegenerateCovariance("singular 2x2 covariance at entry (" + std::to_string(e.i) + "," +
                                 std::to_string(e.k) + ")");
    c.s << v2 / det, -off / det, -off / det, v1 / det;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c.s);
    c.lambda = es.eigenvalues();
    c.o = es.eigenvectors();
    d.by_row[static_cast<std::size_t>(e.i)].push_back(static_cast<int>(d.coords.size()));
    d.coords.push_back(c);
  }
  return d;
}

double coordinate_value(const Matrix& w, const CoordinateFlow& c) {
  return c.part == BasisMatrix::Part::Real ? w(c.a, c.b).real() : w(c.a, c.b).imag();
}

namespace {

void set_coordinate(Matrix& w, const CoordinateFlow& c, double v) {
  if (c.a == c.b) {
    w(c.a, c.a) = v;
    return;
  }
  const Complex old = w(c.a, c.b);
  const Complex nv = c.part == BasisMatrix::Part::Real ? Complex(v, old.imag()) : Complex(old.real(), v);
  w(c.a, c.b) = nv;
  w(c.b, c.a) = std::conj(nv);
}

Eigen::Vector2d pair_value(const Matrix& w1, const Matrix& w2, const CoordinateFlow& c) {
  return {coordinate_value(w1, c), coordinate_value(w2, c)};
}

}  // namespace

FlowState make_flow_state(const Matrix& w1, const Matrix& w2, std::shared_ptr<const EntryFlowData> entries,
                          std::uint64_t seed) {
  if (!entries || w1.rows() != entries->n || w2.rows() != entries->n)
    throw std::invalid_argument("flow state dimension mismatch");
  FlowState s;
  s.w1 = w1;
  s.w2 = w2;
  s.w1_initial = w1;
  s.w2_initial = w2;
  s.entries = std::move(entries);
  s.seed = seed;
  return s;
}

FlowState evolve_exact(const FlowState& state, double t_target, Backend backend) {
  if (t_target < state.t) throw std::invalid_argument("evolve_exact cannot run backwards in time");
  FlowState out = state;
  const double dt = t_target - state.t;
  if (dt == 0.0) return out;
  const EntryFlowData& d = *state.entries;
  auto row = [&](int a) {
    Rng rng = child_stream(state.seed, state.step, static_cast<std::uint64_t>(a));
    for (int idx : d.by_row[static_cast<std::size_t>(a)]) {
      const CoordinateFlow& c = d.coords[static_cast<std::size_t>(idx)];
      Eigen::Vector2d xi = c.o.transpose() * pair_value(state.w1, state.w2, c);
      for (int j = 0; j < 2; ++j) {
        const double k = c.q * c.lambda(j);
        const double var = -std::expm1(-k * dt) / c.lambda(j);
        xi(j) = std::exp(-0.5 * k * dt) * xi(j) + std::sqrt(var) * standard_normal(rng);
      }
      const Eigen::Vector2d x = c.o * xi;
      set_coordinate(out.w1, c, x(0));
      set_coordinate(out.w2, c, x(1));
    }
  };
  if (backend == Backend::Serial) {
    for (int a = 0; a < d.n; ++a) row(a);
  } else {
#pragma omp parallel for schedule(static)
    for (int a = 0; a < d.n; ++a) row(a);
  }
  out.t = t_target;
  out.step = state.step + 1;
  return out;
}

BrownianPath BrownianPath::coarsen(int factor) const {
  if (factor < 1 || steps() % factor != 0) throw std::invalid_argument("coarsening factor must divide the step count");
  BrownianPath p;
  p.dt = dt * factor;
  p.increments = RealMatrix::Zero(increments.rows(), steps() / factor);
  for (int k = 0; k < steps(); ++k) p.increments.col(k / factor) += increments.col(k);
  return p;
}

BrownianPath sample_brownian_path(const EntryFlowData& data, int steps, double dt, Rng& rng) {
  BrownianPath p;
  p.dt = dt;
  p.increments.resize(static_cast<Eigen::Index>(2 * data.coords.size()), steps);
  const double sd = std::sqrt(dt);
  for (int k = 0; k < steps; ++k)
    for (Eigen::Index r = 0; r < p.increments.rows(); ++r) p.increments(r, k) = sd * standard_normal(rng);
  return p;
}

FlowState evolve_em(const FlowState& state, const BrownianPath& path, const EmOptions& options) {
  const EntryFlowData& d = *state.entries;
  if (path.increments.rows() != static_cast<Eigen::Index>(2 * d.coords.size()))
    throw std::invalid_argument("Brownian path does not match the flow data");
  FlowState out = state;
  const double dt = path.dt;
  for (std::size_t i = 0; i < d.coords.size(); ++i) {
    const CoordinateFlow& c = d.coords[i];
    Eigen::Vector2d x = pair_value(state.w1, state.w2, c);
    const double sq = std::sqrt(c.q);
    for (int k = 0; k < path.steps(); ++k) {
      Eigen::Vector2d nx = x - 0.5 * c.q * dt * (c.s * x);
      if (options.diffusion) {
        nx(0) += sq * path.increments(static_cast<Eigen::Index>(2 * i), k);
        nx(1) += sq * path.increments(static_cast<Eigen::Index>(2 * i + 1), k);
      }
      x = nx;
    }
    set_coordinate(out.w1, c, x(0));
    set_coordinate(out.w2, c, x(1));
  }
  out.t = state.t + dt * path.steps();
  return out;
}

FlowState evolve_exact_given_path(const FlowState& state, const BrownianPath& path) {
  const EntryFlowData& d = *state.entries;
  if (path.increments.rows() != static_cast<Eigen::Index>(2 * d.coords.size()))
    throw std::invalid_argument("Brownian path does not match the flow data");
  FlowState out = state;
  const double dt = path.dt;
  for (std::size_t i = 0; i < d.coords.size(); ++i) {
    const CoordinateFlow& c = d.coords[i];
    Eigen::Vector2d xi = c.o.transpose() * pair_value(state.w1, state.w2, c);
    Eigen::Vector2d decay, weight;
    for (int j = 0; j < 2; ++j) {
      const double kdt = 0.5 * c.q * c.lambda(j) * dt;
      decay(j) = std::exp(-kdt);
      weight(j) = -std::expm1(-kdt) / kdt;
    }
    const double sq = std::sqrt(c.q);
    for (int k = 0; k < path.steps(); ++k) {
      const Eigen::Vector2d db(path.increments(static_cast<Eigen::Index>(2 * i), k),
                               path.increments(static_cast<Eigen::Index>(2 * i + 1), k));
      const Eigen::Vector2d eta = c.o.transpose() * db;
      xi = decay.cwiseProduct(xi) + sq * weight.cwiseProduct(eta);
    }
    const Eigen::Vector2d x = c.o * xi;
    set_coordinate(out.w1, c, x(0));
    set_coordinate(out.w2, c, x(1));
  }
  out.t = state.t + dt * path.steps();
  return out;
}

EmResult evolve_em(const FlowState& state, double t_target, double dt, Rng& rng, const EmOptions& options) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (t_target < state.t) throw std::invalid_argument("evolve_em cannot run backwards in time");
  const double span = t_target - state.t;
  const int steps = static_cast<int>(std::ceil(span / dt - 1e-9));
  const double h = steps > 0 ? span / steps : dt;
  const double stiffness = h * state.entries->max_rate();
  if (stiffness >= 2.0)
    throw StepSizeUnstable("dt * rate = " + std::to_string(stiffness) + " exceeds the stability limit 2");
  EmResult r;
  r.path = sample_brownian_path(*state.entries, steps, h, rng);
  r.state = evolve_em(state, r.path, options);
  r.state.t = t_target;
  r.accuracy_warning = stiffness > 0.1;
  return r;
}

Matrix GaussianDivisibleDecomposition::reconstructed(int j) const {
  return j == 1 ? Matrix(what1 + std::sqrt(s) * wg1) : Matrix(what2 + std::sqrt(s) * wg2);
}

GaussianDivisibleDecomposition gaussian_divisible_split(const FlowState& state, Rng& rng) {
  const EntryFlowData& d = *state.entries;
  const double t = state.t;
  if (!(t > 0)) throw std::invalid_argument("gaussian_divisible_split needs t > 0");
  if (t > d.alpha * (1.0 + 1e-12)) throw std::invalid_argument("gaussian_divisible_split needs t <= alpha");

  GaussianDivisibleDecomposition g;
  g.t = t;
  g.s = std::numeric_limits<double>::infinity();
  for (const auto& c : d.coords)
    for (int j = 0; j < 2; ++j) g.s = std::min(g.s, -std::expm1(-c.q * c.lambda(j) * t) / c.lambda(j) / c.q);
  g.c_star = g.s / t;

  const int n = d.n;
  g.what1 = Matrix::Zero(n, n);
  g.what2 = Matrix::Zero(n, n);
  g.wg1 = Matrix::Zero(n, n);
  g.wg2 = Matrix::Zero(n, n);
  g.injected.resize(static_cast<Eigen::Index>(d.coords.size()), 2);
  for (std::size_t i = 0; i < d.coords.size(); ++i) {
    const CoordinateFlow& c = d.coords[i];
    const Eigen::Vector2d h(standard_normal(rng), standard_normal(rng));
    const Eigen::Vector2d xi0 = c.o.transpose() * pair_value(state.w1_initial, state.w2_initial, c);
    Eigen::Vector2d hat;
    for (int j = 0; j < 2; ++j) {
      const double k = c.q * c.lambda(j);
      const double var = -std::expm1(-k * t) / c.lambda(j);
      const double rest = std::max(0.0, var - g.s * c.q);
      hat(j) = std::exp(-0.5 * k * t) * xi0(j) + std::sqrt(rest) * standard_normal(rng);
    }
    const Eigen::Vector2d x = c.o * hat;
    const double sq = std::sqrt(c.q);
    g.injected(static_cast<Eigen::Index>(i), 0) = h(0);
    g.injected(static_cast<Eigen::Index>(i), 1) = h(1);
    set_coordinate(g.what1, c, x(0));
    set_coordinate(g.what2, c, x(1));
    set_coordinate(g.wg1, c, sq * h(0));
    set_coordinate(g.wg2, c, sq * h(1));
  }
  return g;
}

DriftDiagnostic drift_norm_diagnostic(const FlowState& state) {
  const EntryFlowData& d = *state.entries;
  DriftDiagnostic r;
  const double n = d.n;
  r.naive_bound = n * n / (d.alpha * d.alpha);
  r.improved_bound = n * n / d.alpha;
  double acc = 0.0;
  for (const auto& c : d.coords) {
    const Eigen::Vector2d sx = c.s * pair_value(state.w1, state.w2, c);
    const double g = c.a == c.b ? 1.0 : 2.0;
    acc += sx.squaredNorm() / g;
  }
  r.measured = acc / (2.0 * n);
  return r;
}

void write_flow_trajectory_csv(const std::string& path, const std::vector<FlowTrajectoryRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "t,mean_var1,mean_var2,mean_cov,drift_measured\n" << std::setprecision(17);
  for (const auto& r : rows)
    f << r.t << ',' << r.mean_var1 << ',' << r.mean_var2 << ',' << r.mean_cov << ',' << r.drift_measured << '\n';
}

}  // namespace corrpair
