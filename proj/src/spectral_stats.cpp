#include "corrpair/spectral_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "corrpair/rng.hpp"

namespace corrpair {

RealVector eigen_spectrum(const Matrix& h, SymmetryClass s) {
  if (h.rows() != h.cols()) throw std::invalid_argument("eigen_spectrum needs a square matrix");
  if (s == SymmetryClass::RealSymmetric) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(h.real(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
    return es.eigenvalues();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return es.eigenvalues();
}

SpectrumPair spectrum_pair(const MatrixPairSample& sample, SymmetryClass s) {
  return {eigen_spectrum(sample.h1, s), eigen_spectrum(sample.h2, s), sample.seed};
}

Complex resolvent_trace(const RealVector& lambdas, Complex z) {
  if (z.imag() == 0.0) throw std::invalid_argument("resolvent_trace needs Im z != 0");
  Complex acc = 0.0;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) acc += 1.0 / (lambdas(i) - z);
  return acc / static_cast<double>(lambdas.size());
}

double local_law_residual(const RealVector& lambdas, const std::vector<Complex>& zs,
                          const std::vector<Complex>& m_trace) {
  if (zs.size() != m_trace.size()) throw std::invalid_argument("z grid and M values differ in length");
  double worst = 0.0;
  const double n = static_cast<double>(lambdas.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double r = std::abs(resolvent_trace(lambdas, zs[i]) - m_trace[i]) * n * std::abs(zs[i].imag());
    worst = std::max(worst, r);
  }
  return worst;
}

LocalWindow LocalWindow::make(double energy, double rho, int k, double kappa) {
  if (!(rho > 0.0) || rho < kappa)
    throw std::invalid_argument("window energy is outside the kappa-bulk (rho = " + std::to_string(rho) + ")");
  if (k < 1) throw std::invalid_argument("k must be positive");
  return {energy, rho, k};
}

std::vector<double> nearest_fluctuations(const RealVector& lambdas, const LocalWindow& w) {
  const int n = static_cast<int>(lambdas.size());
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(lambdas(a) - w.energy) < std::abs(lambdas(b) - w.energy);
  });
  const int k = std::min(w.k, n);
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  std::vector<double> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back((lambdas(i) - w.energy) * n * w.rho);
  return out;
}

double correlation_normalizer(int n, int k, double rho) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c *= static_cast<double>(n) / (n - i) * rho;
  return c;
}

LocalFunction bump(double width) {
  return {width, [width](double x) {
            const double u = x / width;
            if (std::abs(u) >= 1.0) return 0.0;
            const double v = 1.0 - u * u;
            return v * v * v;
          }};
}

LocalFunction gaussian_cosine(double width, double freq) {
  return {8.0 * width, [width, freq](double x) {
            if (std::abs(x) > 8.0 * width) return 0.0;
            return std::exp(-x * x / (2.0 * width * width)) * std::cos(freq * x);
          }};
}

namespace {

// Cubic Hermite with Catmull-Rom tangents on a possibly nonuniform grid.
double catmull_rom(const std::vector<double>& xs, const double* v, std::ptrdiff_t stride, double x) {
  const std::size_t n = xs.size();
  if (x < xs.front() || x > xs.back()) return 0.0;
  if (n == 1) return v[0];
  std::size_t i = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
  auto val = [&](std::size_t j) { return v[static_cast<std::ptrdiff_t>(j) * stride]; };
  auto tangent = [&](std::size_t j) {
    if (j == 0) return (val(1) - val(0)) / (xs[1] - xs[0]);
    if (j == n - 1) return (val(n - 1) - val(n - 2)) / (xs[n - 1] - xs[n - 2]);
    return (val(j + 1) - val(j - 1)) / (xs[j + 1] - xs[j - 1]);
  };
  const double h = xs[i + 1] - xs[i];
  const double t = (x - xs[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * val(i) + (t3 - 2 * t2 + t) * h * tangent(i) + (-2 * t3 + 3 * t2) * val(i + 1) +
         (t3 - t2) * h * tangent(i + 1);
}

void check_grid(const std::vector<double>& xs, std::size_t values) {
  if (xs.empty() || xs.size() != values) throw std::invalid_argument("tabulated grid and values differ in length");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("tabulated grid must be strictly increasing");
}

}  // namespace

LocalFunction tabulated(std::vector<double> xs, std::vector<double> values) {
  check_grid(xs, values.size());
  const double radius = std::max(std::abs(xs.front()), std::abs(xs.back()));
  return {radius, [xs = std::move(xs), values = std::move(values)](double x) {
            return catmull_rom(xs, values.data(), 1, x);
          }};
}

TestFunction product_function(int m, int n, const LocalFunction& f, const LocalFunction& g) {
  TestFunction t;
  t.m = m;
  t.n = n;
  t.radius = std::max(f.radius, g.radius);
  t.eval = [m, n, fe = f.eval, ge = g.eval](const double* x, const double* y) {
    double v = 1.0;
    for (int i = 0; i < m; ++i) v *= fe(x[i]);
    for (int j = 0; j < n; ++j) v *= ge(y[j]);
    return v;
  };
  t.label = "product";
  return t;
}

TestFunction bump_product(int m, int n, double width) {
  TestFunction t = product_function(m, n, bump(width), bump(width));
  t.label = "bump_product";
  return t;
}

TestFunction gaussian_cosine_product(int m, int n, double width, double freq) {
  TestFunction t = product_function(m, n, gaussian_cosine(width, freq), gaussian_cosine(width, freq));
  t.label = "gaussian_cosine_product";
  return t;
}

TestFunction tabulated2d(std::vector<double> xs, std::vector<double> ys, RealMatrix values) {
  if (values.rows() != static_cast<Eigen::Index>(xs.size()) || values.cols() != static_cast<Eigen::Index>(ys.size()))
    throw std::invalid_argument("tabulated values do not match the grid");
  check_grid(xs, xs.size());
  check_grid(ys, ys.size());
  TestFunction t;
  t.radius = std::max({std::abs(xs.front()), std::abs(xs.back()), std::abs(ys.front()), std::abs(ys.back())});
  t.eval = [xs = std::move(xs), ys = std::move(ys), values = std::move(values)](const double* x, const double* y) {
    if (x[0] < xs.front() || x[0] > xs.back() || y[0] < ys.front() || y[0] > ys.back()) return 0.0;
    std::vector<double> col(ys.size());
    for (std::size_t j = 0; j < ys.size(); ++j)
      col[j] = catmull_rom(xs, values.data() + static_cast<std::ptrdiff_t>(j) * values.rows(), 1, x[0]);
    return catmull_rom(ys, col.data(), 1, y[0]);
  };
  t.label = "tabulated2d";
  return t;
}

TestFunction zero_function(int m, int n) {
  TestFunction t;
  t.m = m;
  t.n = n;
  t.radius = 1.0;
  t.eval = [](const double*, const double*) { return 0.0; };
  t.label = "zero";
  return t;
}

namespace {

// Sum over ordered distinct tuples: fills buf[pos..] from pts, skipping used.
void tuple_recurse(const std::vector<double>& pts, int depth, std::vector<double>& buf, std::vector<char>& used,
                   const std::function<void()>& leaf) {
  if (depth == static_cast<int>(buf.size())) {
    leaf();
    return;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (used[i]) continue;
    used[i] = 1;
    buf[static_cast<std::size_t>(depth)] = pts[i];
    tuple_recurse(pts, depth + 1, buf, used, leaf);
    used[i] = 0;
  }
}

}  // namespace

double tuple_sum(const TestFunction& f, const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> bx(static_cast<std::size_t>(f.m)), by(static_cast<std::size_t>(f.n));
  std::vector<char> ux(x.size(), 0), uy(y.size(), 0);
  double acc = 0.0;
  tuple_recurse(x, 0, bx, ux, [&] {
    tuple_recurse(y, 0, by, uy, [&] { acc += f.eval(bx.data(), by.data()); });
  });
  return acc;
}

std::vector<double> window_points(const RealVector& lambdas, const LocalWindow& w, double radius) {
  std::vector<double> out;
  const double scale = static_cast<double>(lambdas.size()) * w.rho;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    const double x = (lambdas(i) - w.energy) * scale;
    if (std::abs(x) <= radius) out.push_back(x);
  }
  return out;
}

namespace {

MeanEstimate mean_se(const std::vector<double>& v) {
  MeanEstimate e;
  e.samples = v.size();
  if (v.empty()) return e;
  e.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - e.mean) * (x - e.mean);
    e.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return e;
}

}  // namespace

JointStatistic joint_local_statistic(const std::vector<SpectrumPair>& samples, const TestFunction& f,
                                     const LocalWindow& w1, const LocalWindow& w2, double tolerance) {
  const std::size_t half = samples.size() / 2;
  if (half < 1) throw InsufficientSamples("joint_local_statistic needs at least two samples");
  const int n1 = static_cast<int>(samples.front().lambdas1.size());
  const int n2 = static_cast<int>(samples.front().lambdas2.size());
  const double norm = correlation_normalizer(n1, f.m, w1.rho) * correlation_normalizer(n2, f.n, w2.rho);

  std::vector<std::vector<double>> xs(2 * half), ys(2 * half);
  for (std::size_t i = 0; i < 2 * half; ++i) {
    xs[i] = window_points(samples[i].lambdas1, w1, f.radius);
    ys[i] = window_points(samples[i].lambdas2, w2, f.radius);
  }
  std::vector<double> joint(2 * half), gaps(half), prods(half);
  for (std::size_t i = 0; i < 2 * half; ++i) joint[i] = norm * tuple_sum(f, xs[i], ys[i]);
  for (std::size_t i = 0; i < half; ++i) {
    const double p = 0.5 * norm * (tuple_sum(f, xs[i], ys[i + half]) + tuple_sum(f, xs[i + half], ys[i]));
    prods[i] = p;
    gaps[i] = 0.5 * (joint[i] + joint[i + half]) - p;
  }
  const MeanEstimate j = mean_se(joint);
  const MeanEstimate p = mean_se(prods);
  const MeanEstimate g = mean_se(gaps);
  JointStatistic out{j.mean, j.se, p.mean, p.se, g.mean, g.se, 2 * half};
  if (out.gap_se > tolerance)
    throw InsufficientSamples("standard error " + std::to_string(out.gap_se) + " exceeds tolerance");
  return out;
}

MeanEstimate pair_correlation_term(const std::vector<RealVector>& spectra, const TestFunction& f,
                                   const LocalWindow& w) {
  if (f.m != 1 || f.n != 1) throw std::invalid_argument("pair_correlation_term needs m = n = 1");
  std::vector<double> v;
  v.reserve(spectra.size());
  for (const auto& l : spectra) {
    const auto x = window_points(l, w, f.radius);
    const double c2 = correlation_normalizer(static_cast<int>(l.size()), 2, w.rho);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j)
        if (i != j) acc += f.eval(&x[i], &x[j]);
    v.push_back(c2 * acc);
  }
  return mean_se(v);
}

MeanEstimate diagonal_term(const std::vector<RealVector>& spectra, const TestFunction& f, const LocalWindow& w) {
  if (f.m != 1 || f.n != 1) throw std::invalid_argument("diagonal_term needs m = n = 1");
  std::vector<double> v;
  v.reserve(spectra.size());
  for (const auto& l : spectra) {
    const auto x = window_points(l, w, f.radius);
    const double c1 = correlation_normalizer(static_cast<int>(l.size()), 1, w.rho);
    double acc = 0.0;
    for (double xi : x) acc += f.eval(&xi, &xi);
    v.push_back(c1 * c1 * acc);
  }
  return mean_se(v);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson needs two equal-length samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) { return pearson(ranks(x), ranks(y)); }

CorrelationEstimate correlation_with_bootstrap(const std::vector<double>& x, const std::vector<double>& y,
                                               int resamples, std::uint64_t seed) {
  CorrelationEstimate e;
  e.samples = x.size();
  e.corr = pearson(x, y);
  if (resamples <= 0) {
    e.ci_low = e.ci_high = e.corr;
    return e;
  }
  Rng rng = child_stream(seed, 0);
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<double> boot;
  boot.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> bx(x.size()), by(y.size());
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t k = pick(rng);
      bx[i] = x[k];
      by[i] = y[k];
    }
    const double c = pearson(bx, by);
    if (std::isfinite(c)) boot.push_back(c);
  }
  if (boot.empty()) {
    e.ci_low = e.ci_high = e.corr;
    return e;
  }
  std::sort(boot.begin(), boot.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(boot.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, boot.size() - 1);
    return boot[lo] + (pos - static_cast<double>(lo)) * (boot[hi] - boot[lo]);
  };
  e.ci_low = quantile(0.025);
  e.ci_high = quantile(0.975);
  const MeanEstimate m = mean_se(boot);
  e.se = m.se * std::sqrt(static_cast<double>(boot.size()));
  return e;
}

CorrelationEstimate fluctuation_correlation(const std::vector<SpectrumPair>& samples, const LocalWindow& w1,
                                            const LocalWindow& w2, int resamples, std::uint64_t seed) {
  if (samples.size() < 100) throw std::invalid_argument("fluctuation_correlation needs at least 100 samples");
  LocalWindow a = w1, b = w2;
  a.k = b.k = 1;
  std::vector<double> x, y;
  x.reserve(samples.size());
  y.reserve(samples.size());
  for (const auto& s : samples) {
    x.push_back(nearest_fluctuations(s.lambdas1, a).front());
    y.push_back(nearest_fluctuations(s.lambdas2, b).front());
  }
  return correlation_with_bootstrap(x, y, resamples, seed);
}

double trace_square(const Matrix& h) { return h.cwiseAbs2().sum(); }

CorrelationEstimate trace_square_correlation(const std::vector<double>& xi1, const std::vector<double>& xi2,
                                             int resamples, std::uint64_t seed) {
  return correlation_with_bootstrap(xi1, xi2, resamples, seed);
}

GapRatio gap_ratio_statistic(const RealVector& lambdas, const Interval& bulk) {
  std::vector<double> inside;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i)
    if (lambdas(i) >= bulk.lo && lambdas(i) <= bulk.hi) inside.push_back(lambdas(i));
  if (inside.size() < 50) throw std::invalid_argument("gap_ratio_statistic needs at least 50 bulk eigenvalues");
  std::sort(inside.begin(), inside.end());
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + 2 < inside.size(); ++i) {
    const double g1 = inside[i + 1] - inside[i];
    const double g2 = inside[i + 2] - inside[i + 1];
    const double hi = std::max(g1, g2);
    if (hi <= 0.0) continue;
    acc += std::min(g1, g2) / hi;
    ++count;
  }
  return {count ? acc / static_cast<double>(count) : 0.0, count};
}

GreenObservable green_observable(const SpectrumPair& pair, const std::vector<Complex>& z1,
                                 const std::vector<Complex>& z2) {
  GreenObservable g;
  g.z1 = z1;
  g.z2 = z2;
  for (Complex z : z1) {
    const double f = resolvent_trace(pair.lambdas1, z).imag();
    g.factors1.push_back(f);
    g.value *= f;
  }
  for (Complex z : z2) {
    const double f = resolvent_trace(pair.lambdas2, z).imag();
    g.factors2.push_back(f);
    g.value *= f;
  }
  return g;
}

}  // namespace corrpair
