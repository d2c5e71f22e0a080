#include <doctest.h>

#include <algorithm>
#include <numbers>

#include "corrpair/spectral_stats.hpp"
#include "oracles.hpp"

using namespace corrpair;

namespace {

// Roots of det(x I - h) for a real symmetric 3x3 matrix, by bisection on the cubic.
std::vector<double> cubic_roots(const RealMatrix& h) {
  const double c2 = -h.trace();
  const double c1 = h(0, 0) * h(1, 1) + h(0, 0) * h(2, 2) + h(1, 1) * h(2, 2) - h(0, 1) * h(0, 1) -
                    h(0, 2) * h(0, 2) - h(1, 2) * h(1, 2);
  const double c0 = -h.determinant();
  auto p = [&](double x) { return ((x + c2) * x + c1) * x + c0; };
  // Split at the critical points of the cubic.
  const double disc = std::sqrt(c2 * c2 - 3.0 * c1);
  const double x1 = (-c2 - disc) / 3.0, x2 = (-c2 + disc) / 3.0;
  const double big = 1.0 + std::abs(c2) + std::abs(c1) + std::abs(c0);
  return {oracle::bisect(p, -big, x1), oracle::bisect(p, x1, x2), oracle::bisect(p, x2, big)};
}

std::vector<SpectrumPair> pairs_from(const std::function<MatrixPairSample(std::uint64_t)>& draw, int count,
                                     std::uint64_t master) {
  std::vector<SpectrumPair> out;
  for (int i = 0; i < count; ++i) out.push_back(spectrum_pair(draw(sample_seed(master, i)), SymmetryClass::RealSymmetric));
  return out;
}

}  // namespace

TEST_CASE("eigen_spectrum on simple matrices") {
  const int n = 7;
  CHECK((eigen_spectrum(Matrix::Identity(n, n), SymmetryClass::RealSymmetric).array() == 1.0).all());
  Matrix d = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) d(i, i) = static_cast<double>(n - i) / n;
  const RealVector l = eigen_spectrum(d, SymmetryClass::ComplexHermitian);
  for (int i = 0; i < n; ++i) CHECK(l(i) == doctest::Approx(static_cast<double>(i + 1) / n).epsilon(1e-15));
}

TEST_CASE("3x3 arrow matrix matches the cubic root oracle") {
  RealMatrix h(3, 3);
  h << 2.0, 0.7, -1.3, 0.7, -0.5, 0.0, -1.3, 0.0, 1.1;
  const auto want = cubic_roots(h);
  const RealVector got = eigen_spectrum(h.cast<Complex>(), SymmetryClass::RealSymmetric);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(got(i) - want[static_cast<std::size_t>(i)]) <= 1e-12);
}

TEST_CASE("sum of squared eigenvalues equals Tr H^2") {
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian}) {
    const Matrix h = sample_gaussian_invariant(150, s, 3);
    const double direct = trace_square(h);
    CHECK(eigen_spectrum(h, s).squaredNorm() == doctest::Approx(direct).epsilon(1e-8));
    CHECK(direct == doctest::Approx((h * h).trace().real()).epsilon(1e-12));
  }
}

TEST_CASE("resolvent trace") {
  RealVector one(1);
  one << 0.0;
  CHECK(std::abs(resolvent_trace(one, Complex(0.0, 1.0)) - Complex(0.0, 1.0)) < 1e-15);
  const RealVector l = eigen_spectrum(sample_gaussian_invariant(1000, SymmetryClass::RealSymmetric, 4),
                                      SymmetryClass::RealSymmetric);
  const Complex g = resolvent_trace(l, Complex(0.0, 1.0));
  CHECK(std::abs(g - Complex(0.0, 0.618)) <= 0.05);
  const Complex z(0.3, 0.01);
  CHECK(resolvent_trace(l, std::conj(z)) == std::conj(resolvent_trace(l, z)));
}

TEST_CASE("local law residual") {
  const int n = 300;
  const RealVector l = eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, 5),
                                      SymmetryClass::RealSymmetric);
  std::vector<Complex> zs = {Complex(0.2, 0.05), Complex(-0.5, 0.3)};
  std::vector<Complex> g;
  for (auto z : zs) g.push_back(resolvent_trace(l, z));
  CHECK(local_law_residual(l, zs, g) == 0.0);
  int within = 0;
  const int samples = 100;
  for (int i = 0; i < samples; ++i) {
    const RealVector li = eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, sample_seed(6, i)),
                                         SymmetryClass::RealSymmetric);
    const Complex far(0.0, 10.0);
    CHECK(local_law_residual(li, {far}, {oracle::msc(far)}) <= 2.0);
    const Complex z(0.1, std::pow(n, -0.8));
    if (local_law_residual(li, {z}, {oracle::msc(z)}) <= 10.0) ++within;
  }
  CHECK(within >= 97);
}

TEST_CASE("Green function size below the spectral resolution") {
  const int n = 200;
  const RealVector l = eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, 7),
                                      SymmetryClass::RealSymmetric);
  const double rho = 1.0 / std::numbers::pi;
  for (double eta = 1e-6; eta <= 1.0; eta *= 10.0) {
    const double g = std::abs(resolvent_trace(l, Complex(0.05, eta)));
    CHECK(g <= 10.0 * std::max(rho, 1.0 / (n * eta)));
  }
}

TEST_CASE("nearest fluctuations") {
  RealVector l(2);
  l << 0.0, 1.0;
  const auto x = nearest_fluctuations(l, LocalWindow::make(0.4, 1.0));
  REQUIRE(x.size() == 1);
  CHECK(x[0] == doctest::Approx(-0.8));
  // Ties go to the smaller index.
  CHECK(nearest_fluctuations(l, LocalWindow::make(0.5, 1.0))[0] == doctest::Approx(-1.0));
  // k = N returns everything.
  RealVector eq(6);
  const double rho = 0.5;
  for (int i = 0; i < 6; ++i) eq(i) = -0.7 + i / (6 * rho);
  const auto all = nearest_fluctuations(eq, LocalWindow::make(0.0, rho, 6));
  REQUIRE(all.size() == 6);
  for (int i = 1; i < 6; ++i) CHECK(all[i] - all[i - 1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(LocalWindow::make(2.1, 0.01, 1, 0.05), std::invalid_argument);
}

TEST_CASE("normalizers C_k") {
  for (int n : {50, 400})
    for (int k = 1; k <= 4; ++k) {
      const double rho = 0.3;
      const double c = correlation_normalizer(n, k, rho);
      CHECK(std::abs(c / std::pow(rho, k) - 1.0) <= 2.0 * k * k / static_cast<double>(n));
    }
  CHECK(correlation_normalizer(10, 1, 0.7) == doctest::Approx(0.7));
  CHECK(correlation_normalizer(10, 2, 1.0) == doctest::Approx(10.0 / 9.0));
}

TEST_CASE("test functions") {
  const auto b = bump(2.0);
  CHECK(b.eval(0.0) == 1.0);
  CHECK(b.eval(2.0) == 0.0);
  CHECK(b.eval(1.0) == doctest::Approx(std::pow(0.75, 3)));
  const auto g = gaussian_cosine(1.0, 2.0);
  CHECK(g.eval(0.5) == doctest::Approx(std::exp(-0.125) * std::cos(1.0)));
  CHECK(g.eval(9.0) == 0.0);
  // Catmull-Rom on a nonuniform grid reproduces nodes and linear data.
  std::vector<double> xs = {-2.0, -1.2, -0.1, 0.5, 1.7, 2.0};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(3.0 * x - 1.0);
  const auto t = tabulated(xs, ys);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(t.eval(xs[i]) == doctest::Approx(ys[i]));
  for (double x : {-1.9, -0.5, 0.2, 1.1, 1.9}) CHECK(t.eval(x) == doctest::Approx(3.0 * x - 1.0));
  CHECK(t.eval(2.5) == 0.0);
  RealMatrix v(3, 2);
  v << 1, 2, 3, 4, 5, 6;
  const auto t2 = tabulated2d({0.0, 1.0, 2.0}, {0.0, 1.0}, v);
  const double x = 1.0, y = 1.0;
  CHECK(t2.eval(&x, &y) == doctest::Approx(4.0));
  const double xb = 0.5, yb = 0.5;
  CHECK(t2.eval(&xb, &yb) == doctest::Approx(2.5));
}

TEST_CASE("tuple sums run over distinct indices") {
  const auto f = product_function(2, 1, {10.0, [](double) { return 1.0; }}, {10.0, [](double) { return 1.0; }});
  // m = 2 over 3 points: 3 * 2 ordered pairs, times 2 points for y.
  CHECK(tuple_sum(f, {0.1, 0.2, 0.3}, {0.0, 1.0}) == 12.0);
  const auto z = zero_function(1, 1);
  CHECK(tuple_sum(z, {0.1}, {0.2}) == 0.0);
}

TEST_CASE("joint statistic: independent pair has zero gap, F = 0 gives zeros") {
  const int n = 40;
  const double rho = 1.0 / std::numbers::pi;
  const auto w = LocalWindow::make(0.0, rho);
  std::vector<SpectrumPair> ind;
  for (int i = 0; i < 10000; ++i) {
    SpectrumPair p;
    p.lambdas1 = eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, sample_seed(32, i)),
                                SymmetryClass::RealSymmetric);
    p.lambdas2 = eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, sample_seed(33, i)),
                                SymmetryClass::RealSymmetric);
    ind.push_back(p);
  }
  const auto js = joint_local_statistic(ind, bump_product(1, 1, 2.0), w, w);
  CHECK(std::abs(js.gap) <= 3.0 * js.gap_se);
  CHECK(js.joint > 0.0);
  const auto zero = joint_local_statistic(ind, zero_function(1, 1), w, w);
  CHECK(zero.joint == 0.0);
  CHECK(zero.product == 0.0);
  CHECK(zero.gap == 0.0);
  CHECK_THROWS_AS(joint_local_statistic(ind, bump_product(1, 1, 2.0), w, w, 1e-9), InsufficientSamples);
}

TEST_CASE("joint statistic: F depending on x only has no gap for a correlated pair") {
  const int n = 40;
  const double rho = 1.0 / std::numbers::pi;
  const auto w = LocalWindow::make(0.0, rho);
  const auto samples = pairs_from(
      [&](std::uint64_t seed) { return sample_shared_pair(n, SymmetryClass::RealSymmetric, 1e-4, seed); }, 4000,
      41);
  const LocalFunction one{1e9, [](double) { return 1.0; }};
  const auto f = product_function(1, 1, bump(2.0), one);
  const auto js = joint_local_statistic(samples, f, w, w);
  CHECK(std::abs(js.gap) <= 3.0 * js.gap_se);
}

TEST_CASE("identical matrices: the gap is the diagonal term") {
  const int n = 40;
  const double rho = 1.0 / std::numbers::pi;
  const auto w = LocalWindow::make(0.0, rho);
  const auto f = bump_product(1, 1, 2.0);
  const auto same = pairs_from(
      [&](std::uint64_t seed) { return sample_shared_pair(n, SymmetryClass::RealSymmetric, 0.0, seed); }, 6000, 51);
  std::vector<RealVector> singles_a, singles_b;
  for (int i = 0; i < 6000; ++i) {
    singles_a.push_back(eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, sample_seed(52, i)),
                                       SymmetryClass::RealSymmetric));
    singles_b.push_back(eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, sample_seed(53, i)),
                                       SymmetryClass::RealSymmetric));
  }
  const auto js = joint_local_statistic(same, f, w, w);
  const auto p2 = pair_correlation_term(singles_a, f, w);
  const auto diag = diagonal_term(singles_b, f, w);
  const double excess = js.joint - p2.mean;
  CHECK(std::abs(excess - diag.mean) <= 3.0 * std::sqrt(js.joint_se * js.joint_se + p2.se * p2.se + diag.se * diag.se));
  CHECK(js.gap > 5.0 * js.gap_se);
}

TEST_CASE("fluctuation correlation") {
  const int n = 40;
  const auto w = LocalWindow::make(0.0, 1.0 / std::numbers::pi);
  const auto same = pairs_from(
      [&](std::uint64_t seed) { return sample_shared_pair(n, SymmetryClass::RealSymmetric, 0.0, seed); }, 300, 61);
  CHECK(fluctuation_correlation(same, w, w).corr == 1.0);
  std::vector<SpectrumPair> ind;
  for (int i = 0; i < 400; ++i) {
    SpectrumPair p;
    p.lambdas1 = eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, sample_seed(62, i)),
                                SymmetryClass::RealSymmetric);
    p.lambdas2 = eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, sample_seed(63, i)),
                                SymmetryClass::RealSymmetric);
    ind.push_back(p);
  }
  const auto c = fluctuation_correlation(ind, w, w, 500, 1);
  CHECK(std::abs(c.corr) <= 3.0 / std::sqrt(400.0));
  CHECK(c.ci_low <= c.corr);
  CHECK(c.corr <= c.ci_high);
  // Scale invariance in the window densities.
  const auto scaled = fluctuation_correlation(ind, LocalWindow::make(0.0, 2.0 / std::numbers::pi),
                                              LocalWindow::make(0.0, 3.0 / std::numbers::pi), 500, 1);
  CHECK(scaled.corr == doctest::Approx(c.corr).epsilon(1e-12));
  std::vector<SpectrumPair> few(ind.begin(), ind.begin() + 50);
  CHECK_THROWS_AS(fluctuation_correlation(few, w, w), std::invalid_argument);
}

TEST_CASE("Pearson and Spearman") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {1, 4, 9, 16, 25};
  CHECK(spearman(x, y) == doctest::Approx(1.0));
  CHECK(pearson(x, y) < 1.0);
  CHECK(pearson(x, {2, 4, 6, 8, 10}) == doctest::Approx(1.0));
  CHECK(spearman(x, {5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 2, 3}) == doctest::Approx(1.0));
}

TEST_CASE("trace square correlation at the endpoints") {
  const int n = 30;
  std::vector<double> a1, a2, b1, b2;
  for (int i = 0; i < 2000; ++i) {
    const auto p = sample_mixture_pair(n, 0.0, sample_seed(71, i));
    a1.push_back(trace_square(p.h1));
    a2.push_back(trace_square(p.h2));
    const auto q = sample_mixture_pair(n, 1.0, sample_seed(72, i));
    b1.push_back(trace_square(q.h1));
    b2.push_back(trace_square(q.h2));
  }
  CHECK(trace_square_correlation(a1, a2).corr == 1.0);
  const auto ind = trace_square_correlation(b1, b2);
  CHECK(std::abs(ind.corr) <= 3.0 * ind.se);
}

TEST_CASE("gap ratio of a Poisson spectrum") {
  Rng rng(81);
  RealVector pts(100000);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = uniform01(rng);
  std::sort(pts.data(), pts.data() + pts.size());
  const auto r = gap_ratio_statistic(pts, {0.0, 1.0});
  CHECK(std::abs(r.mean - (2.0 * std::log(2.0) - 1.0)) <= 0.01);
  RealVector few = pts.head(20);
  CHECK_THROWS(gap_ratio_statistic(few, {0.0, 1.0}));
}

TEST_CASE("Green observable") {
  SpectrumPair p;
  p.lambdas1 = RealVector::LinSpaced(4, -1.0, 1.0);
  p.lambdas2 = p.lambdas1;
  CHECK(green_observable(p, {}, {}).value == 1.0);
  const double e = p.lambdas1(1), eta = 1e-3;
  const auto g = green_observable(p, {Complex(e, eta)}, {});
  // The pole at E dominates: (1/N)(1/eta) plus the far eigenvalues.
  double want = 0.0;
  for (int i = 0; i < 4; ++i) want += eta / ((p.lambdas1(i) - e) * (p.lambdas1(i) - e) + eta * eta) / 4.0;
  CHECK(g.value == doctest::Approx(want).epsilon(1e-14));
  CHECK(g.value == doctest::Approx(1.0 / (4.0 * eta)).epsilon(1e-5));
  const auto two = green_observable(p, {Complex(0.1, 0.1)}, {Complex(0.2, 0.1), Complex(-0.3, 0.2)});
  CHECK(two.factors1.size() == 1);
  CHECK(two.factors2.size() == 2);
  CHECK(two.value == doctest::Approx(two.factors1[0] * two.factors2[0] * two.factors2[1]));
  for (double v : two.factors2) CHECK(v > 0.0);
}
